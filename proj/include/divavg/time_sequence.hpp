#pragma once

#include <cstdint>
#include <vector>

namespace divavg {

/// Strictly increasing sampling times t(i) = c_1 i + c_2 i^2 + ... with t(0) = 0.
///
/// The identity sequence t(i) = i is the default. Polynomial times are used for
/// averages taken along a subsequence of times; the constant term must vanish
/// so that the first orbit vector is the cyclic vector itself.
class TimeSequence {
 public:
  TimeSequence() : coefficients_{0, 1} {}

  static TimeSequence identity() { return {}; }
  /// coefficients[d] multiplies i^d. Throws ValidationError unless coefficients[0] == 0,
  /// all coefficients are nonnegative and at least one of degree >= 1 is positive.
  static TimeSequence polynomial(std::vector<std::int64_t> coefficients);

  /// Throws ValidationError when t(i) would exceed max_time().
  std::int64_t operator()(std::int64_t i) const;

  bool is_identity() const noexcept;
  const std::vector<std::int64_t>& coefficients() const noexcept { return coefficients_; }

  /// Largest index i with t(i) <= time, or -1 when none.
  std::int64_t last_index_within(std::int64_t time) const;

  static constexpr std::int64_t max_time() noexcept { return std::int64_t{1} << 52; }

  friend bool operator==(const TimeSequence&, const TimeSequence&) = default;

 private:
  explicit TimeSequence(std::vector<std::int64_t> c) : coefficients_(std::move(c)) {}
  std::vector<std::int64_t> coefficients_;
};

}  // namespace divavg
