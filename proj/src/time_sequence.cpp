#include "divavg/time_sequence.hpp"

#include <string>

#include "divavg/errors.hpp"

namespace divavg {

TimeSequence TimeSequence::polynomial(std::vector<std::int64_t> coefficients) {
  while (coefficients.size() > 2 && coefficients.back() == 0) coefficients.pop_back();
  if (coefficients.size() < 2) {
    throw ValidationError("time sequence needs at least a linear coefficient");
  }
  if (coefficients[0] != 0) {
    throw ValidationError("time sequence must start at t(0) = 0");
  }
  bool increasing = false;
  for (std::size_t d = 0; d < coefficients.size(); ++d) {
    if (coefficients[d] < 0) {
      throw ValidationError("time sequence coefficients must be nonnegative");
    }
    if (d >= 1 && coefficients[d] > 0) increasing = true;
  }
  if (!increasing) throw ValidationError("time sequence is constant");
  return TimeSequence(std::move(coefficients));
}

std::int64_t TimeSequence::operator()(std::int64_t i) const {
  if (i < 0) throw UsageError("time index must be nonnegative");
  if (is_identity()) {
    if (i > max_time()) throw ValidationError("time index exceeds supported range");
    return i;
  }
  // Horner in 128-bit to detect overflow.
  __int128 acc = 0;
  for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) {
    acc = acc * i + *it;
    if (acc > max_time()) {
      throw ValidationError("time t(" + std::to_string(i) + ") exceeds supported range");
    }
  }
  return static_cast<std::int64_t>(acc);
}

bool TimeSequence::is_identity() const noexcept {
  return coefficients_.size() == 2 && coefficients_[0] == 0 && coefficients_[1] == 1;
}

std::int64_t TimeSequence::last_index_within(std::int64_t time) const {
  if (time < 0) return -1;
  if (is_identity()) return time;
  std::int64_t lo = 0, hi = 1;
  auto fits = [&](std::int64_t i) {
    try {
      return (*this)(i) <= time;
    } catch (const ValidationError&) {
      return false;
    }
  };
  while (fits(hi)) hi *= 2;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (fits(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace divavg
