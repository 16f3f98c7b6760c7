#pragma once

// Spectral measures on the circle and their correlation sequences.
//
// A symmetric probability measure sigma on [-pi, pi) determines the correlation
// sequence r(i) = integral of cos(i theta) d sigma(theta), which is the only input
// the rest of the library needs: r(i) = <U^i xi, xi> for the unit cyclic vector xi.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace divavg {

/// Normalized Lebesgue measure: r(i) = [i == 0].
struct Lebesgue {
  friend bool operator==(const Lebesgue&, const Lebesgue&) = default;
};

/// Uniform density on [-epsilon, epsilon]: r(i) = sin(i epsilon) / (i epsilon).
struct Arc {
  double epsilon = 0.0;
  friend bool operator==(const Arc&, const Arc&) = default;
};

/// J-fold convolution of (delta(-2pi/b^j) + delta(2pi/b^j)) / 2, j = 1..J.
/// Atomic (2^J atoms); behaves like its atomless limit only for lags below b^J / 4.
struct ConvolutionTruncated {
  std::int64_t base = 2;
  int factors = 1;
  friend bool operator==(const ConvolutionTruncated&, const ConvolutionTruncated&) = default;
};

/// Density sampled as a table and integrated with the composite midpoint rule
/// on `nodes` uniform nodes over [-pi, pi]. Tables covering only [0, pi] are
/// reflected. Values between samples are linearly interpolated; outside the
/// table the density is zero.
struct QuadratureDensity {
  std::vector<double> theta;
  std::vector<double> density;
  std::int64_t nodes = 4096;
  std::string source;  // CSV path the table was read from, if any
  friend bool operator==(const QuadratureDensity&, const QuadratureDensity&) = default;
};

/// Explicit correlation values r(0), r(1), ..., r(L); zero beyond L.
/// Not necessarily positive definite, which makes it the vehicle for
/// exercising the PSD guards.
struct CorrelationTable {
  std::vector<double> values;
  friend bool operator==(const CorrelationTable&, const CorrelationTable&) = default;
};

class SpectrumFamily;

/// Convex combination of families; weights must sum to one.
struct Mixture {
  std::vector<double> weights;
  std::vector<SpectrumFamily> components;
  friend bool operator==(const Mixture&, const Mixture&);
};

class SpectrumFamily {
 public:
  using Variant =
      std::variant<Lebesgue, Arc, ConvolutionTruncated, Mixture, QuadratureDensity, CorrelationTable>;

  SpectrumFamily() = default;
  template <typename T>
    requires std::is_constructible_v<Variant, T&&>
  SpectrumFamily(T&& value) : value_(std::forward<T>(value)) {}  // NOLINT(google-explicit-constructor)

  const Variant& value() const noexcept { return value_; }

  template <typename T>
  const T* get_if() const noexcept {
    return std::get_if<T>(&value_);
  }

  friend bool operator==(const SpectrumFamily&, const SpectrumFamily&) = default;

 private:
  Variant value_;
};

inline bool operator==(const Mixture& a, const Mixture& b) {
  return a.weights == b.weights && a.components == b.components;
}

/// Short lowercase tag: lebesgue, arc, convolution_truncated, mixture,
/// quadrature_density, table.
std::string family_name(const SpectrumFamily& family);

/// Throws ValidationError on invalid parameters.
void validate(const SpectrumFamily& family);

bool is_atomless(const SpectrumFamily& family);

/// Lag range over which an atomic truncation stands in for its atomless limit.
std::optional<std::int64_t> validity_horizon(const SpectrumFamily& family);

/// Largest lag with a possibly nonzero correlation, when finite.
std::optional<std::int64_t> correlation_support(const SpectrumFamily& family);

/// Reads a two-column (theta, density) CSV with an optional header row.
QuadratureDensity load_density_csv(const std::string& path, std::int64_t nodes);

/// Result of a positive-semidefiniteness check on a Toeplitz window.
struct PsdReport {
  std::int64_t window = 0;
  /// Smallest pivot of the diagonally pivoted factorization, counting the
  /// residual diagonal left once the remainder falls within tolerance.
  double min_eigenvalue_estimate = 0.0;
  bool ok = false;
  double tolerance = 0.0;
  /// 1-based order of the first leading minor whose pivot fell below -tolerance.
  std::optional<std::int64_t> failing_minor;
  /// Size of the trailing block left unfactored as numerically dependent.
  std::int64_t dependent_columns = 0;
};

/// Correlation sequence of a spectral family with a lag-indexed cache.
///
/// operator() is const and never mutates: lags below the cached range are read
/// from the cache, larger lags are evaluated directly. prefetch() is the single
/// writer; once it returns, concurrent readers are safe.
class CorrelationSequence {
 public:
  explicit CorrelationSequence(SpectrumFamily family);

  double operator()(std::int64_t lag) const;
  double correlation(std::int64_t lag) const { return (*this)(lag); }

  /// Fills the cache for lags 0..max_lag.
  void prefetch(std::int64_t max_lag);
  std::int64_t cached_lags() const noexcept { return static_cast<std::int64_t>(cache_.size()); }

  const SpectrumFamily& family() const noexcept { return family_; }
  std::optional<std::int64_t> support() const noexcept { return support_; }
  std::optional<std::int64_t> horizon() const noexcept { return horizon_; }

 private:
  double evaluate(std::uint64_t lag) const;

  SpectrumFamily family_;
  std::optional<std::int64_t> support_;
  std::optional<std::int64_t> horizon_;
  std::vector<double> cache_;
  // Normalized midpoint rule for QuadratureDensity.
  std::vector<double> angles_;
  std::vector<double> weights_;
  // Child sequences for Mixture.
  std::vector<CorrelationSequence> children_;
};

/// PSD tolerance used for an N x N window.
inline double psd_tolerance(std::int64_t window) { return 1e-8 * static_cast<double>(window); }

/// ok iff Cholesky with diagonal pivoting meets no pivot below -tolerance.
/// On failure, failing_minor names the smallest leading window that fails.
PsdReport validate_psd(const CorrelationSequence& seq, std::int64_t window);

/// (1/n) sum_{i<n} r(i)^2, a Wiener-type proxy for weak mixing.
double wiener_average(const CorrelationSequence& seq, std::int64_t n);

/// ||U^q xi - xi||^2 = 2 (1 - r(q)).
double rigidity_defect(const CorrelationSequence& seq, std::int64_t q);

/// Rigidity defect of the Gaussian system, whose maximal spectral type has
/// normalized coefficients (e^{r} - 1) / (e - 1).
double system_rigidity_defect(const CorrelationSequence& seq, std::int64_t q);
double system_rigidity_defect_from_correlation(double r);

}  // namespace divavg
