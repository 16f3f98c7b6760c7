#include "divavg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "divavg/errors.hpp"

namespace divavg {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr std::int64_t kMaxConvolutionModulus = std::int64_t{1} << 62;

std::int64_t checked_power(std::int64_t base, int exponent) {
  std::int64_t value = 1;
  for (int j = 0; j < exponent; ++j) {
    if (value > kMaxConvolutionModulus / base) {
      throw ValidationError("convolution_truncated: base^factors exceeds 2^62");
    }
    value *= base;
  }
  return value;
}

double interpolate_density(const QuadratureDensity& q, double theta) {
  const auto& xs = q.theta;
  if (xs.front() >= 0.0) theta = std::abs(theta);
  if (theta < xs.front() || theta > xs.back()) return 0.0;
  auto hi = std::upper_bound(xs.begin(), xs.end(), theta);
  if (hi == xs.end()) return q.density.back();
  if (hi == xs.begin()) return q.density.front();
  const auto k = static_cast<std::size_t>(hi - xs.begin());
  const double t = (theta - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return q.density[k - 1] + t * (q.density[k] - q.density[k - 1]);
}

}  // namespace

std::string family_name(const SpectrumFamily& family) {
  return std::visit(overloaded{
                        [](const Lebesgue&) { return std::string("lebesgue"); },
                        [](const Arc&) { return std::string("arc"); },
                        [](const ConvolutionTruncated&) { return std::string("convolution_truncated"); },
                        [](const Mixture&) { return std::string("mixture"); },
                        [](const QuadratureDensity&) { return std::string("quadrature_density"); },
                        [](const CorrelationTable&) { return std::string("table"); },
                    },
                    family.value());
}

void validate(const SpectrumFamily& family) {
  std::visit(overloaded{
                 [](const Lebesgue&) {},
                 [](const Arc& a) {
                   if (!(a.epsilon > 0.0 && a.epsilon <= std::numbers::pi)) {
                     throw ValidationError("arc: epsilon must lie in (0, pi]");
                   }
                 },
                 [](const ConvolutionTruncated& c) {
                   if (c.base < 2) throw ValidationError("convolution_truncated: base must be >= 2");
                   if (c.factors < 1) throw ValidationError("convolution_truncated: factors must be >= 1");
                   checked_power(c.base, c.factors);
                 },
                 [](const Mixture& m) {
                   if (m.components.empty()) throw ValidationError("mixture: no components");
                   if (m.weights.size() != m.components.size()) {
                     throw ValidationError("mixture: weight count does not match component count");
                   }
                   double total = 0.0;
                   for (double w : m.weights) {
                     if (!(w >= 0.0)) throw ValidationError("mixture: weights must be nonnegative");
                     total += w;
                   }
                   if (std::abs(total - 1.0) > 1e-9) {
                     throw ValidationError("mixture: weights must sum to 1");
                   }
                   for (const auto& c : m.components) validate(c);
                 },
                 [](const QuadratureDensity& q) {
                   if (q.nodes < 2) throw ValidationError("quadrature_density: nodes must be >= 2");
                   if (q.theta.size() < 2 || q.theta.size() != q.density.size()) {
                     throw ValidationError("quadrature_density: need at least two (theta, density) rows");
                   }
                   for (std::size_t k = 0; k < q.theta.size(); ++k) {
                     if (!std::isfinite(q.theta[k]) || !std::isfinite(q.density[k])) {
                       throw ValidationError("quadrature_density: non-finite table entry");
                     }
                     if (q.density[k] < 0.0) {
                       throw ValidationError("quadrature_density: invalid density table (negative density)");
                     }
                     if (k > 0 && !(q.theta[k] > q.theta[k - 1])) {
                       throw ValidationError("quadrature_density: theta must be strictly increasing");
                     }
                   }
                   if (q.theta.front() < -std::numbers::pi - 1e-12 || q.theta.back() > std::numbers::pi + 1e-12) {
                     throw ValidationError("quadrature_density: theta must lie in [-pi, pi]");
                   }
                 },
                 [](const CorrelationTable& t) {
                   if (t.values.empty()) throw ValidationError("table: no correlation values");
                   if (t.values.front() != 1.0) throw ValidationError("table: r(0) must equal 1");
                   for (double v : t.values) {
                     if (!std::isfinite(v)) throw ValidationError("table: non-finite correlation value");
                   }
                 },
             },
             family.value());
}

bool is_atomless(const SpectrumFamily& family) {
  return std::visit(overloaded{
                        [](const Lebesgue&) { return true; },
                        [](const Arc&) { return true; },
                        [](const ConvolutionTruncated&) { return false; },
                        [](const Mixture& m) {
                          for (std::size_t c = 0; c < m.components.size(); ++c) {
                            if (m.weights[c] > 0.0 && !is_atomless(m.components[c])) return false;
                          }
                          return true;
                        },
                        [](const QuadratureDensity&) { return true; },
                        [](const CorrelationTable&) { return false; },
                    },
                    family.value());
}

std::optional<std::int64_t> validity_horizon(const SpectrumFamily& family) {
  return std::visit(overloaded{
                        [](const ConvolutionTruncated& c) -> std::optional<std::int64_t> {
                          return checked_power(c.base, c.factors) / 4;
                        },
                        [](const Mixture& m) -> std::optional<std::int64_t> {
                          std::optional<std::int64_t> h;
                          for (std::size_t c = 0; c < m.components.size(); ++c) {
                            if (m.weights[c] <= 0.0) continue;
                            if (auto hc = validity_horizon(m.components[c])) h = h ? std::min(*h, *hc) : *hc;
                          }
                          return h;
                        },
                        [](const auto&) -> std::optional<std::int64_t> { return std::nullopt; },
                    },
                    family.value());
}

std::optional<std::int64_t> correlation_support(const SpectrumFamily& family) {
  return std::visit(overloaded{
                        [](const Lebesgue&) -> std::optional<std::int64_t> { return 0; },
                        [](const CorrelationTable& t) -> std::optional<std::int64_t> {
                          return static_cast<std::int64_t>(t.values.size()) - 1;
                        },
                        [](const Mixture& m) -> std::optional<std::int64_t> {
                          std::int64_t s = 0;
                          for (std::size_t c = 0; c < m.components.size(); ++c) {
                            if (m.weights[c] <= 0.0) continue;
                            auto sc = correlation_support(m.components[c]);
                            if (!sc) return std::nullopt;
                            s = std::max(s, *sc);
                          }
                          return s;
                        },
                        [](const auto&) -> std::optional<std::int64_t> { return std::nullopt; },
                    },
                    family.value());
}

QuadratureDensity load_density_csv(const std::string& path, std::int64_t nodes) {
  std::ifstream in(path);
  if (!in) throw ValidationError("quadrature_density: cannot open " + path);
  QuadratureDensity q;
  q.nodes = nodes;
  q.source = path;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    fields.imbue(std::locale::classic());
    double theta = 0.0, density = 0.0;
    if (!(fields >> theta >> density)) {
      if (q.theta.empty() && row == 1) continue;  // header
      throw ValidationError("quadrature_density: malformed row " + std::to_string(row) + " in " + path);
    }
    q.theta.push_back(theta);
    q.density.push_back(density);
  }
  validate(q);
  return q;
}

CorrelationSequence::CorrelationSequence(SpectrumFamily family) : family_(std::move(family)) {
  validate(family_);
  support_ = correlation_support(family_);
  horizon_ = validity_horizon(family_);
  if (const auto* q = family_.get_if<QuadratureDensity>()) {
    const auto m = static_cast<std::size_t>(q->nodes);
    const double h = 2.0 * std::numbers::pi / static_cast<double>(m);
    angles_.resize(m);
    weights_.resize(m);
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      angles_[k] = -std::numbers::pi + (static_cast<double>(k) + 0.5) * h;
      weights_[k] = interpolate_density(*q, angles_[k]) * h;
      total += weights_[k];
    }
    if (!(total > 0.0)) throw ValidationError("quadrature_density: density integrates to zero");
    for (double& w : weights_) w /= total;
  } else if (const auto* mix = family_.get_if<Mixture>()) {
    children_.reserve(mix->components.size());
    for (const auto& c : mix->components) children_.emplace_back(c);
  }
}

double CorrelationSequence::operator()(std::int64_t lag) const {
  const std::uint64_t a = lag < 0 ? static_cast<std::uint64_t>(-(lag + 1)) + 1 : static_cast<std::uint64_t>(lag);
  if (a < cache_.size()) return cache_[a];
  return evaluate(a);
}

void CorrelationSequence::prefetch(std::int64_t max_lag) {
  const auto want = static_cast<std::size_t>(std::max<std::int64_t>(max_lag + 1, 0));
  for (std::size_t lag = cache_.size(); lag < want; ++lag) cache_.push_back(evaluate(lag));
}

double CorrelationSequence::evaluate(std::uint64_t lag) const {
  return std::visit(
      overloaded{
          [&](const Lebesgue&) { return lag == 0 ? 1.0 : 0.0; },
          [&](const Arc& a) {
            if (lag == 0) return 1.0;
            const double x = static_cast<double>(lag) * a.epsilon;
            return std::sin(x) / x;
          },
          [&](const ConvolutionTruncated& c) {
            // Reduce i mod b^j exactly so that lags divisible by b^j give cos(0) = 1.
            double product = 1.0;
            auto modulus = static_cast<std::uint64_t>(c.base);
            for (int j = 1; j <= c.factors; ++j) {
              const std::uint64_t residue = lag % modulus;
              product *= std::cos(2.0 * std::numbers::pi * static_cast<double>(residue) /
                                  static_cast<double>(modulus));
              modulus *= static_cast<std::uint64_t>(c.base);
            }
            return product;
          },
          [&](const Mixture& m) {
            double sum = 0.0;
            for (std::size_t k = 0; k < children_.size(); ++k) {
              if (m.weights[k] != 0.0) sum += m.weights[k] * children_[k].evaluate(lag);
            }
            return sum;
          },
          [&](const QuadratureDensity&) {
            double sum = 0.0;
            const double dl = static_cast<double>(lag);
            for (std::size_t k = 0; k < angles_.size(); ++k) sum += weights_[k] * std::cos(dl * angles_[k]);
            constexpr double tol = 1e-9;
            if (std::abs(sum) > 1.0 + tol) {
              throw ValidationError("quadrature_density: invalid density table (|r(" + std::to_string(lag) +
                                    ")| > 1)");
            }
            return std::clamp(sum, -1.0, 1.0);
          },
          [&](const CorrelationTable& t) { return lag < t.values.size() ? t.values[lag] : 0.0; },
      },
      family_.value());
}

namespace {

struct PivotedCheck {
  bool ok = true;
  long double min_pivot = std::numeric_limits<long double>::infinity();
  std::int64_t dependent = 0;
};

// Cholesky with diagonal pivoting on the leading m x m window. Once every
// remaining diagonal entry is within tolerance the trailing block is pure
// rounding noise: for a PSD matrix all of its entries are then bounded by tol.
PivotedCheck pivoted_check(const CorrelationSequence& seq, std::int64_t m, long double tol) {
  const auto n = static_cast<std::size_t>(m);
  std::vector<long double> s(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) s[i * n + j] = seq(static_cast<std::int64_t>(i) - static_cast<std::int64_t>(j));
  }
  PivotedCheck out;
  std::size_t k = 0;
  for (; k < n; ++k) {
    std::size_t p = k;
    long double lowest = s[k * n + k];
    for (std::size_t j = k; j < n; ++j) {
      if (s[j * n + j] > s[p * n + p]) p = j;
      lowest = std::min(lowest, s[j * n + j]);
    }
    if (lowest < -tol) {
      out.ok = false;
      out.min_pivot = std::min(out.min_pivot, lowest);
      return out;
    }
    const long double d = s[p * n + p];
    if (d <= tol) break;
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(s[k * n + j], s[p * n + j]);
      for (std::size_t j = 0; j < n; ++j) std::swap(s[j * n + k], s[j * n + p]);
    }
    out.min_pivot = std::min(out.min_pivot, d);
    for (std::size_t i = k + 1; i < n; ++i) {
      const long double f = s[i * n + k] / d;
      if (f == 0.0L) continue;
      for (std::size_t j = k + 1; j <= i; ++j) s[i * n + j] -= f * s[j * n + k];
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < i; ++j) s[j * n + i] = s[i * n + j];
    }
  }
  out.dependent = static_cast<std::int64_t>(n - k);
  long double off = 0.0L;
  for (std::size_t i = k; i < n; ++i) {
    out.min_pivot = std::min(out.min_pivot, s[i * n + i]);
    for (std::size_t j = k; j < i; ++j) off = std::max(off, std::abs(s[i * n + j]));
  }
  if (off > tol) {
    // Small diagonal but large coupling: an indefinite 2 x 2 block.
    out.ok = false;
    out.min_pivot = std::min(out.min_pivot, -off);
  }
  return out;
}

}  // namespace

PsdReport validate_psd(const CorrelationSequence& seq, std::int64_t window) {
  if (window < 1) throw UsageError("validate_psd: window must be >= 1");
  PsdReport report;
  report.window = window;
  report.tolerance = psd_tolerance(window);
  const auto tol = static_cast<long double>(report.tolerance);
  const auto full = pivoted_check(seq, window, tol);
  report.min_eigenvalue_estimate = static_cast<double>(full.min_pivot);
  report.dependent_columns = full.dependent;
  report.ok = full.ok;
  if (!full.ok) {
    // Leading windows are principal submatrices, so failure is monotone in the
    // order: double until a window fails, then bisect.
    std::int64_t good = 0, bad = 1;
    while (bad < window && pivoted_check(seq, bad, tol).ok) {
      good = bad;
      bad = std::min(window, 2 * bad);
    }
    while (bad - good > 1) {
      const std::int64_t mid = good + (bad - good) / 2;
      (pivoted_check(seq, mid, tol).ok ? good : bad) = mid;
    }
    report.failing_minor = bad;
  }
  return report;
}

double wiener_average(const CorrelationSequence& seq, std::int64_t n) {
  if (n < 1) throw UsageError("wiener_average: n must be >= 1");
  // Neumaier summation; n can reach 10^6 and beyond.
  double sum = 0.0, carry = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double r = seq(i);
    const double term = r * r;
    const double t = sum + term;
    carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return (sum + carry) / static_cast<double>(n);
}

double rigidity_defect(const CorrelationSequence& seq, std::int64_t q) {
  if (q < 1) throw UsageError("rigidity_defect: q must be >= 1");
  return 2.0 * (1.0 - seq(q));
}

double system_rigidity_defect_from_correlation(double r) {
  // expm1(1) can be folded at compile time and differ from the runtime value
  // by an ulp, so the rigid case is pinned explicitly.
  if (r == 1.0) return 0.0;
  return 2.0 * (1.0 - std::expm1(r) / std::expm1(1.0));
}

double system_rigidity_defect(const CorrelationSequence& seq, std::int64_t q) {
  if (q < 1) throw UsageError("system_rigidity_defect: q must be >= 1");
  return system_rigidity_defect_from_correlation(seq(q));
}

}  // namespace divavg
