#include "divavg/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "divavg/errors.hpp"

namespace divavg {

GramLadder::GramLadder(CorrelationSequence seq, TimeSequence times, LadderOptions options)
    : seq_(std::move(seq)), times_(std::move(times)), options_(options) {
  if (!(options_.jitter_cap >= 0.0) || !(options_.jitter_start > 0.0) || !(options_.jitter_growth > 1.0)) {
    throw ValidationError("ladder: invalid jitter policy");
  }
}

double GramLadder::regularized_correlation(std::int64_t lag) const {
  return (seq_(lag) + (lag == 0 ? jitter_ : 0.0)) / (1.0 + jitter_);
}

long double GramLadder::gram(std::int64_t i, std::int64_t j) const {
  long double g = seq_(times_(i) - times_(j));
  if (i == j) g += jitter_;
  return g;
}

std::int64_t GramLadder::first_column(std::int64_t i) const {
  const auto support = seq_.support();
  if (!support) return 0;
  const std::int64_t earliest = times_(i) - *support;
  if (times_.is_identity()) return std::max<std::int64_t>(0, earliest);
  // First j with t(j) >= earliest.
  return times_.last_index_within(earliest - 1) + 1;
}

void GramLadder::reset() {
  size_ = 0;
  data_.clear();
  offsets_.clear();
  first_.clear();
}

GramLadder::AppendFailure GramLadder::append_rows(std::int64_t new_size, long double& min_pivot) {
  for (std::int64_t i = size_; i < new_size; ++i) {
    const std::int64_t f = first_column(i);
    const std::size_t offset = data_.size();
    const auto width = static_cast<std::size_t>(i - f + 1);
    if (static_cast<std::int64_t>(offset + width) > options_.max_entries) {
      throw UsageError("ladder: window " + std::to_string(new_size) + " exceeds factor storage capacity");
    }
    data_.resize(offset + width, 0.0L);
    long double* li = data_.data() + offset;
    long double diag = gram(i, i);
    for (std::int64_t j = f; j < i; ++j) {
      const std::int64_t fj = first_[static_cast<std::size_t>(j)];
      const long double* lj = row(j);
      long double s = gram(i, j);
      for (std::int64_t k = std::max(f, fj); k < j; ++k) s -= li[k - f] * lj[k - fj];
      const long double v = s / lj[j - fj];
      li[j - f] = v;
      diag -= v * v;
    }
    min_pivot = std::min(min_pivot, diag);
    if (diag < static_cast<long double>(options_.pivot_floor)) {
      data_.resize(offset);
      return {i, diag};
    }
    li[i - f] = std::sqrt(diag);
    offsets_.push_back(offset);
    first_.push_back(f);
    size_ = i + 1;
  }
  return {};
}

void GramLadder::forward_solve(std::vector<long double>& rhs, std::int64_t window, std::int64_t start) const {
  for (std::int64_t j = start; j < window; ++j) {
    const std::int64_t fj = first_[static_cast<std::size_t>(j)];
    const long double* lj = row(j);
    long double s = rhs[static_cast<std::size_t>(j)];
    for (std::int64_t k = std::max(fj, start); k < j; ++k) s -= lj[k - fj] * rhs[static_cast<std::size_t>(k)];
    rhs[static_cast<std::size_t>(j)] = s / lj[j - fj];
  }
}

long double GramLadder::estimate_min_eigenvalue() const {
  // Inverse iteration on L L^T; 1/||(LL^T)^{-1} x|| for unit x bounds the
  // smallest eigenvalue from above and converges to it.
  const auto n = static_cast<std::size_t>(size_);
  if (n == 0) return 0.0L;
  std::vector<long double> x(n);
  std::uint64_t state = 0x9E3779B97F4A7C15ULL;
  for (auto& v : x) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    v = 0.5L + static_cast<long double>(state >> 11) / static_cast<long double>(1ULL << 53);
  }
  long double estimate = std::numeric_limits<long double>::infinity();
  for (int iter = 0; iter < 40; ++iter) {
    long double norm = 0.0L;
    for (auto v : x) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : x) v /= norm;
    forward_solve(x, size_, 0);
    // Back substitution with L^T, column-oriented over the stored rows.
    for (std::int64_t j = size_ - 1; j >= 0; --j) {
      const std::int64_t fj = first_[static_cast<std::size_t>(j)];
      const long double* lj = row(j);
      const long double w = x[static_cast<std::size_t>(j)] / lj[j - fj];
      x[static_cast<std::size_t>(j)] = w;
      for (std::int64_t k = fj; k < j; ++k) x[static_cast<std::size_t>(k)] -= lj[k - fj] * w;
    }
    long double grown = 0.0L;
    for (auto v : x) grown += v * v;
    const long double next = 1.0L / std::sqrt(grown);
    const bool settled = std::abs(next - estimate) <= 1e-4L * next;
    estimate = next;
    if (settled) break;
  }
  return estimate;
}

ExtendResult GramLadder::extend(std::int64_t new_size) {
  if (new_size <= size_) {
    throw UsageError("ladder: extend to " + std::to_string(new_size) + " does not exceed factored size " +
                     std::to_string(size_));
  }
  seq_.prefetch(std::min<std::int64_t>(times_(new_size - 1), std::int64_t{1} << 22));

  ExtendResult result;
  WindowDiagnostics diag;
  diag.size = new_size;
  const double tol = psd_tolerance(new_size);
  long double min_pivot = std::numeric_limits<long double>::infinity();
  for (;;) {
    ++diag.attempts;
    const AppendFailure failure = append_rows(new_size, min_pivot);
    const bool at_cap = jitter_ >= options_.jitter_cap;
    if (failure.row < 0) {
      long double min_eig = estimate_min_eigenvalue();
      if (min_eig >= options_.conditioning_floor || at_cap) {
        diag.jitter = jitter_;
        diag.min_pivot = static_cast<double>(min_pivot);
        diag.min_eigenvalue_estimate = static_cast<double>(min_eig);
        break;
      }
    } else if (at_cap) {
      if (failure.pivot < -static_cast<long double>(tol)) {
        throw NonPsdError(failure.row + 1, static_cast<double>(failure.pivot),
                          "correlation window is not positive semidefinite: leading minor of order " +
                              std::to_string(failure.row + 1) + " has pivot " +
                              std::to_string(static_cast<double>(failure.pivot)));
      }
      throw NumericalError("ladder: pivot " + std::to_string(static_cast<double>(failure.pivot)) +
                           " at row " + std::to_string(failure.row) + " stays below the floor at the jitter cap");
    }
    // Escalate and refactor the whole window under the new jitter.
    jitter_ = jitter_ == 0.0 ? options_.jitter_start : jitter_ * options_.jitter_growth;
    jitter_ = std::min(jitter_, options_.jitter_cap);
    reset();
    min_pivot = std::numeric_limits<long double>::infinity();
    result.refactored = true;
    ++refactorizations_;
  }
  diagnostics_.push_back(diag);
  result.jitter = jitter_;
  return result;
}

void GramLadder::set_cutoffs(std::vector<std::int64_t> cutoffs) {
  for (std::size_t k = 0; k < cutoffs.size(); ++k) {
    if (cutoffs[k] < 1 || (k > 0 && cutoffs[k] <= cutoffs[k - 1])) {
      throw UsageError("ladder: cutoffs must be strictly increasing positive integers");
    }
  }
  cutoffs_ = std::move(cutoffs);
}

std::vector<double> GramLadder::projection_coords(std::int64_t window, std::int64_t i) const {
  if (window < 0 || window > size_) {
    throw UsageError("projection_coords: window " + std::to_string(window) + " exceeds factored size " +
                     std::to_string(size_));
  }
  if (i < 0) throw UsageError("projection_coords: negative index");
  const auto n = static_cast<std::size_t>(window);
  std::vector<double> y(n, 0.0);
  const long double scale = 1.0L / std::sqrt(1.0L + static_cast<long double>(jitter_));
  if (i < size_) {
    // Row i of the factor already solves the triangular system for U^{t(i)} xi.
    const std::int64_t fi = first_[static_cast<std::size_t>(i)];
    const long double* li = row(i);
    for (std::int64_t j = fi; j <= std::min(i, window - 1); ++j) {
      y[static_cast<std::size_t>(j)] = static_cast<double>(li[j - fi] * scale);
    }
    return y;
  }
  const std::int64_t tau = times_(i);
  std::int64_t start = 0;
  if (auto support = seq_.support()) {
    if (window == 0 || tau - times_(window - 1) > *support) return y;  // c = 0
    start = times_.is_identity() ? std::max<std::int64_t>(0, tau - *support)
                                 : times_.last_index_within(tau - *support - 1) + 1;
  }
  std::vector<long double> c(n, 0.0L);
  for (std::int64_t j = start; j < window; ++j) c[static_cast<std::size_t>(j)] = seq_(tau - times_(j));
  forward_solve(c, window, start);
  for (std::size_t j = 0; j < n; ++j) y[j] = static_cast<double>(c[j] * scale);
  return y;
}

double GramLadder::projection_norm_sq(int level, std::int64_t i) const {
  if (level < 1 || level > levels()) throw UsageError("projection_norm_sq: level out of range");
  const std::int64_t window = cutoffs_[static_cast<std::size_t>(level - 1)];
  const auto y = projection_coords(window, i);
  long double s = 0.0L;
  for (double v : y) s += static_cast<long double>(v) * v;
  return std::clamp(static_cast<double>(s), 0.0, 1.0);
}

ProjectionProfile GramLadder::block_profile(std::int64_t i) const {
  if (cutoffs_.empty()) throw UsageError("block_profile: ladder has no cutoffs");
  ProjectionProfile profile;
  profile.index = i;
  const auto levels = cutoffs_.size();
  profile.p.assign(levels, 0.0);
  profile.q.assign(levels, 0.0);

  std::size_t factored_levels = 0;
  while (factored_levels < levels && cutoffs_[factored_levels] <= size_) ++factored_levels;
  if (factored_levels > 0) {
    const auto y = projection_coords(cutoffs_[factored_levels - 1], i);
    // Prefix sums of squared coordinates give every nested level at once.
    long double s = 0.0L;
    std::size_t j = 0;
    for (std::size_t k = 0; k < factored_levels; ++k) {
      for (; j < static_cast<std::size_t>(cutoffs_[k]); ++j) s += static_cast<long double>(y[j]) * y[j];
      double v = static_cast<double>(s);
      if (v > 1.0 || v < 0.0) {
        ++profile.clipped;
        v = std::clamp(v, 0.0, 1.0);
      }
      profile.p[k] = v;
    }
  }
  for (std::size_t k = factored_levels; k < levels; ++k) {
    if (i >= cutoffs_[k]) {
      throw UsageError("block_profile: index " + std::to_string(i) + " lies beyond unfactored window " +
                       std::to_string(cutoffs_[k]));
    }
    profile.p[k] = 1.0;
    ++profile.identity_levels;
  }
  double previous = 0.0;
  for (std::size_t k = 0; k < levels; ++k) {
    const double d = profile.p[k] - previous;
    if (d < 0.0) ++profile.clipped;
    profile.q[k] = std::max(0.0, d);
    previous = profile.p[k];
  }
  return profile;
}

double GramLadder::factor_entry(std::int64_t i, std::int64_t j) const {
  if (i < 0 || i >= size_ || j < 0 || j >= size_) throw UsageError("factor_entry: index out of range");
  const std::int64_t fi = first_[static_cast<std::size_t>(i)];
  if (j > i || j < fi) return 0.0;
  return static_cast<double>(row(i)[j - fi]);
}

double GramLadder::reconstruction_error() const {
  long double worst = 0.0L;
  for (std::int64_t i = 0; i < size_; ++i) {
    const std::int64_t fi = first_[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j <= i; ++j) {
      const std::int64_t fj = first_[static_cast<std::size_t>(j)];
      long double s = 0.0L;
      for (std::int64_t k = std::max(fi, fj); k <= j; ++k) s += row(i)[k - fi] * row(j)[k - fj];
      worst = std::max(worst, std::abs(s - gram(i, j)));
    }
  }
  return static_cast<double>(worst);
}

}  // namespace divavg
