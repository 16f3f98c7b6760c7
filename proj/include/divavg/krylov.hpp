#pragma once

// Orbit windows N = span{U^{t(j)} xi : j < n} handled purely through their Gram
// matrices G[i][j] = r(t(i) - t(j)). The vectors themselves are never formed:
// the lower triangular factor L of G (plus a small diagonal jitter when G is
// numerically singular) supplies coordinates in which the windows are nested
// coordinate subspaces, so every projection reduces to a triangular solve.

#include <cstdint>
#include <vector>

#include "divavg/spectral.hpp"
#include "divavg/time_sequence.hpp"

namespace divavg {

struct LadderOptions {
  /// First nonzero diagonal shift tried on a failed window; multiplied by
  /// jitter_growth on each further failure until jitter_cap.
  double jitter_start = 1e-12;
  double jitter_growth = 10.0;
  double jitter_cap = 1e-8;
  /// A factored window is accepted without further jitter only when its
  /// smallest eigenvalue (inverse-iteration estimate) is at least this.
  double conditioning_floor = 1e-8;
  /// Pivots (squared diagonal entries) below this count as failures.
  double pivot_floor = 1e-14;
  /// Storage cap for the factor, in stored entries.
  std::int64_t max_entries = std::int64_t{1} << 24;
};

struct WindowDiagnostics {
  std::int64_t size = 0;
  double jitter = 0.0;
  double min_pivot = 0.0;
  double min_eigenvalue_estimate = 0.0;
  std::int64_t attempts = 0;
};

struct ExtendResult {
  bool refactored = false;  // jitter changed, earlier rows were recomputed
  double jitter = 0.0;
};

/// p_k(i) = ||P_k U^{t(i)} xi||^2 and q_k(i) = ||Q_k U^{t(i)} xi||^2 for one index.
struct ProjectionProfile {
  std::int64_t index = 0;
  std::vector<double> p;
  std::vector<double> q;
  /// Values pulled back into [0, 1] from rounding overshoot.
  int clipped = 0;
  /// Levels whose window was not factored and whose value was taken from
  /// the exact identity p_k(i) = 1 for i < n_k.
  int identity_levels = 0;
};

class GramLadder {
 public:
  explicit GramLadder(CorrelationSequence seq, TimeSequence times = {}, LadderOptions options = {});

  /// Grows the factored window to new_size rows. Appends rows when the current
  /// jitter suffices; otherwise raises the jitter and refactors from scratch.
  /// Throws NonPsdError when a pivot is below -psd_tolerance at the jitter cap.
  ExtendResult extend(std::int64_t new_size);

  std::int64_t size() const noexcept { return size_; }
  double jitter() const noexcept { return jitter_; }
  const LadderOptions& options() const noexcept { return options_; }
  const CorrelationSequence& sequence() const noexcept { return seq_; }
  const TimeSequence& times() const noexcept { return times_; }

  /// Correlation of the regularized geometry: (r(lag) + jitter [lag == 0]) / (1 + jitter).
  double regularized_correlation(std::int64_t lag) const;

  void set_cutoffs(std::vector<std::int64_t> cutoffs);
  const std::vector<std::int64_t>& cutoffs() const noexcept { return cutoffs_; }
  int levels() const noexcept { return static_cast<int>(cutoffs_.size()); }

  /// Coordinates y of P_N U^{t(i)} xi in the orthonormal basis produced by the
  /// factor: L_N y = c with c_j = <U^{t(i)} xi, U^{t(j)} xi>. Normalized so that
  /// ||y||^2 = ||P_N U^{t(i)} xi||^2 / ||U^{t(i)} xi||^2.
  std::vector<double> projection_coords(std::int64_t window, std::int64_t i) const;

  /// p_k(i), level k is 1-based. Requires n_k <= size().
  double projection_norm_sq(int level, std::int64_t i) const;

  /// All p_k(i), q_k(i). Levels beyond the factored window use p_k(i) = 1 when
  /// i < n_k and are a usage fault otherwise.
  ProjectionProfile block_profile(std::int64_t i) const;

  /// Factor entry L[i][j] of the (unnormalized) factor of G + jitter I.
  double factor_entry(std::int64_t i, std::int64_t j) const;
  /// max |L L^T - (G + jitter I)| over the factored window; O(n^3), for checks.
  double reconstruction_error() const;

  const std::vector<WindowDiagnostics>& window_diagnostics() const noexcept { return diagnostics_; }
  std::int64_t refactorizations() const noexcept { return refactorizations_; }

 private:
  struct AppendFailure {
    std::int64_t row = -1;
    long double pivot = 0.0L;
  };

  long double gram(std::int64_t i, std::int64_t j) const;
  std::int64_t first_column(std::int64_t i) const;
  AppendFailure append_rows(std::int64_t new_size, long double& min_pivot);
  long double estimate_min_eigenvalue() const;
  void forward_solve(std::vector<long double>& rhs, std::int64_t window, std::int64_t start) const;
  void reset();

  const long double* row(std::int64_t i) const { return data_.data() + offsets_[static_cast<std::size_t>(i)]; }

  CorrelationSequence seq_;
  TimeSequence times_;
  LadderOptions options_;
  std::vector<std::int64_t> cutoffs_;

  std::int64_t size_ = 0;
  double jitter_ = 0.0;
  // Profile (skyline) storage: row i holds columns first_[i]..i.
  std::vector<long double> data_;
  std::vector<std::size_t> offsets_;
  std::vector<std::int64_t> first_;
  std::vector<WindowDiagnostics> diagnostics_;
  std::int64_t refactorizations_ = 0;
};

}  // namespace divavg
