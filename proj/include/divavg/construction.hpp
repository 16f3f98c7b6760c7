#pragma once

// Reflected-operator construction: cutoffs n_1 < n_2 < ... chosen so that the
// orbit rarely sees the earlier windows, the reflection W = 1 - 2Q_2 - 2Q_4 - ...
// that negates every even block, and the inner products a(i) = <U^i xi, V^i xi>
// with V = WUW whose running averages swing between +1 and -1.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "divavg/krylov.hpp"

namespace divavg {

struct Cutoffs {
  std::vector<std::int64_t> n;
  /// alpha_k = (1/n_k) sum_{i<n_k} ||P_{k-1} U^{t(i)} xi||, with alpha_1 = 0.
  std::vector<double> achieved;
  TimeSequence times;
};

struct SearchOptions {
  int levels = 4;
  std::int64_t max_horizon = 10000;
  /// Also factor the final window n_K when it does not exceed this size.
  std::int64_t full_window_cap = 2048;
  unsigned threads = 0;
};

struct SearchStats {
  std::int64_t restarts = 0;
  std::int64_t evaluated = 0;
  std::int64_t effective_horizon = 0;
};

/// Minimal cutoffs: n_1 = 1 and n_{k+1} is the least n > n_k with
/// (1/n) sum_{i<n} sqrt(p_k(i)) < 1/(k+1). Extends the ladder as it goes and
/// restarts from n_1 whenever an extension raises the jitter, so the cutoffs
/// and the final factor share one geometry.
///
/// The scan never passes max_horizon, nor the family's validity horizon;
/// running out throws HorizonExhaustedError with the best average seen.
Cutoffs select_cutoffs(GramLadder& ladder, const SearchOptions& options, SearchStats* stats = nullptr);

struct PeakEntry {
  int level = 0;
  std::int64_t cutoff = 0;
  double average = 0.0;
  int predicted_sign = 1;
  double error_bound = 0.0;  // 2/k
  double deviation = 0.0;    // |A(n_k) - sign|
  bool within_bound = true;
};

struct ConstructionDiagnostics {
  double jitter = 0.0;
  std::int64_t refactorizations = 0;
  std::int64_t search_restarts = 0;
  std::int64_t factored_size = 0;
  std::int64_t clipped_values = 0;
  std::int64_t identity_levels = 0;
  std::vector<WindowDiagnostics> windows;
};

class Construction {
 public:
  Construction(GramLadder ladder, Cutoffs cutoffs, SearchStats stats, unsigned threads = 0);

  /// Runs the cutoff search on a fresh ladder.
  static Construction run(CorrelationSequence seq, TimeSequence times, const SearchOptions& options,
                          LadderOptions ladder_options = {});

  const GramLadder& ladder() const noexcept { return ladder_; }
  const Cutoffs& cutoffs() const noexcept { return cutoffs_; }
  const SearchStats& stats() const noexcept { return stats_; }
  /// n_K: the decomposition is complete only for indices below it.
  std::int64_t window() const noexcept { return cutoffs_.n.back(); }

  /// a(i) = <U^{t(i)} xi, W U^{t(i)} xi> = 1 - 2 sum_{even k} q_k(i).
  double reflected_inner(std::int64_t i) const;
  /// <U^{t(i)} xi, V^{t(j)} xi> = <U^{t(i)} xi, W U^{t(j)} xi>.
  double cross_inner(std::int64_t i, std::int64_t j) const;

  /// a(0), ..., a(horizon - 1); evaluated in parallel.
  std::vector<double> reflected_series(std::int64_t horizon) const;
  ConstructionDiagnostics diagnostics() const;

 private:
  double reflected_from_profile(const ProjectionProfile& profile) const;

  GramLadder ladder_;
  Cutoffs cutoffs_;
  SearchStats stats_;
  unsigned threads_;
};

/// A(n) = (1/n) sum_{i<n} a(i) for n = 1..a.size(); element n-1 holds A(n).
std::vector<double> running_averages(std::span<const double> a);

/// One row per level: A(n_k) against (-1)^{k-1} with bound 2/k (checked for k >= 2).
std::vector<PeakEntry> peak_table(const Cutoffs& cutoffs, std::span<const double> averages);

}  // namespace divavg
