#include "divavg/construction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "divavg/errors.hpp"
#include "parallel.hpp"

namespace divavg {

namespace {

constexpr std::int64_t kSearchBatch = 512;
// a(i) may overshoot [-1, 1] by rounding; anything larger signals an ill-conditioned window.
constexpr double kReflectedSlack = 1e-6;

double sqrt_projection(const GramLadder& ladder, std::int64_t window, std::int64_t i) {
  const auto y = ladder.projection_coords(window, i);
  long double s = 0.0L;
  for (double v : y) s += static_cast<long double>(v) * v;
  return std::sqrt(std::clamp(static_cast<double>(s), 0.0, 1.0));
}

}  // namespace

Cutoffs select_cutoffs(GramLadder& ladder, const SearchOptions& options, SearchStats* stats) {
  if (options.levels < 1) throw ValidationError("select_cutoffs: K must be >= 1");
  if (options.max_horizon < 1) throw ValidationError("select_cutoffs: max_horizon must be >= 1");

  SearchStats local;
  std::int64_t limit = options.max_horizon;
  if (auto h = ladder.sequence().horizon()) {
    limit = std::min(limit, ladder.times().last_index_within(*h) + 1);
  }
  local.effective_horizon = limit;

  for (;;) {
    const double jitter = ladder.jitter();
    // Extends the ladder; false when the extension raised the jitter.
    auto ensure = [&](std::int64_t n) {
      if (ladder.size() < n) ladder.extend(n);
      return ladder.jitter() == jitter;
    };

    Cutoffs cutoffs;
    cutoffs.times = ladder.times();
    cutoffs.n = {1};
    cutoffs.achieved = {0.0};
    bool restart = !ensure(1);

    for (int k = 1; k < options.levels && !restart; ++k) {
      const std::int64_t nk = cutoffs.n.back();
      if (!ensure(nk)) {
        restart = true;
        break;
      }
      long double sum = 0.0L;
      double best = std::numeric_limits<double>::quiet_NaN();
      std::optional<std::int64_t> found;
      std::vector<double> batch;
      for (std::int64_t start = 0; !found && start < limit; start += kSearchBatch) {
        const std::int64_t stop = std::min(limit, start + kSearchBatch);
        batch.assign(static_cast<std::size_t>(stop - start), 0.0);
        detail::parallel_for(start, stop, options.threads, [&](std::int64_t i) {
          batch[static_cast<std::size_t>(i - start)] = sqrt_projection(ladder, nk, i);
        });
        local.evaluated += stop - start;
        for (std::int64_t i = start; i < stop; ++i) {
          sum += batch[static_cast<std::size_t>(i - start)];
          const std::int64_t count = i + 1;
          if (count <= nk) continue;
          const double average = static_cast<double>(sum / static_cast<long double>(count));
          if (!(best <= average)) best = average;
          // Strict bound, compared without dividing: (k+1) * sum < count.
          if (static_cast<long double>(k + 1) * sum < static_cast<long double>(count)) {
            found = count;
            cutoffs.achieved.push_back(average);
            break;
          }
        }
      }
      if (!found) {
        const bool validity = ladder.sequence().horizon() && limit < options.max_horizon;
        throw HorizonExhaustedError(
            k + 1, limit, best, cutoffs.n,
            "cutoff search for level " + std::to_string(k + 1) + " exhausted its horizon n <= " +
                std::to_string(limit) + (validity ? " (capped by the family validity horizon)" : "") +
                "; best average " + std::to_string(best) + " vs required < " + std::to_string(1.0 / (k + 1)));
      }
      cutoffs.n.push_back(*found);
    }
    if (!restart && cutoffs.n.back() <= options.full_window_cap) restart = !ensure(cutoffs.n.back());
    if (restart) {
      ++local.restarts;
      continue;
    }
    ladder.set_cutoffs(cutoffs.n);
    if (stats) *stats = local;
    return cutoffs;
  }
}

Construction::Construction(GramLadder ladder, Cutoffs cutoffs, SearchStats stats, unsigned threads)
    : ladder_(std::move(ladder)), cutoffs_(std::move(cutoffs)), stats_(stats), threads_(threads) {
  if (cutoffs_.n.empty()) throw UsageError("construction: no cutoffs");
  if (ladder_.cutoffs() != cutoffs_.n) ladder_.set_cutoffs(cutoffs_.n);
}

Construction Construction::run(CorrelationSequence seq, TimeSequence times, const SearchOptions& options,
                               LadderOptions ladder_options) {
  GramLadder ladder(std::move(seq), std::move(times), ladder_options);
  SearchStats stats;
  Cutoffs cutoffs = select_cutoffs(ladder, options, &stats);
  return Construction(std::move(ladder), std::move(cutoffs), stats, options.threads);
}

double Construction::reflected_from_profile(const ProjectionProfile& profile) const {
  double reflected = 0.0;
  for (std::size_t k = 1; k < profile.q.size(); k += 2) reflected += profile.q[k];  // levels 2, 4, ...
  const double a = 1.0 - 2.0 * reflected;
  if (std::abs(a) > 1.0 + kReflectedSlack) {
    throw NumericalError("reflected inner product a(" + std::to_string(profile.index) + ") = " +
                         std::to_string(a) + " leaves [-1, 1]; the Gram window is ill-conditioned");
  }
  return std::clamp(a, -1.0, 1.0);
}

double Construction::reflected_inner(std::int64_t i) const {
  if (i < 0 || i >= window()) {
    throw UsageError("reflected_inner: index " + std::to_string(i) + " outside the decomposed window [0, " +
                     std::to_string(window()) + ")");
  }
  return reflected_from_profile(ladder_.block_profile(i));
}

double Construction::cross_inner(std::int64_t i, std::int64_t j) const {
  const std::int64_t nk = window();
  if (i < 0 || j < 0 || i >= nk || j >= nk) {
    throw UsageError("cross_inner: indices must lie in [0, " + std::to_string(nk) + ")");
  }
  const auto& n = cutoffs_.n;
  std::size_t factored = 0;
  while (factored < n.size() && n[factored] <= ladder_.size()) ++factored;
  if (factored < n.size() && std::max(i, j) >= n[factored]) {
    throw UsageError("cross_inner: level " + std::to_string(factored + 1) + " is not factored");
  }

  const auto& times = cutoffs_.times;
  const double full = ladder_.regularized_correlation(times(i) - times(j));
  std::vector<long double> inner(n.size(), static_cast<long double>(full));
  if (factored > 0) {
    const std::int64_t width = n[factored - 1];
    const auto yi = ladder_.projection_coords(width, i);
    const auto yj = ladder_.projection_coords(width, j);
    long double s = 0.0L;
    std::size_t m = 0;
    for (std::size_t k = 0; k < factored; ++k) {
      for (; m < static_cast<std::size_t>(n[k]); ++m) s += static_cast<long double>(yi[m]) * yj[m];
      inner[k] = s;
    }
  }
  // <P_k x, P_k y> - <P_{k-1} x, P_{k-1} y> = <Q_k x, Q_k y>, summed over even k.
  long double reflected = 0.0L;
  for (std::size_t k = 1; k < n.size(); k += 2) reflected += inner[k] - inner[k - 1];
  return static_cast<double>(full - 2.0L * reflected);
}

std::vector<double> Construction::reflected_series(std::int64_t horizon) const {
  if (horizon > window()) throw UsageError("reflected_series: horizon exceeds n_K");
  std::vector<double> a(static_cast<std::size_t>(std::max<std::int64_t>(horizon, 0)));
  detail::parallel_for(0, horizon, threads_,
                       [&](std::int64_t i) { a[static_cast<std::size_t>(i)] = reflected_inner(i); });
  return a;
}

ConstructionDiagnostics Construction::diagnostics() const {
  ConstructionDiagnostics d;
  d.jitter = ladder_.jitter();
  d.refactorizations = ladder_.refactorizations();
  d.search_restarts = stats_.restarts;
  d.factored_size = ladder_.size();
  d.windows = ladder_.window_diagnostics();
  const std::int64_t nk = window();
  std::vector<int> clipped(static_cast<std::size_t>(nk)), identity(static_cast<std::size_t>(nk));
  detail::parallel_for(0, nk, threads_, [&](std::int64_t i) {
    const auto profile = ladder_.block_profile(i);
    clipped[static_cast<std::size_t>(i)] = profile.clipped;
    identity[static_cast<std::size_t>(i)] = profile.identity_levels;
  });
  for (std::size_t i = 0; i < clipped.size(); ++i) {
    d.clipped_values += clipped[i];
    d.identity_levels += identity[i] > 0 ? 1 : 0;
  }
  return d;
}

std::vector<double> running_averages(std::span<const double> a) {
  std::vector<double> averages(a.size());
  long double sum = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += a[i];
    averages[i] = static_cast<double>(sum / static_cast<long double>(i + 1));
  }
  return averages;
}

std::vector<PeakEntry> peak_table(const Cutoffs& cutoffs, std::span<const double> averages) {
  std::vector<PeakEntry> peaks;
  for (std::size_t k = 0; k < cutoffs.n.size(); ++k) {
    const std::int64_t n = cutoffs.n[k];
    if (n > static_cast<std::int64_t>(averages.size())) break;
    PeakEntry e;
    e.level = static_cast<int>(k + 1);
    e.cutoff = n;
    e.average = averages[static_cast<std::size_t>(n - 1)];
    e.predicted_sign = k % 2 == 0 ? 1 : -1;
    e.error_bound = 2.0 / static_cast<double>(e.level);
    e.deviation = std::abs(e.average - e.predicted_sign);
    e.within_bound = e.level < 2 || e.deviation < e.error_bound;
    peaks.push_back(e);
  }
  return peaks;
}

}  // namespace divavg
