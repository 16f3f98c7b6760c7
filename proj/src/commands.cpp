#include "divavg/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "divavg/construction.hpp"
#include "divavg/gaussian.hpp"
#include "divavg/oracle.hpp"

namespace divavg {

using nlohmann::json;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::HorizonExhausted:
      return 3;
    case ErrorKind::Numerical:
      return 4;
    case ErrorKind::Usage:
    case ErrorKind::Validation:
    case ErrorKind::NonPsd:
      return 2;
  }
  return 4;
}

namespace {

// JSON has no NaN or infinity.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_number(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) out_ += ',';
      out_ += h;
      first = false;
    }
    out_ += '\n';
  }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ += (first ? "" : ","), out_ += cell(cells), first = false), ...);
    out_ += '\n';
  }

  std::string str() && { return std::move(out_); }

 private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(std::int64_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  static std::string cell(bool v) { return v ? "true" : "false"; }

  std::string out_;
};

bool wants_csv(const RunConfig& c) { return c.format != OutputFormat::Json; }
bool wants_json(const RunConfig& c) { return c.format != OutputFormat::Csv; }

void add_json(CommandResult& result, const RunConfig& c, const std::string& name, const json& doc) {
  if (wants_json(c)) result.artifacts.push_back({name, doc.dump(2) + "\n"});
}

void add_csv(CommandResult& result, const RunConfig& c, const std::string& name, Csv&& csv) {
  if (wants_csv(c)) result.artifacts.push_back({name, std::move(csv).str()});
}

json error_json(const Error& e) {
  json j = {{"kind", to_string(e.kind())}, {"message", e.what()}};
  if (const auto* h = dynamic_cast<const HorizonExhaustedError*>(&e)) {
    j["level"] = h->level();
    j["horizon"] = h->horizon();
    j["best_average"] = number(h->best_average());
    j["required_below"] = 1.0 / h->level();
    j["partial_cutoffs"] = h->partial_cutoffs();
  } else if (const auto* p = dynamic_cast<const NonPsdError*>(&e)) {
    j["leading_minor"] = p->leading_minor();
    j["pivot"] = number(p->pivot());
  }
  return j;
}

json spectrum_info(const RunConfig& c) {
  return {{"family", family_name(c.spectrum)},
          {"parameters", spectrum_to_json(c.spectrum)},
          {"atomless", is_atomless(c.spectrum)},
          {"validity_horizon", optional_number(validity_horizon(c.spectrum))}};
}

Construction build(const RunConfig& c) {
  SearchOptions options;
  options.levels = c.levels;
  options.max_horizon = c.max_horizon;
  options.threads = c.threads;
  return Construction::run(CorrelationSequence(c.spectrum), c.times, options);
}

std::string fixed(double v, int precision = 6) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", precision, v);
  return buffer;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

// ---------------------------------------------------------------------------

json oracle_json(const OracleComparison& cmp) {
  const auto& o = cmp.oracle;
  return {{"window", o.window},
          {"levels", o.levels},
          {"jitter", o.jitter},
          {"max_delta_a", cmp.max_delta_a},
          {"max_delta_cross", cmp.max_delta_cross},
          {"max_delta_q", cmp.max_delta_q},
          {"max_delta", std::max({cmp.max_delta_a, cmp.max_delta_cross, cmp.max_delta_q})},
          {"involution_error", o.involution_error},
          {"symmetry_error", o.symmetry_error},
          {"commutation_error", o.commutation_error},
          {"isometry_error", o.isometry_error},
          {"completeness_error", o.completeness_error}};
}

json diagnostics_json(const ConstructionDiagnostics& d, const SearchStats& stats) {
  json windows = json::array();
  for (const auto& w : d.windows) {
    windows.push_back({{"size", w.size},
                       {"jitter", w.jitter},
                       {"min_pivot", w.min_pivot},
                       {"min_eigenvalue_estimate", w.min_eigenvalue_estimate},
                       {"attempts", w.attempts}});
  }
  return {{"jitter", d.jitter},
          {"refactorizations", d.refactorizations},
          {"search_restarts", d.search_restarts},
          {"factored_size", d.factored_size},
          {"clipped_values", d.clipped_values},
          {"identity_level_indices", d.identity_levels},
          {"evaluated_projections", stats.evaluated},
          {"effective_horizon", stats.effective_horizon},
          {"windows", windows}};
}

// ---------------------------------------------------------------------------
// verify

struct Check {
  std::string suite;
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool psd = false;
  std::string detail;
};

class Checks {
 public:
  Check& add(std::string suite, std::string name, double value, double tolerance, bool pass, std::string detail = {}) {
    checks_.push_back({std::move(suite), std::move(name), value, tolerance, pass, false, std::move(detail)});
    return checks_.back();
  }
  /// Passes when value <= tolerance.
  Check& at_most(std::string suite, std::string name, double value, double tolerance, std::string detail = {}) {
    return add(std::move(suite), std::move(name), value, tolerance, value <= tolerance, std::move(detail));
  }
  void skip(std::string suite, std::string name, std::string why) { skipped_.push_back({suite + "/" + name, why}); }

  const std::vector<Check>& all() const { return checks_; }
  const std::vector<std::pair<std::string, std::string>>& skipped() const { return skipped_; }

 private:
  std::vector<Check> checks_;
  std::vector<std::pair<std::string, std::string>> skipped_;
};

// Composite midpoint rule on the support [-eps, eps], where the Arc density is
// constant, with cos(i theta) advanced by the three-term recurrence.
std::vector<double> arc_by_quadrature(double epsilon, std::int64_t nodes, std::int64_t max_lag) {
  std::vector<long double> sum(static_cast<std::size_t>(max_lag + 1), 0.0L);
  const long double h = 2.0L * epsilon / static_cast<long double>(nodes);
  for (std::int64_t m = 0; m < nodes; ++m) {
    const long double theta = -epsilon + (static_cast<long double>(m) + 0.5L) * h;
    const long double c1 = std::cos(theta);
    long double prev = 1.0L, cur = c1;
    sum[0] += 1.0L;
    for (std::int64_t i = 1; i <= max_lag; ++i) {
      sum[static_cast<std::size_t>(i)] += cur;
      const long double next = 2.0L * c1 * cur - prev;
      prev = cur;
      cur = next;
    }
  }
  std::vector<double> r(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) r[i] = static_cast<double>(sum[i] / static_cast<long double>(nodes));
  return r;
}

void collect_leaves(const SpectrumFamily& f, std::vector<const SpectrumFamily*>& out) {
  if (const auto* m = f.get_if<Mixture>()) {
    for (const auto& c : m->components) collect_leaves(c, out);
  } else {
    out.push_back(&f);
  }
}

void spectral_suite(const RunConfig& c, const CorrelationSequence& seq, Checks& checks) {
  const std::string s = "spectral";
  checks.at_most(s, "unit_norm", std::abs(seq(0) - 1.0), 1e-12, "|r(0) - 1|");

  const std::int64_t lags = std::max({c.outputs.max_lag, c.outputs.psd_window, std::int64_t{256}});
  double excess = 0.0;
  for (std::int64_t i = 0; i <= lags; ++i) excess = std::max(excess, std::abs(seq(i)) - 1.0);
  checks.at_most(s, "correlation_bounded", excess, 1e-12, "max_i |r(i)| - 1 over i <= " + std::to_string(lags));

  const auto psd = validate_psd(seq, c.outputs.psd_window);
  auto& p = checks.add(s, "psd_window", psd.min_eigenvalue_estimate, -psd.tolerance, psd.ok,
                       "minimum pivot of the N = " + std::to_string(c.outputs.psd_window) + " window" +
                           (psd.failing_minor ? "; leading minor " + std::to_string(*psd.failing_minor) + " fails"
                                              : std::string()));
  p.psd = true;

  if (is_atomless(c.spectrum)) {
    const double w10 = wiener_average(seq, 10), w1000 = wiener_average(seq, 1000);
    checks.add(s, "wiener_decay", w1000, w10, w1000 < w10, "wiener_average(1000) < wiener_average(10)");
  }

  // defect(q1) <= defect(q2) iff r(q1) >= r(q2); the system defect is nonnegative.
  // Rounding can merge nearby defects into ties, so only strict orderings are compared.
  std::int64_t violations = 0;
  const auto& qs = c.outputs.rigidity_q;
  for (std::size_t a = 0; a < qs.size(); ++a) {
    if (system_rigidity_defect(seq, qs[a]) < 0.0) ++violations;
    for (std::size_t b = 0; b < qs.size(); ++b) {
      const double ra = seq(qs[a]), rb = seq(qs[b]);
      const double da = rigidity_defect(seq, qs[a]), db = rigidity_defect(seq, qs[b]);
      if ((ra > rb && da > db) || (da < db && ra < rb)) ++violations;
    }
  }
  checks.add(s, "rigidity_consistency", static_cast<double>(violations), 0.0, violations == 0,
             "ordering and sign violations over rigidity_q");

  std::vector<const SpectrumFamily*> leaves;
  collect_leaves(c.spectrum, leaves);
  for (const auto* leaf : leaves) {
    if (const auto* ct = leaf->get_if<ConvolutionTruncated>()) {
      const CorrelationSequence leaf_seq(*leaf);
      double worst = 0.0;
      std::int64_t q = 1;
      bool overflow = false;
      for (int m = 1; m <= ct->factors + 3 && !overflow; ++m) {
        if (q > (std::int64_t{1} << 52) / ct->base) {
          overflow = true;
          break;
        }
        q *= ct->base;
        if (m < ct->factors) continue;
        worst = std::max({worst, std::abs(rigidity_defect(leaf_seq, q)), std::abs(system_rigidity_defect(leaf_seq, q))});
      }
      checks.add(s, "rigidity_zero_at_base_powers", worst, 0.0, worst == 0.0,
                 "defects at q = b^m, m = J..J+3, must vanish exactly");
    } else if (const auto* arc = leaf->get_if<Arc>()) {
      constexpr std::int64_t max_lag = 256;
      std::int64_t nodes = 1 << 12;
      while (static_cast<double>(nodes) < 1.5e5 * arc->epsilon) nodes *= 2;
      const auto coarse = arc_by_quadrature(arc->epsilon, nodes, max_lag);
      const auto fine = arc_by_quadrature(arc->epsilon, 2 * nodes, max_lag);
      const CorrelationSequence closed(*leaf);
      double doubling = 0.0, versus_closed = 0.0;
      for (std::int64_t i = 0; i <= max_lag; ++i) {
        const auto k = static_cast<std::size_t>(i);
        doubling = std::max(doubling, std::abs(fine[k] - coarse[k]));
        versus_closed = std::max(versus_closed, std::abs(fine[k] - closed(i)));
      }
      checks.at_most(s, "quadrature_doubling", doubling, 1e-6,
                     "arc: max_{i<=256} |r_2M(i) - r_M(i)|, M = " + std::to_string(nodes));
      checks.at_most(s, "quadrature_closed_form", versus_closed, 1e-6, "arc: max_{i<=256} |r_2M(i) - sin(i eps)/(i eps)|");
    } else if (const auto* qd = leaf->get_if<QuadratureDensity>()) {
      QuadratureDensity doubled = *qd;
      doubled.nodes *= 2;
      const CorrelationSequence a(*leaf), b{SpectrumFamily(doubled)};
      double doubling = 0.0;
      for (std::int64_t i = 0; i <= 256; ++i) doubling = std::max(doubling, std::abs(a(i) - b(i)));
      checks.at_most(s, "quadrature_doubling", doubling, 1e-6,
                     "density table: max_{i<=256} |r_2M(i) - r_M(i)|, M = " + std::to_string(qd->nodes));
    }
  }
}

// Indices used by the O(n^2)-per-index checks: everything below `dense`, then a stride.
std::vector<std::int64_t> sample_indices(std::int64_t end, std::int64_t dense, std::int64_t budget) {
  std::vector<std::int64_t> out;
  const std::int64_t head = std::min(end, dense);
  for (std::int64_t i = 0; i < head; ++i) out.push_back(i);
  if (end > head) {
    const std::int64_t stride = std::max<std::int64_t>(1, (end - head) / std::max<std::int64_t>(budget, 1));
    for (std::int64_t i = head; i < end; i += stride) out.push_back(i);
    if (out.back() != end - 1) out.push_back(end - 1);
  }
  return out;
}

void krylov_suite(const RunConfig& c, const Construction& con, Checks& checks) {
  const std::string s = "krylov";
  const auto& ladder = con.ladder();
  const auto& n = con.cutoffs().n;
  const std::int64_t nK = con.window();

  checks.at_most(s, "jitter_within_cap", ladder.jitter(), ladder.options().jitter_cap);

  if (ladder.size() <= 1024) {
    checks.at_most(s, "factor_reconstruction", ladder.reconstruction_error(),
                   1e-8 * static_cast<double>(ladder.size()), "max |L L^T - (G + jitter I)|");
  } else {
    checks.skip(s, "factor_reconstruction", "factored window above 1024");
  }

  {
    // Growing in two steps must reproduce a fresh factorization.
    const std::int64_t m = std::min<std::int64_t>(ladder.size(), 256);
    GramLadder fresh(ladder.sequence(), ladder.times(), ladder.options());
    GramLadder staged(ladder.sequence(), ladder.times(), ladder.options());
    fresh.extend(m);
    if (m / 2 >= 1) staged.extend(m / 2);
    if (staged.size() < m) staged.extend(m);
    double diff = 0.0;
    if (fresh.jitter() == staged.jitter()) {
      for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j <= i; ++j) diff = std::max(diff, std::abs(fresh.factor_entry(i, j) - staged.factor_entry(i, j)));
      }
    } else {
      diff = std::numeric_limits<double>::infinity();
    }
    checks.at_most(s, "extend_matches_fresh", diff, 1e-10, "factor grown to " + std::to_string(m) + " in two steps");
  }

  std::size_t factored = 0;
  while (factored < n.size() && n[factored] <= ladder.size()) ++factored;
  const bool all_factored = factored == n.size();
  // Beyond n_K only fully factored ladders can answer.
  const std::int64_t reach = all_factored ? 4 * nK : nK;
  const auto indices = sample_indices(reach, std::min<std::int64_t>(nK, 1024), 512);

  double exact = 0.0, monotone = 0.0, completeness = 0.0;
  std::int64_t clipped = 0;
  for (const std::int64_t i : indices) {
    const auto profile = ladder.block_profile(i);
    clipped += profile.clipped;
    for (std::size_t k = 0; k < n.size(); ++k) {
      if (i < n[k]) exact = std::max(exact, std::abs(profile.p[k] - 1.0));
      if (k > 0) monotone = std::max(monotone, profile.p[k - 1] - profile.p[k]);
    }
    if (i < nK) {
      double total = 0.0;
      for (double q : profile.q) total += q;
      completeness = std::max(completeness, std::abs(total - 1.0));
    }
  }
  checks.at_most(s, "exact_inside_window", exact, 1e-8, "max |p_k(i) - 1| for i < n_k");
  checks.at_most(s, "nested_monotone", monotone, 1e-8,
                 "max p_{k-1}(i) - p_k(i) for i < " + std::to_string(reach) + " (sampled)");
  checks.at_most(s, "completeness", completeness, 1e-8, "max |sum_k q_k(i) - 1| for i < n_K");
  checks.add(s, "clipped_values", static_cast<double>(clipped), 0.0, true, "informational count");

  double dense = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < factored; ++k) {
    if (n[k] > 512) break;
    const auto probe = sample_indices(4 * n[k] + 8, 64, 64);
    const auto oracle = dense_projection_norms(ladder.sequence(), ladder.times(), n[k], probe, ladder.jitter());
    for (std::size_t m = 0; m < probe.size(); ++m) {
      const double fast = ladder.projection_norm_sq(static_cast<int>(k + 1), probe[m]);
      dense = std::max(dense, std::abs(fast - std::clamp(oracle[m], 0.0, 1.0)));
    }
    any = true;
  }
  if (any) {
    checks.at_most(s, "dense_solve_agreement", dense, 1e-9, "p_k(i) against c^T G^-1 c, windows <= 512");
  } else {
    checks.skip(s, "dense_solve_agreement", "no factored window <= 512");
  }
  (void)c;
}

void construction_suite(const RunConfig& c, const Construction& con, Checks& checks) {
  const std::string s = "construction";
  const auto& cut = con.cutoffs();
  const std::int64_t nK = con.window();

  checks.add(s, "first_cutoff", static_cast<double>(cut.n.front()), 1.0, cut.n.front() == 1, "n_1 = 1");
  double margin = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < cut.n.size(); ++k) {
    margin = std::max(margin, cut.achieved[k] - 1.0 / static_cast<double>(k + 1));
  }
  if (cut.n.size() > 1) checks.add(s, "achieved_below_bound", margin, 0.0, margin < 0.0, "max_k alpha_k - 1/k (< 0)");

  const auto a = con.reflected_series(nK);
  double overshoot = 0.0;
  for (double v : a) overshoot = std::max(overshoot, std::abs(v) - 1.0);
  checks.at_most(s, "reflected_bounded", overshoot, 1e-8, "max |a(i)| - 1");

  const auto averages = running_averages(a);
  const auto peaks = peak_table(cut, averages);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& p : peaks) {
    if (p.level >= 2) worst = std::max(worst, p.deviation - p.error_bound);
  }
  if (peaks.size() > 1) {
    checks.add(s, "peak_bound", worst, 0.0, worst < 0.0, "max_k |A(n_k) - (-1)^(k-1)| - 2/k (< 0)");
  }

  const auto indices = sample_indices(nK, 1024, 1024);
  double diagonal = 0.0, prime = 0.0;
  const auto& times = cut.times;
  for (const std::int64_t i : indices) {
    diagonal = std::max(diagonal, std::abs(a[static_cast<std::size_t>(i)] - con.cross_inner(i, i)));
    prime = std::max(prime, std::abs(con.cross_inner(i, 0) - con.ladder().sequence()(times(i))));
  }
  checks.at_most(s, "diagonal_consistency", diagonal, 1e-10, "max |a(i) - cross_inner(i, i)|");
  checks.at_most(s, "property_i_prime", prime, 1e-8, "max |cross_inner(i, 0) - r(t(i))|");

  if (cut.n.front() > c.oracle_cap) {
    checks.skip(s, "oracle", "n_1 exceeds the oracle cap");
    return;
  }
  const auto cmp = compare_with_oracle(con, c.oracle_cap);
  const std::string window = "window " + std::to_string(cmp.oracle.window);
  checks.at_most(s, "oracle_a", cmp.max_delta_a, 1e-8, window);
  checks.at_most(s, "oracle_cross", cmp.max_delta_cross, 1e-8, window);
  checks.at_most(s, "oracle_q", cmp.max_delta_q, 1e-8, window);
  checks.at_most(s, "oracle_involution", cmp.oracle.involution_error, 1e-10, "max |W^2 - I|");
  checks.at_most(s, "oracle_symmetry", cmp.oracle.symmetry_error, 1e-10, "max |W - W^T|");
  checks.at_most(s, "oracle_commutation", cmp.oracle.commutation_error, 1e-10, "max_k |W Q_k - Q_k W|");
  checks.at_most(s, "oracle_v_isometry", cmp.oracle.isometry_error, 1e-8, "max |<V^i xi, V^j xi> - r(i - j)|");
  checks.at_most(s, "oracle_completeness", cmp.oracle.completeness_error, 1e-8);
}

void gaussian_suite(const RunConfig& c, const Construction& con, Checks& checks) {
  const std::string s = "gaussian";
  const std::int64_t n = std::min(c.simulation.n, con.window());
  const auto cov = build_joint_covariance(con, n);
  const auto m = static_cast<Eigen::Index>(n);
  const auto& times = con.cutoffs().times;
  const auto& seq = con.ladder().sequence();

  checks.at_most(s, "sigma_psd", -cov.min_eigenvalue, 1e-8, "-(min eigenvalue of Sigma)");
  double blocks = (cov.sigma - cov.sigma.transpose()).cwiseAbs().maxCoeff(), first = 0.0, toeplitz = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      toeplitz = std::max(toeplitz, std::abs(cov.sigma(i, j) - seq(times(i) - times(j))));
      blocks = std::max(blocks, std::abs(cov.sigma(i, j) - cov.sigma(m + i, m + j)));
    }
    blocks = std::max(blocks, std::abs(cov.sigma(i, i) - 1.0));
    blocks = std::max(blocks, std::abs(cov.sigma(m + i, m + i) - 1.0));
    blocks = std::max(blocks, std::abs(cov.sigma(i, m + i) - con.reflected_inner(i)));
    first = std::max(first, std::abs(cov.sigma(i, m) - seq(times(i))));
  }
  checks.at_most(s, "sigma_blocks", blocks, 1e-10, "unit diagonal; XY[i,i] = a(i); symmetry");
  checks.at_most(s, "sigma_first_column", first, 1e-8, "max |XY[i,0] - r(t(i))|");
  checks.at_most(s, "sigma_marginals", toeplitz, 1e-8, "XX = YY = [r(t(i) - t(j))]");

  SimulationConfig sim;
  sim.samples = c.simulation.samples;
  sim.seed = c.simulation.seed;
  sim.truncations = {1.0, 2.0, 4.0, 8.0};
  sim.threads = c.threads;
  const auto report = sample_and_estimate(cov, sim);
  checks.at_most(s, "average_z", std::abs(report.average.z), 4.0,
                 "estimate " + format_number(report.average.estimate) + " vs " + format_number(report.average.expected));
  if (report.lag1_x) {
    checks.at_most(s, "stationarity_x", std::abs(report.lag1_x->z), 4.0, "|z| of lag-1 covariance of X");
    checks.at_most(s, "stationarity_y", std::abs(report.lag1_y->z), 4.0, "|z| of lag-1 covariance of Y");
  }
  double cross = 0.0;
  for (const auto& e : report.cross_identification) cross = std::max(cross, std::abs(e.z));
  checks.at_most(s, "cross_identification", cross, 4.0, "max_i |z| of E[X_i Y_0] against r(t(i))");

  const auto again = sample_and_estimate(cov, sim);
  const bool same = again.average.estimate == report.average.estimate &&
                    again.average.standard_error == report.average.standard_error &&
                    again.truncated.back().estimate == report.truncated.back().estimate;
  checks.add(s, "seed_determinism", same ? 0.0 : 1.0, 0.0, same, "rerun with the same seed is bit-identical");

  double increase = 0.0;
  for (std::size_t l = 1; l < report.truncated.size(); ++l) {
    increase = std::max(increase, std::abs(report.truncated[l].bias) - std::abs(report.truncated[l - 1].bias));
  }
  checks.at_most(s, "truncation_monotone", increase, 0.0, "|bias| non-increasing over M = 1, 2, 4, 8");
  checks.at_most(s, "truncation_bias_8", std::abs(report.truncated.back().bias), 1e-3, "|A_8 - A| on the same samples");
}

}  // namespace

// ---------------------------------------------------------------------------

CommandResult cmd_spectrum(const RunConfig& c) {
  CommandResult result;
  CorrelationSequence seq(c.spectrum);
  const auto& o = c.outputs;
  seq.prefetch(std::max(o.max_lag, o.psd_window));

  Csv corr({"lag", "r"});
  json corr_json = json::array();
  for (std::int64_t i = 0; i <= o.max_lag; ++i) {
    corr.row(i, seq(i));
    corr_json.push_back({{"lag", i}, {"r", seq(i)}});
  }
  Csv wiener({"n", "wiener_average"});
  json wiener_json = json::array();
  for (const auto n : o.wiener_n) {
    const double w = wiener_average(seq, n);
    wiener.row(n, w);
    wiener_json.push_back({{"n", n}, {"wiener_average", w}});
  }
  Csv rigid({"q", "r_q", "rigidity_defect", "system_rigidity_defect"});
  json rigid_json = json::array();
  for (const auto q : o.rigidity_q) {
    const double r = seq(q), d = rigidity_defect(seq, q), sd = system_rigidity_defect(seq, q);
    rigid.row(q, r, d, sd);
    rigid_json.push_back({{"q", q}, {"r_q", r}, {"rigidity_defect", d}, {"system_rigidity_defect", sd}});
  }
  const auto psd = validate_psd(seq, o.psd_window);
  const json psd_json = {{"window", psd.window},
                         {"ok", psd.ok},
                         {"min_eigenvalue_estimate", number(psd.min_eigenvalue_estimate)},
                         {"tolerance", psd.tolerance},
                         {"failing_minor", optional_number(psd.failing_minor)},
                         {"dependent_columns", psd.dependent_columns}};

  add_csv(result, c, "correlation.csv", std::move(corr));
  add_csv(result, c, "wiener.csv", std::move(wiener));
  add_csv(result, c, "rigidity.csv", std::move(rigid));
  add_json(result, c, "spectrum.json",
           {{"spectrum", spectrum_info(c)},
            {"correlation", corr_json},
            {"wiener", wiener_json},
            {"rigidity", rigid_json},
            {"psd", psd_json}});

  std::ostringstream out;
  out << "spectrum " << family_name(c.spectrum) << (is_atomless(c.spectrum) ? " (atomless)" : " (atomic)") << "\n";
  if (auto h = validity_horizon(c.spectrum)) out << "validity horizon: " << *h << " lags\n";
  out << "psd window " << psd.window << ": " << (psd.ok ? "ok" : "FAILED") << ", min pivot "
      << format_number(psd.min_eigenvalue_estimate);
  if (psd.failing_minor) out << ", leading minor " << *psd.failing_minor << " fails";
  out << "\n";
  for (const auto n : o.wiener_n) out << "wiener_average(" << n << ") = " << format_number(wiener_average(seq, n)) << "\n";
  result.summary = out.str();
  result.status = psd.ok ? 0 : 2;
  return result;
}

CommandResult cmd_construct(const RunConfig& c) {
  CommandResult result;
  json report = {{"config", to_json(c)}, {"spectrum", spectrum_info(c)}};
  std::optional<Construction> con;
  try {
    con.emplace(build(c));
  } catch (const Error& e) {
    report["status"] = to_string(e.kind());
    report["error"] = error_json(e);
    add_json(result, c, "report.json", report);
    result.status = exit_code(e.kind());
    result.summary = std::string("construct failed (") + to_string(e.kind()) + "): " + e.what() + "\n";
    if (const auto* h = dynamic_cast<const HorizonExhaustedError*>(&e)) {
      std::ostringstream out;
      out << "partial cutoffs:";
      for (auto v : h->partial_cutoffs()) out << ' ' << v;
      result.summary += out.str() + "\n";
    }
    return result;
  }

  const auto& cut = con->cutoffs();
  const std::int64_t nK = con->window();
  std::vector<double> a;
  try {
    a = con->reflected_series(nK);
  } catch (const Error& e) {
    report["status"] = to_string(e.kind());
    report["error"] = error_json(e);
    report["cutoffs"] = {{"n", cut.n}, {"achieved", cut.achieved}};
    report["diagnostics"] = diagnostics_json(con->diagnostics(), con->stats());
    add_json(result, c, "report.json", report);
    result.status = exit_code(e.kind());
    result.summary = std::string("construct failed (") + to_string(e.kind()) + "): " + e.what() + "\n";
    return result;
  }
  const auto averages = running_averages(a);
  const auto peaks = peak_table(cut, averages);

  std::optional<OracleComparison> cmp;
  if (c.oracle && cut.n.front() <= c.oracle_cap) cmp = compare_with_oracle(*con, c.oracle_cap);

  std::vector<double> bounds;
  std::vector<std::int64_t> times;
  for (std::size_t k = 0; k < cut.n.size(); ++k) {
    bounds.push_back(1.0 / static_cast<double>(k + 1));
    times.push_back(cut.times(cut.n[k] - 1));
  }
  json peak_json = json::array();
  for (const auto& p : peaks) {
    peak_json.push_back({{"k", p.level},
                         {"n_k", p.cutoff},
                         {"A", p.average},
                         {"sign", p.predicted_sign},
                         {"deviation", p.deviation},
                         {"bound", p.error_bound},
                         {"within_bound", p.within_bound}});
  }
  report["status"] = "ok";
  report["error"] = nullptr;
  report["cutoffs"] = {{"n", cut.n}, {"achieved", cut.achieved}, {"achieved_bound", bounds}, {"last_time", times}};
  report["peaks"] = peak_json;
  report["series"] = {{"length", nK}, {"a", a}, {"A", averages}};
  report["diagnostics"] = diagnostics_json(con->diagnostics(), con->stats());
  report["oracle"] = cmp ? oracle_json(*cmp) : json(nullptr);
  add_json(result, c, "report.json", report);

  Csv series({"i", "a_i"});
  Csv avg({"n", "A_n"});
  for (std::int64_t i = 0; i < nK; ++i) {
    series.row(i, a[static_cast<std::size_t>(i)]);
    avg.row(i + 1, averages[static_cast<std::size_t>(i)]);
  }
  add_csv(result, c, "series.csv", std::move(series));
  add_csv(result, c, "averages.csv", std::move(avg));
  Csv peak_csv({"k", "n_k", "A", "sign", "deviation", "bound", "within_bound"});
  for (const auto& p : peaks) peak_csv.row(p.level, p.cutoff, p.average, p.predicted_sign, p.deviation, p.error_bound, p.within_bound);
  add_csv(result, c, "peaks.csv", std::move(peak_csv));

  std::ostringstream out;
  out << "construct " << family_name(c.spectrum) << ", K = " << c.levels << ", jitter " << format_number(con->ladder().jitter())
      << "\n";
  out << pad("k", 3) << pad("n_k", 10) << pad("A(n_k)", 14) << pad("sign", 6) << pad("|A-sign|", 12) << pad("2/k", 10)
      << "  ok\n";
  for (const auto& p : peaks) {
    out << pad(std::to_string(p.level), 3) << pad(std::to_string(p.cutoff), 10) << pad(fixed(p.average, 9), 14)
        << pad(p.predicted_sign > 0 ? "+1" : "-1", 6) << pad(fixed(p.deviation), 12) << pad(fixed(p.error_bound), 10)
        << (p.level < 2 ? "  -" : p.within_bound ? "  yes" : "  NO") << "\n";
  }
  if (cmp) {
    out << "oracle (window " << cmp->oracle.window << "): max delta "
        << format_number(std::max({cmp->max_delta_a, cmp->max_delta_cross, cmp->max_delta_q})) << ", |W^2 - I| "
        << format_number(cmp->oracle.involution_error) << "\n";
  } else if (c.oracle) {
    out << "oracle skipped: n_1 exceeds cap\n";
  }
  result.summary = out.str();
  return result;
}

CommandResult cmd_verify(const RunConfig& c) {
  CommandResult result;
  Checks checks;
  std::optional<ErrorKind> fault;
  std::string fault_message;

  CorrelationSequence seq(c.spectrum);
  spectral_suite(c, seq, checks);

  std::optional<Construction> con;
  try {
    con.emplace(build(c));
  } catch (const Error& e) {
    fault = e.kind();
    fault_message = e.what();
    auto& ch = checks.add("construction", "select_cutoffs", 0.0, 0.0, false, std::string(to_string(e.kind())) + ": " + e.what());
    ch.psd = e.kind() == ErrorKind::NonPsd;
  }
  if (con) {
    auto guarded = [&](const char* suite, auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        auto& ch = checks.add(suite, "fault", 0.0, 0.0, false, std::string(to_string(e.kind())) + ": " + e.what());
        ch.psd = e.kind() == ErrorKind::NonPsd;
      }
    };
    guarded("krylov", [&] { krylov_suite(c, *con, checks); });
    guarded("construction", [&] { construction_suite(c, *con, checks); });
    guarded("gaussian", [&] { gaussian_suite(c, *con, checks); });
  } else {
    checks.skip("krylov", "*", "construction failed");
    checks.skip("gaussian", "*", "construction failed");
  }

  bool psd_failure = false, other_failure = false;
  Csv csv({"suite", "check", "value", "tolerance", "pass", "detail"});
  json list = json::array();
  std::ostringstream out;
  std::int64_t failed = 0;
  for (const auto& ch : checks.all()) {
    if (!ch.pass) {
      ++failed;
      (ch.psd ? psd_failure : other_failure) = true;
    }
    std::string detail = ch.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    csv.row(ch.suite, ch.name, ch.value, ch.tolerance, ch.pass, detail);
    list.push_back({{"suite", ch.suite},
                    {"check", ch.name},
                    {"value", number(ch.value)},
                    {"tolerance", number(ch.tolerance)},
                    {"pass", ch.pass},
                    {"psd", ch.psd},
                    {"detail", ch.detail}});
    out << (ch.pass ? "PASS " : "FAIL ") << ch.suite << "/" << ch.name << "  value " << format_number(ch.value)
        << " (tol " << format_number(ch.tolerance) << ")";
    if (!ch.detail.empty()) out << "  " << ch.detail;
    out << "\n";
  }
  json skipped = json::array();
  for (const auto& [name, why] : checks.skipped()) {
    skipped.push_back({{"check", name}, {"reason", why}});
    out << "SKIP " << name << "  " << why << "\n";
  }

  if (psd_failure) {
    result.status = 2;
    out << "verify: PSD failure\n";
  } else if (fault == ErrorKind::HorizonExhausted) {
    result.status = 3;
  } else if (fault) {
    result.status = exit_code(*fault);
  } else if (other_failure) {
    result.status = 4;
  }
  out << "verify: " << checks.all().size() - static_cast<std::size_t>(failed) << " passed, " << failed << " failed\n";

  add_csv(result, c, "verify.csv", std::move(csv));
  add_json(result, c, "verify.json",
           {{"spectrum", spectrum_info(c)},
            {"status", result.status},
            {"passed", failed == 0},
            {"checks", list},
            {"skipped", skipped},
            {"fault", fault ? json({{"kind", to_string(*fault)}, {"message", fault_message}}) : json(nullptr)}});
  result.summary = out.str();
  return result;
}

CommandResult cmd_simulate(const RunConfig& c) {
  CommandResult result;
  const auto& s = c.simulation;
  std::optional<Construction> con;
  try {
    con.emplace(build(c));
  } catch (const Error& e) {
    add_json(result, c, "estimate.json", {{"status", to_string(e.kind())}, {"error", error_json(e)}});
    result.status = exit_code(e.kind());
    result.summary = std::string("simulate failed (") + to_string(e.kind()) + "): " + e.what() + "\n";
    return result;
  }
  if (s.n > con->window()) {
    throw UsageError("simulation.n = " + std::to_string(s.n) + " exceeds n_K = " + std::to_string(con->window()) +
                     "; raise construction.K");
  }
  JointCovariance cov;
  try {
    cov = build_joint_covariance(*con, s.n);
  } catch (const Error& e) {
    add_json(result, c, "estimate.json", {{"status", to_string(e.kind())}, {"error", error_json(e)}});
    result.status = exit_code(e.kind());
    result.summary = std::string("simulate failed (") + to_string(e.kind()) + "): " + e.what() + "\n";
    return result;
  }
  SimulationConfig sim;
  sim.samples = s.samples;
  sim.seed = s.seed;
  sim.threads = c.threads;
  if (s.truncation) sim.truncations = {*s.truncation};
  const auto report = sample_and_estimate(cov, sim);

  auto moment = [](const MomentEstimate& m) {
    return json{{"expected", m.expected},
                {"estimate", m.estimate},
                {"standard_error", number(m.standard_error)},
                {"z", number(m.z)}};
  };
  json doc = {{"status", report.pass() ? "pass" : "fail"},
              {"spectrum", spectrum_info(c)},
              {"n", report.n},
              {"samples", report.samples},
              {"seed", report.seed},
              {"psd_jitter", report.psd_jitter},
              {"sigma_min_eigenvalue", cov.min_eigenvalue},
              {"exact", report.average.expected},
              {"estimate", report.average.estimate},
              {"standard_error", number(report.average.standard_error)},
              {"z", number(report.average.z)},
              {"lag1_x", report.lag1_x ? moment(*report.lag1_x) : json(nullptr)},
              {"lag1_y", report.lag1_y ? moment(*report.lag1_y) : json(nullptr)}};
  if (!report.truncated.empty()) {
    const auto& t = report.truncated.front();
    doc["truncation"] = {{"level", t.level},
                         {"estimate", t.estimate},
                         {"standard_error", number(t.standard_error)},
                         {"bias", t.bias}};
  } else {
    doc["truncation"] = nullptr;
  }
  json cross = json::array(), diag = json::array();
  for (const auto& m : report.cross_identification) cross.push_back(moment(m));
  for (const auto& m : report.diagonal) diag.push_back(moment(m));
  doc["cross_identification"] = cross;
  doc["diagonal"] = diag;
  add_json(result, c, "estimate.json", doc);

  Csv csv({"moment", "index", "expected", "estimate", "standard_error", "z"});
  auto row = [&](const char* name, std::int64_t i, const MomentEstimate& m) {
    csv.row(name, i, m.expected, m.estimate, m.standard_error, m.z);
  };
  row("average", -1, report.average);
  if (report.lag1_x) row("lag1_x", 1, *report.lag1_x);
  if (report.lag1_y) row("lag1_y", 1, *report.lag1_y);
  for (std::size_t i = 0; i < report.cross_identification.size(); ++i) {
    row("x_i_y_0", static_cast<std::int64_t>(i), report.cross_identification[i]);
  }
  for (std::size_t i = 0; i < report.diagonal.size(); ++i) row("x_i_y_i", static_cast<std::int64_t>(i), report.diagonal[i]);
  add_csv(result, c, "moments.csv", std::move(csv));

  std::ostringstream out;
  out << "simulate " << family_name(c.spectrum) << ", n = " << report.n << ", samples = " << report.samples
      << ", seed = " << report.seed << "\n";
  out << "exact A(n) = " << format_number(report.average.expected) << ", estimate = " << format_number(report.average.estimate)
      << " +- " << format_number(report.average.standard_error) << ", z = " << fixed(report.average.z, 3) << "\n";
  if (!report.truncated.empty()) {
    const auto& t = report.truncated.front();
    out << "truncated at M = " << format_number(t.level) << ": " << format_number(t.estimate) << ", bias "
        << format_number(t.bias) << "\n";
  }
  out << (report.pass() ? "pass" : "FAIL") << ": |z| " << (report.pass() ? "<=" : ">") << " 4\n";
  result.summary = out.str();
  result.status = report.pass() ? 0 : 4;
  return result;
}

CommandResult run_command(const std::string& name, const RunConfig& config) {
  if (name == "spectrum") return cmd_spectrum(config);
  if (name == "construct") return cmd_construct(config);
  if (name == "verify") return cmd_verify(config);
  if (name == "simulate") return cmd_simulate(config);
  throw UsageError("unknown command '" + name + "'");
}

}  // namespace divavg
