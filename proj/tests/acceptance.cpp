// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "divavg/commands.hpp"
#include "divavg/config.hpp"
#include "divavg/construction.hpp"
#include "divavg/errors.hpp"
#include "divavg/oracle.hpp"
#include "oracles.hpp"

using namespace divavg;
using nlohmann::json;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail, double seconds) {
  std::printf("%s criterion %d %s: %s (%.2f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

// Runs body, which fills detail and returns pass; exceptions count as failure.
void criterion(int id, const std::string& name, double time_limit, const std::function<bool(std::string&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit > 0 && seconds >= time_limit) {
    pass = false;
    detail += "; over the " + format_number(time_limit) + " s budget";
  }
  report(id, name, pass, detail, seconds);
}

json artifact(const CommandResult& result, const std::string& name) {
  for (const auto& a : result.artifacts) {
    if (a.name == name) return json::parse(a.content);
  }
  throw std::runtime_error("missing artifact " + name);
}

Construction build(SpectrumFamily family, int levels) {
  SearchOptions options;
  options.levels = levels;
  return Construction::run(CorrelationSequence(std::move(family)), {}, options);
}

}  // namespace

int main() {
  criterion(1, "lebesgue closed form", 1.0, [](std::string& detail) {
    RunConfig cfg;
    cfg.levels = 7;
    cfg.format = OutputFormat::Json;
    const auto result = cmd_construct(cfg);
    const auto doc = artifact(result, "report.json");
    const auto n = doc.at("cutoffs").at("n").get<std::vector<std::int64_t>>();
    const auto averages = doc.at("series").at("A").get<std::vector<double>>();
    const auto expected_n = oracle::lebesgue_cutoffs(7);
    const auto peaks = oracle::lebesgue_peaks(7);
    bool ok = result.status == 0 && n == expected_n;
    double worst = 0.0;
    for (std::size_t k = 0; ok && k < n.size(); ++k) {
      worst = std::max(worst, std::abs(averages.at(static_cast<std::size_t>(n[k] - 1)) - peaks[k].value()));
    }
    detail = "n_K=" + std::to_string(n.empty() ? 0 : n.back()) + " max|A-exact|=" + format_number(worst);
    return ok && worst <= 1e-12;
  });

  criterion(2, "peak bound 2/k", 0.0, [](std::string& detail) {
    bool ok = true;
    for (const auto& [family, levels] : {std::pair<SpectrumFamily, int>{Lebesgue{}, 7},
                                         std::pair<SpectrumFamily, int>{Arc{0.5}, 4},
                                         std::pair<SpectrumFamily, int>{Arc{1.0}, 4}}) {
      const auto con = build(family, levels);
      const auto table = peak_table(con.cutoffs(), running_averages(con.reflected_series(con.window())));
      double slack = 1.0;  // min over k >= 2 of 2/k - deviation
      for (const auto& row : table) {
        if (row.level >= 2) slack = std::min(slack, 2.0 / row.level - row.deviation);
      }
      ok = ok && slack > 0.0 && static_cast<int>(table.size()) == levels;
      detail += family_name(family) + " K=" + std::to_string(levels) + " min slack " + format_number(slack) + "; ";
    }
    return ok;
  });

  criterion(3, "property (i') and V-isometry", 0.0, [](std::string& detail) {
    bool ok = true;
    for (const auto& [family, levels] : {std::pair<SpectrumFamily, int>{Lebesgue{}, 5},
                                         std::pair<SpectrumFamily, int>{Arc{0.5}, 4},
                                         std::pair<SpectrumFamily, int>{Arc{1.0}, 4}}) {
      const auto con = build(family, levels);
      const CorrelationSequence& seq = con.ladder().sequence();
      double worst = 0.0;
      for (std::int64_t i = 0; i < con.window(); ++i) worst = std::max(worst, std::abs(con.cross_inner(i, 0) - seq(i)));
      const auto cmp = compare_with_oracle(con, 512);
      ok = ok && worst <= 1e-8 && cmp.oracle.isometry_error <= 1e-8;
      detail += family_name(family) + " |cross(i,0)-r(i)|=" + format_number(worst) +
                " isometry=" + format_number(cmp.oracle.isometry_error) + " (window " +
                std::to_string(cmp.oracle.window) + "); ";
    }
    return ok;
  });

  criterion(4, "dense oracle equivalence on arc(0.5)", 60.0, [](std::string& detail) {
    const auto con = build(Arc{0.5}, 4);
    const auto cmp = compare_with_oracle(con, 512);
    const double worst = std::max({cmp.max_delta_a, cmp.max_delta_cross, cmp.max_delta_q});
    detail = "window " + std::to_string(cmp.oracle.window) + " levels " + std::to_string(cmp.oracle.levels) +
             " max delta " + format_number(worst) + " W^2-I " + format_number(cmp.oracle.involution_error) +
             " completeness " + format_number(cmp.oracle.completeness_error);
    return cmp.oracle.window <= 512 && worst <= 1e-8 && cmp.oracle.involution_error <= 1e-8 &&
           cmp.oracle.completeness_error <= 1e-8;
  });

  criterion(5, "gaussian lift", 30.0, [](std::string& detail) {
    RunConfig cfg;
    cfg.simulation.n = 10;
    cfg.simulation.samples = 200000;
    cfg.simulation.seed = 20240917;
    cfg.format = OutputFormat::Json;
    const auto first = cmd_simulate(cfg);
    const auto second = cmd_simulate(cfg);
    const auto doc = artifact(first, "estimate.json");
    const double estimate = doc.at("estimate"), se = doc.at("standard_error");
    bool ok = first.status == 0 && std::abs(estimate - 0.6) <= 4.0 * se;
    double worst_z = 0.0;
    for (const char* key : {"lag1_x", "lag1_y"}) worst_z = std::max(worst_z, std::abs(doc.at(key).at("z").get<double>()));
    for (const auto& m : doc.at("cross_identification")) worst_z = std::max(worst_z, std::abs(m.at("z").get<double>()));
    const bool identical = artifact(second, "estimate.json") == doc;
    detail = "estimate " + format_number(estimate) + " SE " + format_number(se) + " worst side |z| " +
             format_number(worst_z) + (identical ? " rerun identical" : " rerun differs");
    return ok && worst_z <= 4.0 && identical;
  });

  criterion(6, "rigidity of convolution truncations", 0.0, [](std::string& detail) {
    bool ok = true;
    double worst = 0.0;
    for (int j = 1; j <= 5; ++j) {
      CorrelationSequence seq(ConvolutionTruncated{4, j});
      std::int64_t q = 1;
      for (int m = 0; m < j; ++m) q *= 4;
      for (int m = j; m <= 8; ++m, q *= 4) {
        const double d = rigidity_defect(seq, q), s = system_rigidity_defect(seq, q);
        ok = ok && d == 0.0 && s == 0.0;
        worst = std::max({worst, std::abs(d), std::abs(s)});
      }
    }
    detail = "J=1..5, m=J..8, max defect " + format_number(worst);
    return ok;
  });

  criterion(7, "horizon guard exit code", 0.0, [](std::string& detail) {
    bool ok = true;
    for (int j : {3, 4}) {
      const std::string cmd = std::string("\"") + DIVAVG_CLI +
                              "\" construct --spectrum '{\"family\":\"convolution_truncated\",\"base\":4,\"factors\":" +
                              std::to_string(j) + "}' -K 6 --out acceptance_ct > /dev/null 2>&1";
      const int raw = std::system(cmd.c_str());
      const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
      ok = ok && code == 3;
      detail += "CT(4," + std::to_string(j) + ") K=6 exit " + std::to_string(code) + "; ";
    }
    return ok;
  });

  std::printf("%s: %d failing criteria\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
