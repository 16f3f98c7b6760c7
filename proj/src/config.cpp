#include "divavg/config.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <string_view>

#include "divavg/errors.hpp"

namespace divavg {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ValidationError("config: " + path + ": " + message);
}

const json& require_object(const json& node, const std::string& path) {
  if (!node.is_object()) fail(path, "expected an object");
  return node;
}

void allow_keys(const json& node, const std::string& path, std::initializer_list<std::string_view> keys) {
  for (const auto& item : node.items()) {
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
      fail(path.empty() ? item.key() : path + "." + item.key(), "unknown key");
    }
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double get_number(const json& node, const std::string& path) {
  if (!node.is_number()) fail(path, "expected a number");
  const double v = node.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

std::int64_t get_integer(const json& node, const std::string& path) {
  if (node.is_number_integer()) return node.get<std::int64_t>();
  // 1e4 and 200000.0 are accepted when integral.
  if (node.is_number_float()) {
    const double v = node.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
  }
  fail(path, "expected an integer");
}

std::vector<std::int64_t> get_integer_list(const json& node, const std::string& path) {
  if (!node.is_array()) fail(path, "expected an array of integers");
  std::vector<std::int64_t> out;
  for (std::size_t k = 0; k < node.size(); ++k) out.push_back(get_integer(node[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

std::vector<double> get_number_list(const json& node, const std::string& path) {
  if (!node.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < node.size(); ++k) out.push_back(get_number(node[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

SpectrumFamily parse_spectrum_at(const json& node, const std::string& path) {
  require_object(node, path);
  if (!node.contains("family") || !node["family"].is_string()) fail(join(path, "family"), "expected a family name");
  const auto family = node["family"].get<std::string>();

  if (family == "lebesgue") {
    allow_keys(node, path, {"family"});
    return Lebesgue{};
  }
  if (family == "arc") {
    allow_keys(node, path, {"family", "epsilon"});
    if (!node.contains("epsilon")) fail(join(path, "epsilon"), "missing");
    return Arc{get_number(node["epsilon"], join(path, "epsilon"))};
  }
  if (family == "convolution_truncated") {
    allow_keys(node, path, {"family", "base", "factors"});
    if (!node.contains("base")) fail(join(path, "base"), "missing");
    if (!node.contains("factors")) fail(join(path, "factors"), "missing");
    const auto factors = get_integer(node["factors"], join(path, "factors"));
    if (factors < 1 || factors > 62) fail(join(path, "factors"), "must lie in [1, 62]");
    return ConvolutionTruncated{get_integer(node["base"], join(path, "base")), static_cast<int>(factors)};
  }
  if (family == "mixture") {
    allow_keys(node, path, {"family", "components"});
    const std::string cpath = join(path, "components");
    if (!node.contains("components") || !node["components"].is_array()) fail(cpath, "expected an array");
    Mixture m;
    for (std::size_t k = 0; k < node["components"].size(); ++k) {
      const std::string item = cpath + "[" + std::to_string(k) + "]";
      const auto& c = require_object(node["components"][k], item);
      allow_keys(c, item, {"weight", "spectrum"});
      if (!c.contains("weight")) fail(join(item, "weight"), "missing");
      if (!c.contains("spectrum")) fail(join(item, "spectrum"), "missing");
      m.weights.push_back(get_number(c["weight"], join(item, "weight")));
      m.components.push_back(parse_spectrum_at(c["spectrum"], join(item, "spectrum")));
    }
    return m;
  }
  if (family == "quadrature_density") {
    allow_keys(node, path, {"family", "nodes", "csv", "theta", "density"});
    const std::int64_t nodes = node.contains("nodes") ? get_integer(node["nodes"], join(path, "nodes")) : 4096;
    if (node.contains("csv")) {
      if (node.contains("theta") || node.contains("density")) fail(path, "give either csv or theta/density, not both");
      if (!node["csv"].is_string()) fail(join(path, "csv"), "expected a path");
      return load_density_csv(node["csv"].get<std::string>(), nodes);
    }
    if (!node.contains("theta") || !node.contains("density")) fail(path, "needs csv or theta and density arrays");
    QuadratureDensity q;
    q.theta = get_number_list(node["theta"], join(path, "theta"));
    q.density = get_number_list(node["density"], join(path, "density"));
    q.nodes = nodes;
    return q;
  }
  if (family == "table") {
    allow_keys(node, path, {"family", "values"});
    if (!node.contains("values")) fail(join(path, "values"), "missing");
    return CorrelationTable{get_number_list(node["values"], join(path, "values"))};
  }
  fail(join(path, "family"), "unknown family '" + family + "'");
}

TimeSequence parse_times(const json& node, const std::string& path) {
  require_object(node, path);
  allow_keys(node, path, {"type", "coefficients"});
  const std::string type = node.value("type", std::string("identity"));
  if (type == "identity") {
    if (node.contains("coefficients")) fail(join(path, "coefficients"), "not used by the identity sequence");
    return TimeSequence::identity();
  }
  if (type == "polynomial") {
    if (!node.contains("coefficients")) fail(join(path, "coefficients"), "missing");
    auto t = TimeSequence::polynomial(get_integer_list(node["coefficients"], join(path, "coefficients")));
    return t;
  }
  fail(join(path, "type"), "expected identity or polynomial");
}

}  // namespace

SpectrumFamily parse_spectrum(const json& node) {
  auto family = parse_spectrum_at(node, "spectrum");
  validate(family);
  return family;
}

json spectrum_to_json(const SpectrumFamily& family) {
  return std::visit(
      [](const auto& f) -> json {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Lebesgue>) {
          return {{"family", "lebesgue"}};
        } else if constexpr (std::is_same_v<T, Arc>) {
          return {{"family", "arc"}, {"epsilon", f.epsilon}};
        } else if constexpr (std::is_same_v<T, ConvolutionTruncated>) {
          return {{"family", "convolution_truncated"}, {"base", f.base}, {"factors", f.factors}};
        } else if constexpr (std::is_same_v<T, Mixture>) {
          json components = json::array();
          for (std::size_t k = 0; k < f.components.size(); ++k) {
            components.push_back({{"weight", f.weights[k]}, {"spectrum", spectrum_to_json(f.components[k])}});
          }
          return {{"family", "mixture"}, {"components", components}};
        } else if constexpr (std::is_same_v<T, QuadratureDensity>) {
          // A table read from disk is referred to by path, not inlined.
          if (!f.source.empty()) return {{"family", "quadrature_density"}, {"nodes", f.nodes}, {"csv", f.source}};
          return {{"family", "quadrature_density"}, {"nodes", f.nodes}, {"theta", f.theta}, {"density", f.density}};
        } else {
          return {{"family", "table"}, {"values", f.values}};
        }
      },
      family.value());
}

RunConfig parse_config(const json& document) {
  require_object(document, "<root>");
  allow_keys(document, "", {"spectrum", "construction", "oracle", "spectrum_outputs", "simulation", "output", "threads"});
  RunConfig cfg;

  if (document.contains("spectrum")) cfg.spectrum = parse_spectrum(document["spectrum"]);

  if (document.contains("construction")) {
    const auto& c = require_object(document["construction"], "construction");
    allow_keys(c, "construction", {"K", "max_horizon", "time_sequence"});
    if (c.contains("K")) {
      const auto k = get_integer(c["K"], "construction.K");
      if (k < 1 || k > 64) fail("construction.K", "must lie in [1, 64]");
      cfg.levels = static_cast<int>(k);
    }
    if (c.contains("max_horizon")) {
      cfg.max_horizon = get_integer(c["max_horizon"], "construction.max_horizon");
      if (cfg.max_horizon < 1) fail("construction.max_horizon", "must be >= 1");
    }
    if (c.contains("time_sequence")) cfg.times = parse_times(c["time_sequence"], "construction.time_sequence");
  }

  if (document.contains("oracle")) {
    const auto& o = require_object(document["oracle"], "oracle");
    allow_keys(o, "oracle", {"enabled", "cap"});
    if (o.contains("enabled")) {
      if (!o["enabled"].is_boolean()) fail("oracle.enabled", "expected a boolean");
      cfg.oracle = o["enabled"].get<bool>();
    }
    if (o.contains("cap")) {
      cfg.oracle_cap = get_integer(o["cap"], "oracle.cap");
      if (cfg.oracle_cap < 1 || cfg.oracle_cap > 4096) fail("oracle.cap", "must lie in [1, 4096]");
    }
  }

  if (document.contains("spectrum_outputs")) {
    const auto& s = require_object(document["spectrum_outputs"], "spectrum_outputs");
    allow_keys(s, "spectrum_outputs", {"max_lag", "wiener_n", "rigidity_q", "psd_window"});
    if (s.contains("max_lag")) {
      cfg.outputs.max_lag = get_integer(s["max_lag"], "spectrum_outputs.max_lag");
      if (cfg.outputs.max_lag < 0) fail("spectrum_outputs.max_lag", "must be >= 0");
    }
    if (s.contains("wiener_n")) {
      cfg.outputs.wiener_n = get_integer_list(s["wiener_n"], "spectrum_outputs.wiener_n");
      for (auto n : cfg.outputs.wiener_n) {
        if (n < 1) fail("spectrum_outputs.wiener_n", "entries must be >= 1");
      }
    }
    if (s.contains("rigidity_q")) {
      cfg.outputs.rigidity_q = get_integer_list(s["rigidity_q"], "spectrum_outputs.rigidity_q");
      for (auto q : cfg.outputs.rigidity_q) {
        if (q < 1) fail("spectrum_outputs.rigidity_q", "entries must be >= 1");
      }
    }
    if (s.contains("psd_window")) {
      cfg.outputs.psd_window = get_integer(s["psd_window"], "spectrum_outputs.psd_window");
      if (cfg.outputs.psd_window < 1 || cfg.outputs.psd_window > 2048) {
        fail("spectrum_outputs.psd_window", "must lie in [1, 2048]");
      }
    }
  }

  if (document.contains("simulation")) {
    const auto& s = require_object(document["simulation"], "simulation");
    allow_keys(s, "simulation", {"n", "samples", "seed", "truncation"});
    if (s.contains("n")) {
      cfg.simulation.n = get_integer(s["n"], "simulation.n");
      if (cfg.simulation.n < 1 || cfg.simulation.n > 4096) fail("simulation.n", "must lie in [1, 4096]");
    }
    if (s.contains("samples")) {
      cfg.simulation.samples = get_integer(s["samples"], "simulation.samples");
      if (cfg.simulation.samples < 2) fail("simulation.samples", "must be >= 2");
    }
    if (s.contains("seed")) {
      const auto& seed = s["seed"];
      if (seed.is_number_unsigned()) {
        cfg.simulation.seed = seed.get<std::uint64_t>();
      } else {
        const auto v = get_integer(seed, "simulation.seed");
        if (v < 0) fail("simulation.seed", "must be nonnegative");
        cfg.simulation.seed = static_cast<std::uint64_t>(v);
      }
    }
    if (s.contains("truncation") && !s["truncation"].is_null()) {
      const double m = get_number(s["truncation"], "simulation.truncation");
      if (!(m > 0.0)) fail("simulation.truncation", "must be positive");
      cfg.simulation.truncation = m;
    }
  }

  if (document.contains("output")) {
    const auto& o = require_object(document["output"], "output");
    allow_keys(o, "output", {"dir", "format"});
    if (o.contains("dir")) {
      if (!o["dir"].is_string() || o["dir"].get<std::string>().empty()) fail("output.dir", "expected a directory path");
      cfg.output_dir = o["dir"].get<std::string>();
    }
    if (o.contains("format")) {
      const std::string f = o["format"].is_string() ? o["format"].get<std::string>() : "";
      if (f == "csv") {
        cfg.format = OutputFormat::Csv;
      } else if (f == "json") {
        cfg.format = OutputFormat::Json;
      } else if (f == "both") {
        cfg.format = OutputFormat::Both;
      } else {
        fail("output.format", "expected csv, json or both");
      }
    }
  }

  if (document.contains("threads")) {
    const auto t = get_integer(document["threads"], "threads");
    if (t < 0 || t > 1024) fail("threads", "must lie in [0, 1024]");
    cfg.threads = static_cast<unsigned>(t);
  }
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  json document;
  try {
    document = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(document);
}

json to_json(const RunConfig& cfg) {
  json times = {{"type", "identity"}};
  if (!cfg.times.is_identity()) times = {{"type", "polynomial"}, {"coefficients", cfg.times.coefficients()}};
  json doc;
  doc["spectrum"] = spectrum_to_json(cfg.spectrum);
  doc["construction"] = {{"K", cfg.levels}, {"max_horizon", cfg.max_horizon}, {"time_sequence", times}};
  doc["oracle"] = {{"enabled", cfg.oracle}, {"cap", cfg.oracle_cap}};
  doc["spectrum_outputs"] = {{"max_lag", cfg.outputs.max_lag},
                             {"wiener_n", cfg.outputs.wiener_n},
                             {"rigidity_q", cfg.outputs.rigidity_q},
                             {"psd_window", cfg.outputs.psd_window}};
  doc["simulation"] = {{"n", cfg.simulation.n},
                       {"samples", cfg.simulation.samples},
                       {"seed", cfg.simulation.seed},
                       {"truncation", cfg.simulation.truncation ? json(*cfg.simulation.truncation) : json(nullptr)}};
  doc["output"] = {{"dir", cfg.output_dir}, {"format", to_string(cfg.format)}};
  doc["threads"] = cfg.threads;
  return doc;
}

std::string canonical_text(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

const char* to_string(OutputFormat format) noexcept {
  switch (format) {
    case OutputFormat::Csv:
      return "csv";
    case OutputFormat::Json:
      return "json";
    case OutputFormat::Both:
      return "both";
  }
  return "both";
}

}  // namespace divavg
