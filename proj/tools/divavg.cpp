// Command-line driver. Talks to the library only through the C interface.

#include <divavg/divavg.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
  std::optional<std::string> spectrum;
  std::optional<int> levels;
  std::optional<std::int64_t> max_horizon;
  bool oracle = false;
  std::optional<std::int64_t> oracle_cap;
  std::optional<std::int64_t> n;
  std::optional<std::int64_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> truncation;
  std::optional<unsigned> threads;
  std::vector<std::string> sets;
};

struct CliError {
  int code;
  std::string message;
};

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw CliError{2, what + ": malformed JSON: " + e.what()};
  }
}

// --set a.b.c=VALUE; VALUE is JSON when it parses as JSON, a string otherwise.
void apply_set(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw CliError{2, "--set expects KEY.PATH=VALUE, got '" + assignment + "'"};
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::stringstream keys(path);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) parts.push_back(key);
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    if (!node->contains(parts[k])) (*node)[parts[k]] = json::object();
    node = &(*node)[parts[k]];
    if (!node->is_object()) throw CliError{2, "--set: '" + parts[k] + "' is not an object"};
  }
  (*node)[parts.back()] = value;
}

json build_config(const Overrides& o) {
  json doc = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw CliError{2, "cannot read config " + o.config_path};
    std::stringstream text;
    text << in.rdbuf();
    doc = parse_json(text.str(), o.config_path);
    if (!doc.is_object()) throw CliError{2, o.config_path + ": expected a JSON object"};
  }
  if (o.spectrum) doc["spectrum"] = parse_json(*o.spectrum, "--spectrum");
  if (o.levels) doc["construction"]["K"] = *o.levels;
  if (o.max_horizon) doc["construction"]["max_horizon"] = *o.max_horizon;
  if (o.oracle) doc["oracle"]["enabled"] = true;
  if (o.oracle_cap) doc["oracle"]["cap"] = *o.oracle_cap;
  if (o.n) doc["simulation"]["n"] = *o.n;
  if (o.samples) doc["simulation"]["samples"] = *o.samples;
  if (o.seed) doc["simulation"]["seed"] = *o.seed;
  if (o.truncation) doc["simulation"]["truncation"] = *o.truncation;
  if (o.threads) doc["threads"] = *o.threads;
  if (o.out_dir) doc["output"]["dir"] = *o.out_dir;
  if (o.format) doc["output"]["format"] = *o.format;
  for (const auto& s : o.sets) apply_set(doc, s);
  return doc;
}

int write_artifacts(const divavg_artifacts* artifacts) {
  const fs::path dir = divavg_artifacts_output_dir(artifacts);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "error: cannot create " << dir << ": " << ec.message() << "\n";
    return 2;
  }
  for (size_t k = 0; k < divavg_artifacts_count(artifacts); ++k) {
    size_t length = 0;
    const char* content = divavg_artifacts_content(artifacts, k, &length);
    const fs::path path = dir / divavg_artifacts_name(artifacts, k);
    std::ofstream out(path, std::ios::binary);
    out.write(content, static_cast<std::streamsize>(length));
    if (!out) {
      std::cerr << "error: cannot write " << path << "\n";
      return 2;
    }
  }
  return 0;
}

int run(const std::string& command, const Overrides& o) {
  const std::string text = build_config(o).dump();
  if (command == "config") {
    char* canonical = nullptr;
    const auto status = divavg_config_normalize(text.c_str(), &canonical);
    if (status != DIVAVG_OK) {
      std::cerr << "error: " << divavg_last_error() << "\n";
      return divavg_exit_code(status);
    }
    std::cout << canonical;
    divavg_string_free(canonical);
    return 0;
  }

  divavg_artifacts* artifacts = nullptr;
  const auto status = divavg_command_run(command.c_str(), text.c_str(), &artifacts);
  if (!artifacts) {
    std::cerr << "error: " << divavg_last_error() << "\n";
    return divavg_exit_code(status);
  }
  std::cout << divavg_artifacts_summary(artifacts);
  int code = write_artifacts(artifacts);
  if (code == 0) code = divavg_artifacts_exit_code(artifacts);
  divavg_artifacts_free(artifacts);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double ergodic averages along a reflected Krylov construction"};
  app.require_subcommand(1);
  Overrides o;

  app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", o.out_dir, "output directory (overrides output.dir)");
  app.add_option("--format", o.format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
  app.add_option("--spectrum", o.spectrum, "spectrum block as inline JSON");
  app.add_option("-K,--levels", o.levels, "ladder depth K");
  app.add_option("--max-horizon", o.max_horizon, "cutoff search horizon");
  app.add_flag("--oracle", o.oracle, "run the dense oracle in construct");
  app.add_option("--oracle-cap", o.oracle_cap, "largest window handed to the dense oracle");
  app.add_option("-n,--path-length", o.n, "simulation path length");
  app.add_option("-m,--samples", o.samples, "simulation sample count");
  app.add_option("--seed", o.seed, "simulation seed");
  app.add_option("--truncation", o.truncation, "simulation clamp level M");
  app.add_option("--threads", o.threads, "worker threads (0 = all cores)");
  app.add_option("--set", o.sets, "override any config key: a.b.c=JSON")->take_all();

  std::string chosen;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"spectrum", "correlations, Wiener averages, rigidity defects, PSD check"},
           {"construct", "cutoffs, reflected inner products and running averages"},
           {"verify", "run every invariant suite on the configured case"},
           {"simulate", "Monte-Carlo estimate of the double average for the Gaussian lift"},
           {"config", "print the canonical form of the configuration"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run(chosen, o);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  }
}
