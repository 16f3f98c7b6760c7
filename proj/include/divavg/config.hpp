#pragma once

// Run configuration: one JSON document drives every command. Parsing is
// strict (unknown keys are rejected) and to_json() emits the canonical form,
// so parse(to_json(parse(x))) == parse(x).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "divavg/spectral.hpp"
#include "divavg/time_sequence.hpp"

namespace divavg {

enum class OutputFormat { Csv, Json, Both };

struct SpectrumOutputs {
  std::int64_t max_lag = 16;
  std::vector<std::int64_t> wiener_n{10, 100, 1000};
  std::vector<std::int64_t> rigidity_q{1, 2, 4, 8, 16, 32, 64};
  std::int64_t psd_window = 64;
  friend bool operator==(const SpectrumOutputs&, const SpectrumOutputs&) = default;
};

struct SimulationSettings {
  std::int64_t n = 10;
  std::int64_t samples = 200000;
  std::uint64_t seed = 20240917;
  std::optional<double> truncation;
  friend bool operator==(const SimulationSettings&, const SimulationSettings&) = default;
};

struct RunConfig {
  SpectrumFamily spectrum = Lebesgue{};
  int levels = 4;
  std::int64_t max_horizon = 10000;
  TimeSequence times;
  bool oracle = false;
  std::int64_t oracle_cap = 512;
  SpectrumOutputs outputs;
  SimulationSettings simulation;
  std::string output_dir = ".";
  OutputFormat format = OutputFormat::Both;
  unsigned threads = 0;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ValidationError with the offending key path.
RunConfig parse_config(const nlohmann::json& document);
RunConfig parse_config_text(const std::string& text);

SpectrumFamily parse_spectrum(const nlohmann::json& node);
nlohmann::json spectrum_to_json(const SpectrumFamily& family);

nlohmann::json to_json(const RunConfig& config);
/// Canonical text: sorted keys, two-space indent.
std::string canonical_text(const RunConfig& config);

const char* to_string(OutputFormat format) noexcept;

}  // namespace divavg
