#include "divavg/divavg.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "divavg/commands.hpp"
#include "divavg/config.hpp"
#include "divavg/construction.hpp"
#include "divavg/oracle.hpp"

struct divavg_spectrum {
  divavg::CorrelationSequence seq;
};

struct divavg_construction {
  divavg::Construction con;
};

struct divavg_artifacts {
  divavg::CommandResult result;
  std::string output_dir;
};

namespace {

thread_local std::string last_error;

divavg_status status_of(divavg::ErrorKind kind) {
  switch (kind) {
    case divavg::ErrorKind::Usage:
      return DIVAVG_ERR_USAGE;
    case divavg::ErrorKind::Validation:
      return DIVAVG_ERR_VALIDATION;
    case divavg::ErrorKind::HorizonExhausted:
      return DIVAVG_ERR_HORIZON;
    case divavg::ErrorKind::NonPsd:
      return DIVAVG_ERR_NON_PSD;
    case divavg::ErrorKind::Numerical:
      return DIVAVG_ERR_NUMERICAL;
  }
  return DIVAVG_ERR_INTERNAL;
}

template <typename Fn>
divavg_status guard(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return DIVAVG_OK;
  } catch (const divavg::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return DIVAVG_ERR_INTERNAL;
}

divavg_status null_argument(const char* what) {
  last_error = std::string("null argument: ") + what;
  return DIVAVG_ERR_USAGE;
}

char* duplicate(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* divavg_version(void) { return "0.1.0"; }

const char* divavg_last_error(void) { return last_error.c_str(); }

void divavg_string_free(char* s) { delete[] s; }

int divavg_exit_code(divavg_status status) {
  switch (status) {
    case DIVAVG_OK:
      return 0;
    case DIVAVG_ERR_USAGE:
    case DIVAVG_ERR_VALIDATION:
    case DIVAVG_ERR_NON_PSD:
      return 2;
    case DIVAVG_ERR_HORIZON:
      return 3;
    default:
      return 4;
  }
}

divavg_status divavg_config_normalize(const char* config_json, char** canonical) {
  if (!config_json || !canonical) return null_argument("config_json/canonical");
  return guard([&] { *canonical = duplicate(divavg::canonical_text(divavg::parse_config_text(config_json))); });
}

divavg_status divavg_spectrum_create(const char* spectrum_json, divavg_spectrum** out) {
  if (!spectrum_json || !out) return null_argument("spectrum_json/out");
  *out = nullptr;
  return guard([&] {
    nlohmann::json node;
    try {
      node = nlohmann::json::parse(spectrum_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw divavg::ValidationError(std::string("spectrum: malformed JSON: ") + e.what());
    }
    *out = new divavg_spectrum{divavg::CorrelationSequence(divavg::parse_spectrum(node))};
  });
}

void divavg_spectrum_free(divavg_spectrum* s) { delete s; }

divavg_status divavg_spectrum_correlation(const divavg_spectrum* s, int64_t lag, double* r) {
  if (!s || !r) return null_argument("spectrum/r");
  return guard([&] { *r = s->seq(lag); });
}

divavg_status divavg_spectrum_validate_psd(const divavg_spectrum* s, int64_t window, int* ok, double* min_pivot) {
  if (!s || !ok) return null_argument("spectrum/ok");
  return guard([&] {
    const auto report = divavg::validate_psd(s->seq, window);
    *ok = report.ok ? 1 : 0;
    if (min_pivot) *min_pivot = report.min_eigenvalue_estimate;
  });
}

divavg_status divavg_spectrum_wiener_average(const divavg_spectrum* s, int64_t n, double* value) {
  if (!s || !value) return null_argument("spectrum/value");
  return guard([&] { *value = divavg::wiener_average(s->seq, n); });
}

divavg_status divavg_spectrum_rigidity_defect(const divavg_spectrum* s, int64_t q, double* value) {
  if (!s || !value) return null_argument("spectrum/value");
  return guard([&] { *value = divavg::rigidity_defect(s->seq, q); });
}

divavg_status divavg_spectrum_system_rigidity_defect(const divavg_spectrum* s, int64_t q, double* value) {
  if (!s || !value) return null_argument("spectrum/value");
  return guard([&] { *value = divavg::system_rigidity_defect(s->seq, q); });
}

divavg_status divavg_spectrum_validity_horizon(const divavg_spectrum* s, int64_t* horizon, int* has_horizon) {
  if (!s || !horizon || !has_horizon) return null_argument("spectrum/horizon/has_horizon");
  const auto h = s->seq.horizon();
  *has_horizon = h ? 1 : 0;
  *horizon = h.value_or(0);
  return DIVAVG_OK;
}

divavg_status divavg_construction_run(const divavg_spectrum* s, int levels, int64_t max_horizon,
                                      divavg_construction** out) {
  if (!s || !out) return null_argument("spectrum/out");
  *out = nullptr;
  return guard([&] {
    divavg::SearchOptions options;
    options.levels = levels;
    options.max_horizon = max_horizon;
    *out = new divavg_construction{divavg::Construction::run(s->seq, {}, options)};
  });
}

void divavg_construction_free(divavg_construction* c) { delete c; }

int divavg_construction_levels(const divavg_construction* c) {
  return c ? static_cast<int>(c->con.cutoffs().n.size()) : 0;
}

divavg_status divavg_construction_cutoffs(const divavg_construction* c, int64_t* buffer, size_t capacity) {
  if (!c || (!buffer && capacity > 0)) return null_argument("construction/buffer");
  const auto& n = c->con.cutoffs().n;
  for (size_t k = 0; k < capacity && k < n.size(); ++k) buffer[k] = n[k];
  return DIVAVG_OK;
}

int64_t divavg_construction_window(const divavg_construction* c) { return c ? c->con.window() : 0; }

double divavg_construction_jitter(const divavg_construction* c) { return c ? c->con.ladder().jitter() : 0.0; }

divavg_status divavg_construction_reflected_inner(const divavg_construction* c, int64_t i, double* a) {
  if (!c || !a) return null_argument("construction/a");
  return guard([&] { *a = c->con.reflected_inner(i); });
}

divavg_status divavg_construction_cross_inner(const divavg_construction* c, int64_t i, int64_t j, double* value) {
  if (!c || !value) return null_argument("construction/value");
  return guard([&] { *value = c->con.cross_inner(i, j); });
}

divavg_status divavg_construction_running_averages(const divavg_construction* c, int64_t horizon, double* buffer) {
  if (!c || !buffer) return null_argument("construction/buffer");
  return guard([&] {
    const auto averages = divavg::running_averages(c->con.reflected_series(horizon));
    std::copy(averages.begin(), averages.end(), buffer);
  });
}

divavg_status divavg_construction_oracle_compare(const divavg_construction* c, int64_t cap, double* max_delta,
                                                 double* involution_error) {
  if (!c || !max_delta) return null_argument("construction/max_delta");
  return guard([&] {
    const auto cmp = divavg::compare_with_oracle(c->con, cap);
    *max_delta = std::max({cmp.max_delta_a, cmp.max_delta_cross, cmp.max_delta_q});
    if (involution_error) *involution_error = cmp.oracle.involution_error;
  });
}

divavg_status divavg_command_run(const char* command, const char* config_json, divavg_artifacts** out) {
  if (!command || !config_json || !out) return null_argument("command/config_json/out");
  *out = nullptr;
  int code = 0;
  const divavg_status status = guard([&] {
    const auto config = divavg::parse_config_text(config_json);
    auto* a = new divavg_artifacts{divavg::run_command(command, config), config.output_dir};
    code = a->result.status;
    *out = a;
  });
  if (status != DIVAVG_OK) return status;
  switch (code) {
    case 0:
      return DIVAVG_OK;
    case 2:
      last_error = "command reported a validation or PSD failure";
      return DIVAVG_ERR_VALIDATION;
    case 3:
      last_error = "command reported an exhausted horizon";
      return DIVAVG_ERR_HORIZON;
    default:
      last_error = "command reported a numerical failure";
      return DIVAVG_ERR_NUMERICAL;
  }
}

void divavg_artifacts_free(divavg_artifacts* a) { delete a; }

int divavg_artifacts_exit_code(const divavg_artifacts* a) { return a ? a->result.status : 4; }

size_t divavg_artifacts_count(const divavg_artifacts* a) { return a ? a->result.artifacts.size() : 0; }

const char* divavg_artifacts_name(const divavg_artifacts* a, size_t index) {
  if (!a || index >= a->result.artifacts.size()) return nullptr;
  return a->result.artifacts[index].name.c_str();
}

const char* divavg_artifacts_content(const divavg_artifacts* a, size_t index, size_t* length) {
  if (!a || index >= a->result.artifacts.size()) return nullptr;
  const auto& content = a->result.artifacts[index].content;
  if (length) *length = content.size();
  return content.c_str();
}

const char* divavg_artifacts_summary(const divavg_artifacts* a) { return a ? a->result.summary.c_str() : ""; }

const char* divavg_artifacts_output_dir(const divavg_artifacts* a) { return a ? a->output_dir.c_str() : ""; }

}  // extern "C"
