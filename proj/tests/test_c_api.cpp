// Exercises the shared library through its C header only.
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "divavg/divavg.h"

TEST_CASE("spectrum handle") {
  divavg_spectrum* s = nullptr;
  REQUIRE(divavg_spectrum_create(R"({"family":"arc","epsilon":1.0})", &s) == DIVAVG_OK);
  double r = 0.0;
  CHECK(divavg_spectrum_correlation(s, 1, &r) == DIVAVG_OK);
  CHECK(r == doctest::Approx(std::sin(1.0)).epsilon(1e-14));
  int ok = 0;
  double pivot = 0.0;
  CHECK(divavg_spectrum_validate_psd(s, 32, &ok, &pivot) == DIVAVG_OK);
  CHECK(ok == 1);
  int64_t horizon = 0;
  int has = 1;
  CHECK(divavg_spectrum_validity_horizon(s, &horizon, &has) == DIVAVG_OK);
  CHECK(has == 0);
  divavg_spectrum_free(s);

  CHECK(divavg_spectrum_create(R"({"family":"arc","epsilon":-1})", &s) == DIVAVG_ERR_VALIDATION);
  CHECK(s == nullptr);
  CHECK(std::strlen(divavg_last_error()) > 0);
  CHECK(divavg_spectrum_create("{", &s) == DIVAVG_ERR_VALIDATION);
  CHECK(divavg_spectrum_correlation(nullptr, 0, &r) == DIVAVG_ERR_USAGE);
}

TEST_CASE("construction handle") {
  divavg_spectrum* s = nullptr;
  REQUIRE(divavg_spectrum_create(R"({"family":"lebesgue"})", &s) == DIVAVG_OK);
  divavg_construction* c = nullptr;
  REQUIRE(divavg_construction_run(s, 4, 10000, &c) == DIVAVG_OK);
  CHECK(divavg_construction_levels(c) == 4);
  std::vector<int64_t> n(4);
  CHECK(divavg_construction_cutoffs(c, n.data(), n.size()) == DIVAVG_OK);
  CHECK(n == std::vector<int64_t>{1, 3, 10, 41});
  CHECK(divavg_construction_window(c) == 41);
  double a = 0.0;
  CHECK(divavg_construction_reflected_inner(c, 5, &a) == DIVAVG_OK);
  CHECK(a == 1.0);
  CHECK(divavg_construction_reflected_inner(c, 41, &a) == DIVAVG_ERR_USAGE);
  std::vector<double> averages(41);
  CHECK(divavg_construction_running_averages(c, 41, averages.data()) == DIVAVG_OK);
  CHECK(averages[2] == doctest::Approx(-1.0 / 3.0));
  double delta = 1.0, involution = 1.0;
  CHECK(divavg_construction_oracle_compare(c, 512, &delta, &involution) == DIVAVG_OK);
  CHECK(delta <= 1e-8);
  CHECK(involution <= 1e-8);
  divavg_construction_free(c);

  divavg_spectrum* ct = nullptr;
  REQUIRE(divavg_spectrum_create(R"({"family":"convolution_truncated","base":4,"factors":3})", &ct) == DIVAVG_OK);
  CHECK(divavg_construction_run(ct, 5, 1000, &c) == DIVAVG_ERR_HORIZON);
  CHECK(divavg_exit_code(DIVAVG_ERR_HORIZON) == 3);
  divavg_spectrum_free(ct);
  divavg_spectrum_free(s);
}

TEST_CASE("commands") {
  divavg_artifacts* out = nullptr;
  REQUIRE(divavg_command_run("construct", R"({"construction":{"K":3},"output":{"dir":"x"}})", &out) == DIVAVG_OK);
  CHECK(divavg_artifacts_exit_code(out) == 0);
  CHECK(std::string(divavg_artifacts_output_dir(out)) == "x");
  bool report = false;
  for (size_t i = 0; i < divavg_artifacts_count(out); ++i) {
    if (std::string(divavg_artifacts_name(out, i)) == "report.json") report = true;
  }
  CHECK(report);
  divavg_artifacts_free(out);

  CHECK(divavg_command_run("construct", R"({"spectrum":{"family":"convolution_truncated","base":4,"factors":3},
      "construction":{"K":5,"max_horizon":1000}})", &out) == DIVAVG_ERR_HORIZON);
  REQUIRE(out != nullptr);
  CHECK(divavg_artifacts_exit_code(out) == 3);
  divavg_artifacts_free(out);

  CHECK(divavg_command_run("construct", R"({"nope":1})", &out) == DIVAVG_ERR_VALIDATION);
  CHECK(divavg_exit_code(DIVAVG_ERR_VALIDATION) == 2);

  char* canonical = nullptr;
  REQUIRE(divavg_config_normalize("{}", &canonical) == DIVAVG_OK);
  char* again = nullptr;
  REQUIRE(divavg_config_normalize(canonical, &again) == DIVAVG_OK);
  CHECK(std::string(canonical) == std::string(again));
  divavg_string_free(canonical);
  divavg_string_free(again);
}
