#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "divavg/errors.hpp"
#include "divavg/spectral.hpp"
#include "oracles.hpp"

using namespace divavg;

TEST_CASE("lebesgue correlations are a delta") {
  CorrelationSequence r(Lebesgue{});
  CHECK(r(0) == 1.0);
  CHECK(r(7) == 0.0);
  CHECK(r(-3) == 0.0);
  CHECK(correlation_support(Lebesgue{}) == std::int64_t{0});
}

TEST_CASE("arc closed form agrees with quadrature") {
  CorrelationSequence r(Arc{0.5});
  const double expected = oracle::arc_quadrature(0.5, 2, 10000);
  CHECK(expected == doctest::Approx(0.841471).epsilon(1e-6));
  CHECK(std::abs(r(2) - expected) < 1e-8);
  CHECK(r(2) == doctest::Approx(std::sin(1.0)));
  for (std::int64_t i : {1, 5, 17, 64}) CHECK(std::abs(r(i) - oracle::arc_quadrature(0.5, i, 20000)) < 1e-7);
  CHECK(r(-2) == r(2));
}

TEST_CASE("convolution truncated product formula") {
  CorrelationSequence r(ConvolutionTruncated{4, 3});
  auto direct = [](std::int64_t i) {
    double p = 1.0;
    for (int j = 1; j <= 3; ++j) p *= std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / std::pow(4.0, j));
    return p;
  };
  CHECK(std::abs(r(16)) < 1e-15);
  for (std::int64_t i = 0; i < 40; ++i) CHECK(std::abs(r(i) - direct(i)) < 1e-12);
  // Integer reduction makes the rigid lags exact.
  CHECK(r(64) == 1.0);
  CHECK(r(4096) == 1.0);
  CHECK(validity_horizon(ConvolutionTruncated{4, 3}) == std::int64_t{16});
  CHECK_FALSE(is_atomless(ConvolutionTruncated{4, 3}));
}

TEST_CASE("mixture is the weighted sum") {
  Mixture m{{0.25, 0.75}, {Arc{0.5}, Lebesgue{}}};
  CorrelationSequence r(m), a(Arc{0.5});
  CHECK(r(0) == doctest::Approx(1.0));
  CHECK(r(3) == doctest::Approx(0.25 * a(3)));
  CHECK(is_atomless(m));
}

TEST_CASE("quadrature density reproduces the arc family") {
  // Uniform density on [-0.5, 0.5], sampled finely enough that interpolation is exact inside.
  QuadratureDensity q;
  for (int k = 0; k <= 200; ++k) {
    const double t = -std::numbers::pi + 2.0 * std::numbers::pi * k / 200.0;
    q.theta.push_back(t);
    q.density.push_back(std::abs(t) <= 0.5 ? 1.0 : 0.0);
  }
  q.nodes = 1 << 16;
  CorrelationSequence r(q);
  CHECK(r(0) == doctest::Approx(1.0).epsilon(1e-12));
  // The table edges are ramps over one grid step, so only rough agreement.
  CHECK(std::abs(r(2) - std::sin(1.0)) < 2e-2);

  // Doubling M on a smooth density changes nothing visible.
  QuadratureDensity smooth;
  for (int k = 0; k <= 400; ++k) {
    const double t = -std::numbers::pi + 2.0 * std::numbers::pi * k / 400.0;
    smooth.theta.push_back(t);
    smooth.density.push_back(1.0 + 0.5 * std::cos(t));
  }
  smooth.nodes = 4096;
  auto doubled = smooth;
  doubled.nodes = 8192;
  CorrelationSequence s1(smooth), s2(doubled);
  for (std::int64_t i = 0; i <= 256; ++i) CHECK(std::abs(s1(i) - s2(i)) < 1e-6);
  CHECK(s1(1) == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("density csv loader") {
  const auto path = std::filesystem::temp_directory_path() / "divavg_density_test.csv";
  {
    std::ofstream out(path);
    out << "theta,density\n0,1\n1.5,1\n3.14159,1\n";
  }
  const auto q = load_density_csv(path.string(), 2048);
  CHECK(q.theta.size() == 3);
  CHECK(q.source == path.string());
  CorrelationSequence r(q);
  CHECK(r(0) == doctest::Approx(1.0));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_density_csv("/nonexistent/density.csv", 64), ValidationError);
}

TEST_CASE("family validation") {
  CHECK_THROWS_AS(validate(Arc{0.0}), ValidationError);
  CHECK_THROWS_AS(validate(Arc{4.0}), ValidationError);
  CHECK_NOTHROW(validate(Arc{std::numbers::pi}));
  CHECK_THROWS_AS(validate(ConvolutionTruncated{1, 3}), ValidationError);
  CHECK_THROWS_AS(validate(ConvolutionTruncated{4, 0}), ValidationError);
  CHECK_THROWS_AS(validate(Mixture{{0.5, 0.4}, {Lebesgue{}, Arc{0.5}}}), ValidationError);
  CHECK_THROWS_AS(validate(CorrelationTable{{0.5, 0.1}}), ValidationError);
}

TEST_CASE("validate_psd") {
  SUBCASE("lebesgue window is the identity") {
    const auto rep = validate_psd(CorrelationSequence(Lebesgue{}), 64);
    CHECK(rep.ok);
    CHECK(rep.min_eigenvalue_estimate == 1.0);
  }
  SUBCASE("arc windows are PSD") {
    CorrelationSequence r(Arc{0.5});
    for (std::int64_t n : {32, 64, 256}) {
      const auto rep = validate_psd(r, n);
      CHECK(rep.ok);
      CHECK(rep.min_eigenvalue_estimate >= -psd_tolerance(n));
    }
  }
  SUBCASE("every family passes up to N = 1024") {
    for (const SpectrumFamily& f : {SpectrumFamily(Arc{1.0}), SpectrumFamily(Arc{std::numbers::pi}),
                                    SpectrumFamily(ConvolutionTruncated{4, 3}),
                                    SpectrumFamily(Mixture{{0.5, 0.5}, {Arc{0.2}, ConvolutionTruncated{3, 4}}})}) {
      CAPTURE(family_name(f));
      CHECK(validate_psd(CorrelationSequence(f), 1024).ok);
    }
  }
  SUBCASE("r(1) = 1.2 fails at the second minor") {
    const auto rep = validate_psd(CorrelationSequence(CorrelationTable{{1.0, 1.2}}), 8);
    CHECK_FALSE(rep.ok);
    REQUIRE(rep.failing_minor.has_value());
    CHECK(*rep.failing_minor == 2);
    CHECK(rep.min_eigenvalue_estimate == doctest::Approx(1.0 - 1.44));
  }
  SUBCASE("degenerate rank-one window is PSD with a dependent column") {
    const auto rep = validate_psd(CorrelationSequence(CorrelationTable{{1.0, 1.0}}), 2);
    CHECK(rep.ok);
    CHECK(rep.dependent_columns == 1);
  }
}

TEST_CASE("wiener averages") {
  CHECK(wiener_average(CorrelationSequence(Lebesgue{}), 10) == doctest::Approx(0.1));
  for (double eps : {0.1, 0.5, 1.0, 2.0}) {
    CorrelationSequence r(Arc{eps});
    CAPTURE(eps);
    CHECK(wiener_average(r, 1000) < wiener_average(r, 100));
    CHECK(wiener_average(r, 100) < wiener_average(r, 10));
  }
  // Atomic truncation: 2^J atoms at distinct (mod symmetry) angles leave a plateau of about 2^-J.
  const double plateau = wiener_average(CorrelationSequence(ConvolutionTruncated{4, 8}), 1000000);
  CHECK(plateau == doctest::Approx(std::ldexp(1.0, -8)).epsilon(0.05));
}

TEST_CASE("rigidity defects") {
  CorrelationSequence leb(Lebesgue{});
  CHECK(rigidity_defect(leb, 5) == 2.0);
  CHECK(system_rigidity_defect(leb, 5) == 2.0);
  CHECK(system_rigidity_defect_from_correlation(1.0) == 0.0);
  CHECK(system_rigidity_defect_from_correlation(0.0) == 2.0);
  for (int J : {1, 2, 3, 5}) {
    CorrelationSequence r(ConvolutionTruncated{4, J});
    std::int64_t q = 1;
    for (int m = 1; m <= J + 4; ++m) {
      q *= 4;
      if (m < J) continue;
      CAPTURE(J);
      CAPTURE(q);
      CHECK(rigidity_defect(r, q) == 0.0);
      CHECK(system_rigidity_defect(r, q) == 0.0);
    }
  }
  CorrelationSequence arc(Arc{0.5});
  for (std::int64_t q1 = 1; q1 < 30; ++q1) {
    for (std::int64_t q2 = 1; q2 < 30; ++q2) {
      if (arc(q1) > arc(q2)) CHECK(rigidity_defect(arc, q1) <= rigidity_defect(arc, q2));
    }
    CHECK(system_rigidity_defect(arc, q1) >= 0.0);
  }
  CHECK_THROWS_AS(rigidity_defect(arc, 0), UsageError);
}

TEST_CASE("correlation cache is read-only for readers") {
  CorrelationSequence r(Arc{0.7});
  const double before = r(500);
  r.prefetch(1000);
  CHECK(r.cached_lags() >= 1001);
  CHECK(r(500) == before);
}
