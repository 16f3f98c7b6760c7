#include <doctest.h>

#include <cmath>

#include "divavg/gaussian.hpp"

using namespace divavg;

namespace {

Construction lebesgue(int levels) {
  SearchOptions options;
  options.levels = levels;
  return Construction::run(CorrelationSequence(Lebesgue{}), {}, options);
}

}  // namespace

TEST_CASE("single time covariance") {
  const auto con = lebesgue(2);
  const auto cov = build_joint_covariance(con, 1);
  CHECK(cov.sigma.rows() == 2);
  CHECK(cov.sigma(0, 0) == 1.0);
  CHECK(cov.sigma(0, 1) == 1.0);
  CHECK(cov.sigma(1, 0) == 1.0);
  CHECK(cov.sigma(1, 1) == 1.0);
  CHECK(cov.psd_jitter > 0.0);  // rank one
  CHECK(cov.psd_jitter <= 1e-6);
}

TEST_CASE("lebesgue cross block is diagonal") {
  const auto con = lebesgue(3);
  const auto cov = build_joint_covariance(con, 3);
  const Eigen::MatrixXd xy = cov.sigma.block(0, 3, 3, 3);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 3);
  expected.diagonal() << 1.0, -1.0, -1.0;
  CHECK((xy - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cov.sigma.block(0, 0, 3, 3) - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cov.min_eigenvalue >= -1e-12);
}

TEST_CASE("normal stream") {
  NormalStream a(7), b(7), c(8);
  double sum = 0.0, sq = 0.0;
  bool differs = false;
  for (int i = 0; i < 20000; ++i) {
    const double x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
    sum += x;
    sq += x * x;
  }
  CHECK(differs);
  CHECK(std::abs(sum / 20000) < 0.05);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);
  CHECK(block_seed(1, 0) != block_seed(1, 1));
  CHECK(block_seed(1, 3) == block_seed(1, 3));
}

TEST_CASE("estimate matches the running average") {
  const auto con = lebesgue(4);
  const auto cov = build_joint_covariance(con, 10);
  SimulationConfig config;
  config.samples = 200000;
  config.seed = 20240917;
  config.truncations = {1.0, 2.0, 4.0, 8.0};
  const auto report = sample_and_estimate(cov, config);
  CHECK(report.average.expected == doctest::Approx(0.6).epsilon(1e-12));  // (1 - 2 + 7) / 10
  CHECK(report.pass());
  CHECK(std::abs(report.average.z) <= 4.0);
  REQUIRE(report.lag1_x);
  CHECK(std::abs(report.lag1_x->z) <= 4.0);
  CHECK(std::abs(report.lag1_y->z) <= 4.0);
  for (const auto& m : report.cross_identification) CHECK(std::abs(m.z) <= 4.0);

  REQUIRE(report.truncated.size() == 4);
  for (std::size_t l = 1; l < 4; ++l) {
    CHECK(std::abs(report.truncated[l].bias) <= std::abs(report.truncated[l - 1].bias) + 1e-12);
  }
  CHECK(std::abs(report.truncated[3].bias) <= 1e-3);

  SUBCASE("bit-identical across thread counts") {
    SimulationConfig other = config;
    other.threads = 3;
    const auto again = sample_and_estimate(cov, other);
    CHECK(again.average.estimate == report.average.estimate);
    CHECK(again.average.standard_error == report.average.standard_error);
  }
  SUBCASE("a different seed gives a different estimate") {
    SimulationConfig other = config;
    other.seed = config.seed + 1;
    CHECK(sample_and_estimate(cov, other).average.estimate != report.average.estimate);
  }
}
