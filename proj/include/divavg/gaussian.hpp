#pragma once

// Gaussian lift of the construction. On the first chaos, inner products are
// covariances, so the two stationary processes X_i = f(S^i x), Y_i = f(T^i x)
// have the joint law N(0, Sigma) with
//   Sigma_XX = Sigma_YY = [r(t(i) - t(j))],   Sigma_XY = [<U^i xi, V^j xi>],
// and E[(1/n) sum X_i Y_i] is exactly the running average A(n). When the ladder
// carries a diagonal jitter lambda, r is replaced by (r + lambda [lag == 0]) / (1 + lambda)
// in every block; this moves entries by at most lambda and keeps Sigma PSD.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "divavg/construction.hpp"

namespace divavg {

struct JointCovariance {
  std::int64_t n = 0;
  Eigen::MatrixXd sigma;   // 2n x 2n, X block first
  Eigen::MatrixXd factor;  // lower factor of sigma + psd_jitter I
  double psd_jitter = 0.0;
  double min_eigenvalue = 0.0;  // of sigma, before jitter
};

/// Assembles Sigma for the first n times and factors it, adding diagonal
/// jitter 1e-12, 1e-11, ... up to jitter_cap if needed. Throws NumericalError
/// beyond the cap.
JointCovariance build_joint_covariance(const Construction& construction, std::int64_t n, double jitter_cap = 1e-6);

struct SimulationConfig {
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  /// Clamp levels M; each yields an estimate from the same samples.
  std::vector<double> truncations;
  std::int64_t block_size = 4096;
  unsigned threads = 0;
};

struct MomentEstimate {
  double expected = 0.0;
  double estimate = 0.0;
  double standard_error = 0.0;
  double z = 0.0;
};

struct TruncationEstimate {
  double level = 0.0;
  double estimate = 0.0;
  double standard_error = 0.0;
  double bias = 0.0;  // truncated minus untruncated, same samples
};

struct EstimateReport {
  std::int64_t n = 0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  double psd_jitter = 0.0;
  /// (1/n) sum X_i Y_i against A(n).
  MomentEstimate average;
  std::vector<TruncationEstimate> truncated;  // one per configured level
  /// Lag-one covariances of each marginal against r(t(1)).
  std::optional<MomentEstimate> lag1_x;
  std::optional<MomentEstimate> lag1_y;
  /// E[X_i Y_0] against r(t(i)).
  std::vector<MomentEstimate> cross_identification;
  /// E[X_i Y_i] against a(i).
  std::vector<MomentEstimate> diagonal;

  /// |z| <= 4 for the main estimate.
  bool pass(double z_limit = 4.0) const { return std::abs(average.z) <= z_limit; }
};

/// Standard normal pairs from a seeded 64-bit Mersenne Twister via Box-Muller;
/// the stream is fully specified, so draws are reproducible across platforms.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed);
  double next();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Seed of sampling block b: splitmix64 of seed + b * 0x9E3779B97F4A7C15.
std::uint64_t block_seed(std::uint64_t seed, std::uint64_t block);

/// Monte-Carlo estimate of the double averages. Samples are drawn in fixed
/// blocks with derived seeds and reduced in block order, so the result does
/// not depend on the thread count.
EstimateReport sample_and_estimate(const JointCovariance& cov, const SimulationConfig& config);

}  // namespace divavg
