#include "divavg/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "divavg/errors.hpp"
#include "parallel.hpp"

namespace divavg {

namespace {

struct Welford {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const Welford& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const auto total = count + other.count;
    const double delta = other.mean - mean;
    mean += delta * static_cast<double>(other.count) / static_cast<double>(total);
    m2 += other.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(other.count) /
                         static_cast<double>(total);
    count = total;
  }

  double standard_error() const {
    if (count < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(m2 / static_cast<double>(count - 1) / static_cast<double>(count));
  }
};

MomentEstimate summarize(const Welford& w, double expected) {
  MomentEstimate m;
  m.expected = expected;
  m.estimate = w.mean;
  m.standard_error = w.standard_error();
  const double diff = m.estimate - expected;
  if (m.standard_error > 0.0) {
    m.z = diff / m.standard_error;
  } else {
    m.z = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
  return m;
}

// Layout of the per-block accumulators.
struct Slots {
  std::size_t average = 0, lag1_x = 1, lag1_y = 2, cross = 3, diagonal, truncated, total;
  Slots(std::int64_t n, std::size_t levels)
      : diagonal(cross + static_cast<std::size_t>(n)),
        truncated(diagonal + static_cast<std::size_t>(n)),
        total(truncated + levels) {}
};

}  // namespace

NormalStream::NormalStream(std::uint64_t seed) : engine_(seed) {}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 53-bit uniforms; u1 in (0, 1] keeps the logarithm finite.
  constexpr double scale = 1.0 / 9007199254740992.0;
  const double u1 = static_cast<double>((engine_() >> 11) + 1) * scale;
  const double u2 = static_cast<double>(engine_() >> 11) * scale;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t block_seed(std::uint64_t seed, std::uint64_t block) {
  std::uint64_t z = seed + (block + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

JointCovariance build_joint_covariance(const Construction& construction, std::int64_t n, double jitter_cap) {
  if (n < 1) throw UsageError("build_joint_covariance: n must be >= 1");
  if (n > construction.window()) {
    throw UsageError("build_joint_covariance: n = " + std::to_string(n) + " exceeds n_K = " +
                     std::to_string(construction.window()));
  }
  const auto& times = construction.cutoffs().times;
  const auto& ladder = construction.ladder();
  const auto m = static_cast<Eigen::Index>(n);

  JointCovariance cov;
  cov.n = n;
  cov.sigma.resize(2 * m, 2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      // Same shifted geometry as the cross block, so Sigma stays an exact Gram matrix.
      const double r = ladder.regularized_correlation(times(i) - times(j));
      cov.sigma(i, j) = r;
      cov.sigma(m + i, m + j) = r;
      const double c = construction.cross_inner(i, j);
      cov.sigma(i, m + j) = c;
      cov.sigma(m + j, i) = c;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.sigma, Eigen::EigenvaluesOnly);
  cov.min_eigenvalue = eig.eigenvalues().minCoeff();

  double jitter = 0.0;
  for (;;) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov.sigma + jitter * Eigen::MatrixXd::Identity(2 * m, 2 * m));
    if (llt.info() == Eigen::Success) {
      cov.factor = llt.matrixL();
      cov.psd_jitter = jitter;
      return cov;
    }
    if (jitter >= jitter_cap) break;
    jitter = jitter == 0.0 ? 1e-12 : std::min(jitter * 10.0, jitter_cap);
  }
  throw NumericalError("joint covariance is not positive semidefinite within jitter " + std::to_string(jitter_cap) +
                       " (min eigenvalue " + std::to_string(cov.min_eigenvalue) + ")");
}

EstimateReport sample_and_estimate(const JointCovariance& cov, const SimulationConfig& config) {
  if (config.samples < 2) throw ValidationError("simulation: samples must be >= 2");
  if (config.block_size < 1) throw ValidationError("simulation: block_size must be >= 1");
  for (double level : config.truncations) {
    if (!(level > 0.0)) throw ValidationError("simulation: truncation level must be positive");
  }
  const std::int64_t n = cov.n;
  const auto m = static_cast<Eigen::Index>(n);
  const std::size_t levels = config.truncations.size();
  const Slots slots(n, levels);
  const std::size_t width = slots.total;
  const std::int64_t blocks = (config.samples + config.block_size - 1) / config.block_size;
  std::vector<std::vector<Welford>> partial(static_cast<std::size_t>(blocks), std::vector<Welford>(width));

  detail::parallel_for(0, blocks, config.threads, [&](std::int64_t b) {
    auto& acc = partial[static_cast<std::size_t>(b)];
    NormalStream normals(block_seed(config.seed, static_cast<std::uint64_t>(b)));
    const std::int64_t count = std::min(config.block_size, config.samples - b * config.block_size);
    Eigen::VectorXd g(2 * m), z(2 * m);
    std::vector<double> sum_truncated(levels);
    for (std::int64_t s = 0; s < count; ++s) {
      for (Eigen::Index k = 0; k < 2 * m; ++k) g(k) = normals.next();
      z.noalias() = cov.factor.triangularView<Eigen::Lower>() * g;
      const auto x = z.head(m);
      const auto y = z.tail(m);
      double sum = 0.0;
      std::fill(sum_truncated.begin(), sum_truncated.end(), 0.0);
      for (Eigen::Index i = 0; i < m; ++i) {
        const double xy = x(i) * y(i);
        sum += xy;
        for (std::size_t l = 0; l < levels; ++l) {
          const double M = config.truncations[l];
          sum_truncated[l] += std::clamp(x(i), -M, M) * std::clamp(y(i), -M, M);
        }
        acc[slots.cross + static_cast<std::size_t>(i)].add(x(i) * y(0));
        acc[slots.diagonal + static_cast<std::size_t>(i)].add(xy);
      }
      acc[slots.average].add(sum / static_cast<double>(n));
      for (std::size_t l = 0; l < levels; ++l) acc[slots.truncated + l].add(sum_truncated[l] / static_cast<double>(n));
      if (n >= 2) {
        double lx = 0.0, ly = 0.0;
        for (Eigen::Index i = 0; i + 1 < m; ++i) {
          lx += x(i) * x(i + 1);
          ly += y(i) * y(i + 1);
        }
        acc[slots.lag1_x].add(lx / static_cast<double>(n - 1));
        acc[slots.lag1_y].add(ly / static_cast<double>(n - 1));
      }
    }
  });

  std::vector<Welford> total(width);
  for (const auto& block : partial) {
    for (std::size_t k = 0; k < width; ++k) total[k].merge(block[k]);
  }

  EstimateReport report;
  report.n = n;
  report.samples = config.samples;
  report.seed = config.seed;
  report.psd_jitter = cov.psd_jitter;
  double exact = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) exact += cov.sigma(i, m + i);
  exact /= static_cast<double>(n);
  report.average = summarize(total[slots.average], exact);
  for (std::size_t l = 0; l < levels; ++l) {
    TruncationEstimate t;
    t.level = config.truncations[l];
    t.estimate = total[slots.truncated + l].mean;
    t.standard_error = total[slots.truncated + l].standard_error();
    t.bias = t.estimate - report.average.estimate;
    report.truncated.push_back(t);
  }
  if (n >= 2) {
    report.lag1_x = summarize(total[slots.lag1_x], cov.sigma(0, 1));
    report.lag1_y = summarize(total[slots.lag1_y], cov.sigma(m, m + 1));
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    report.cross_identification.push_back(summarize(total[slots.cross + static_cast<std::size_t>(i)], cov.sigma(i, 0)));
    report.diagonal.push_back(summarize(total[slots.diagonal + static_cast<std::size_t>(i)], cov.sigma(i, m + i)));
  }
  return report;
}

}  // namespace divavg
