#include "divavg/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "divavg/errors.hpp"

namespace divavg {

namespace {

using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

double max_abs(const MatrixXld& m) { return m.size() == 0 ? 0.0 : static_cast<double>(m.cwiseAbs().maxCoeff()); }

}  // namespace

OracleResult dense_oracle(const CorrelationSequence& seq, const TimeSequence& times,
                          std::span<const std::int64_t> cutoffs, double jitter, std::int64_t cap) {
  if (cutoffs.empty()) throw UsageError("dense_oracle: no cutoffs");
  const std::int64_t window = cutoffs.back();
  if (window > cap) {
    throw UsageError("dense_oracle: window " + std::to_string(window) + " exceeds cap " + std::to_string(cap));
  }
  const auto n = static_cast<Eigen::Index>(window);
  const long double norm = 1.0L + static_cast<long double>(jitter);

  MatrixXld gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      long double g = seq(times(i) - times(j));
      if (i == j) g += jitter;
      gram(i, j) = gram(j, i) = g;
    }
  }
  Eigen::LLT<MatrixXld> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("dense_oracle: Gram window is not positive definite");
  // Row i of X holds the coordinates of U^{t(i)} xi.
  const MatrixXld x = llt.matrixL();

  OracleResult out;
  out.window = window;
  out.levels = static_cast<int>(cutoffs.size());
  out.jitter = jitter;

  std::vector<MatrixXld> blocks;  // Q_k
  MatrixXld previous = MatrixXld::Zero(n, n);
  for (const std::int64_t nk : cutoffs) {
    const auto cols = static_cast<Eigen::Index>(nk);
    // P_k projects onto the span of the first n_k orbit vectors (columns of X^T).
    Eigen::HouseholderQR<MatrixXld> qr(x.topRows(cols).transpose());
    const MatrixXld basis = qr.householderQ() * MatrixXld::Identity(n, cols);
    MatrixXld projector = basis * basis.transpose();
    blocks.push_back(projector - previous);
    previous = std::move(projector);
  }

  MatrixXld w = MatrixXld::Identity(n, n);
  for (std::size_t k = 1; k < blocks.size(); k += 2) w -= 2.0L * blocks[k];

  const MatrixXld identity = MatrixXld::Identity(n, n);
  out.involution_error = max_abs(w * w - identity);
  out.symmetry_error = max_abs(w - w.transpose());
  for (const auto& qk : blocks) out.commutation_error = std::max(out.commutation_error, max_abs(w * qk - qk * w));

  const MatrixXld reflected = w * x.transpose();  // columns: W U^{t(j)} xi = V^{t(j)} xi
  const MatrixXld cross = x * reflected / norm;
  const MatrixXld reflected_gram = reflected.transpose() * reflected / norm;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double err = std::abs(static_cast<double>(reflected_gram(i, j)) - seq(times(i) - times(j)));
      out.isometry_error = std::max(out.isometry_error, err);
    }
  }

  out.a.resize(static_cast<std::size_t>(n));
  out.cross.resize(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    out.a[static_cast<std::size_t>(i)] = static_cast<double>(cross(i, i));
    for (Eigen::Index j = 0; j < n; ++j) out.cross[static_cast<std::size_t>(i * n + j)] = static_cast<double>(cross(i, j));
  }

  out.q.assign(blocks.size(), std::vector<double>(static_cast<std::size_t>(n)));
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const MatrixXld qx = blocks[k] * x.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      out.q[k][static_cast<std::size_t>(i)] = static_cast<double>(x.row(i).dot(qx.col(i)) / norm);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    long double total = 0.0L;
    for (const auto& qk : out.q) total += qk[static_cast<std::size_t>(i)];
    out.completeness_error = std::max(out.completeness_error, static_cast<double>(std::abs(total - 1.0L)));
  }
  return out;
}

std::vector<double> dense_projection_norms(const CorrelationSequence& seq, const TimeSequence& times,
                                           std::int64_t window, std::span<const std::int64_t> indices,
                                           double jitter) {
  if (window < 1) throw UsageError("dense_projection_norms: window must be >= 1");
  const auto n = static_cast<Eigen::Index>(window);
  MatrixXld gram(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) gram(a, b) = seq(times(a) - times(b)) + (a == b ? jitter : 0.0L);
  }
  const Eigen::PartialPivLU<MatrixXld> lu(gram);
  std::vector<double> out;
  out.reserve(indices.size());
  Eigen::Matrix<long double, Eigen::Dynamic, 1> c(n);
  for (const std::int64_t i : indices) {
    for (Eigen::Index a = 0; a < n; ++a) c(a) = seq(times(i) - times(a)) + (times(i) == times(a) ? jitter : 0.0L);
    const Eigen::Matrix<long double, Eigen::Dynamic, 1> x = lu.solve(c);
    out.push_back(static_cast<double>(c.dot(x) / (1.0L + static_cast<long double>(jitter))));
  }
  return out;
}

OracleComparison compare_with_oracle(const Construction& construction, std::int64_t cap) {
  const auto& all = construction.cutoffs().n;
  std::size_t levels = 0;
  while (levels < all.size() && all[levels] <= cap) ++levels;
  if (levels == 0) throw UsageError("compare_with_oracle: first cutoff exceeds cap");

  const std::span<const std::int64_t> prefix(all.data(), levels);
  OracleComparison cmp;
  cmp.oracle = dense_oracle(construction.ladder().sequence(), construction.cutoffs().times, prefix,
                            construction.ladder().jitter(), cap);
  const std::int64_t n = cmp.oracle.window;
  for (std::int64_t i = 0; i < n; ++i) {
    cmp.max_delta_a =
        std::max(cmp.max_delta_a, std::abs(construction.reflected_inner(i) - cmp.oracle.a[static_cast<std::size_t>(i)]));
    const auto profile = construction.ladder().block_profile(i);
    for (std::size_t k = 0; k < levels; ++k) {
      cmp.max_delta_q = std::max(cmp.max_delta_q, std::abs(profile.q[k] - cmp.oracle.q[k][static_cast<std::size_t>(i)]));
    }
    for (std::int64_t j = 0; j < n; ++j) {
      cmp.max_delta_cross =
          std::max(cmp.max_delta_cross, std::abs(construction.cross_inner(i, j) - cmp.oracle.cross_at(i, j)));
    }
  }
  return cmp;
}

}  // namespace divavg
