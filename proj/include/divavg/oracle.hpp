#pragma once

// Explicit-matrix cross-check of the construction. Coordinates of the orbit
// vectors come from an independent dense factorization, the projections P_k
// from Householder QR of the orbit blocks, and W is assembled as a dense
// matrix; every inner product is then plain matrix algebra.

#include <cstdint>
#include <span>
#include <vector>

#include "divavg/construction.hpp"

namespace divavg {

struct OracleResult {
  std::int64_t window = 0;
  int levels = 0;
  double jitter = 0.0;
  std::vector<double> a;               // a(i), i < window
  std::vector<double> cross;           // <U^i xi, V^j xi>, row-major window x window
  std::vector<std::vector<double>> q;  // q[k][i] = ||Q_{k+1} U^i xi||^2
  double involution_error = 0.0;       // max |W^2 - I|
  double symmetry_error = 0.0;         // max |W - W^T|
  double commutation_error = 0.0;      // max_k |W Q_k - Q_k W|
  double isometry_error = 0.0;         // max |<V^i xi, V^j xi> - r(i - j)|
  double completeness_error = 0.0;     // max_i |sum_k q_k(i) - 1|

  double cross_at(std::int64_t i, std::int64_t j) const {
    return cross[static_cast<std::size_t>(i * window + j)];
  }
};

/// Builds the oracle for cutoffs with n_K <= cap, in the geometry shifted by
/// `jitter` (the ladder's), i.e. Gram entries r(t(i) - t(j)) + jitter [i == j].
OracleResult dense_oracle(const CorrelationSequence& seq, const TimeSequence& times,
                          std::span<const std::int64_t> cutoffs, double jitter, std::int64_t cap = 512);

/// ||P_N U^{t(i)} xi||^2 = c^T G^{-1} c with c_j = r(t(i) - t(j)) for each
/// requested i, from one explicit dense LU of G in the same shifted geometry.
std::vector<double> dense_projection_norms(const CorrelationSequence& seq, const TimeSequence& times,
                                           std::int64_t window, std::span<const std::int64_t> indices,
                                           double jitter = 0.0);

struct OracleComparison {
  OracleResult oracle;
  double max_delta_a = 0.0;
  double max_delta_cross = 0.0;
  double max_delta_q = 0.0;
};

/// Runs the oracle on the longest prefix of the construction's cutoffs whose
/// last window fits under cap and compares every a(i), cross_inner(i, j) and
/// q_k(i) inside that window. Throws UsageError when even n_1 exceeds cap.
OracleComparison compare_with_oracle(const Construction& construction, std::int64_t cap = 512);

}  // namespace divavg
