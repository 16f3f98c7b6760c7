#pragma once

// Reference computations written independently of the library: closed forms,
// brute-force quadrature and textbook dense linear algebra.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<long double>>;

// Lebesgue: sqrt(p_k(i)) is the indicator of i < n_k, so the minimal n with
// (1/n) * n_k < 1/(k+1) is (k+1) n_k + 1. a(i) is +1 on odd blocks and -1 on
// even ones; A(n_k) is an exact fraction.
struct Fraction {
  std::int64_t num = 0, den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline std::vector<std::int64_t> lebesgue_cutoffs(int levels) {
  std::vector<std::int64_t> n{1};
  for (int k = 1; k < levels; ++k) n.push_back((k + 1) * n.back() + 1);
  return n;
}

inline std::vector<Fraction> lebesgue_peaks(int levels) {
  const auto n = lebesgue_cutoffs(levels);
  std::vector<Fraction> out;
  std::int64_t sum = 0, previous = 0;
  for (int k = 0; k < levels; ++k) {
    const std::int64_t sign = k % 2 == 0 ? 1 : -1;
    sum += sign * (n[static_cast<std::size_t>(k)] - previous);
    previous = n[static_cast<std::size_t>(k)];
    out.push_back({sum, previous});
  }
  return out;
}

// Composite midpoint rule for the uniform density 1/(2 eps) on [-eps, eps].
inline double arc_quadrature(double epsilon, std::int64_t lag, std::int64_t nodes) {
  long double sum = 0.0L;
  const long double h = 2.0L * epsilon / nodes;
  for (std::int64_t m = 0; m < nodes; ++m) {
    sum += std::cos(static_cast<long double>(lag) * (-epsilon + (m + 0.5L) * h));
  }
  return static_cast<double>(sum / nodes);
}

inline Matrix toeplitz(const std::function<double(std::int64_t)>& r, std::int64_t n, double shift = 0.0) {
  Matrix g(static_cast<std::size_t>(n), std::vector<long double>(static_cast<std::size_t>(n)));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) g[i][j] = r(i - j) + (i == j ? shift : 0.0);
  }
  return g;
}

// Gaussian elimination with partial pivoting.
inline std::vector<long double> solve(Matrix a, std::vector<long double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    if (a[c][c] == 0.0L) throw std::runtime_error("singular");
    for (std::size_t r = c + 1; r < n; ++r) {
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<long double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    long double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

// c^T G^{-1} c, c_j = r(i - j) (+ shift when i == j), normalized by 1 + shift.
inline double projection_norm_sq(const std::function<double(std::int64_t)>& r, std::int64_t window, std::int64_t i,
                                 double shift = 0.0) {
  std::vector<long double> c(static_cast<std::size_t>(window));
  for (std::int64_t j = 0; j < window; ++j) c[j] = r(i - j) + (i == j ? shift : 0.0);
  const auto x = solve(toeplitz(r, window, shift), c);
  long double s = 0.0L;
  for (std::size_t j = 0; j < c.size(); ++j) s += c[j] * x[j];
  return static_cast<double>(s / (1.0L + shift));
}

// Cholesky-Banachiewicz, lower factor.
inline Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.size();
  Matrix l(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      long double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (s <= 0.0L) throw std::runtime_error("not positive definite");
        l[i][i] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  return l;
}

// Explicit reflected geometry on a window: vectors are rows of the Cholesky
// factor, P_k keeps the first n_k coordinates (rows of L are nested), and
// W flips the coordinates of even blocks.
struct Reflection {
  Matrix x;                      // row i: coordinates of U^i xi
  std::vector<int> sign;         // W as a diagonal of +-1
  std::vector<std::size_t> block;  // block index of each coordinate
  long double norm = 1.0L;

  double inner(std::size_t i, std::size_t j) const {  // <U^i xi, W U^j xi>
    long double s = 0.0L;
    for (std::size_t m = 0; m < x.size(); ++m) s += x[i][m] * sign[m] * x[j][m];
    return static_cast<double>(s / norm);
  }
  double q(std::size_t k, std::size_t i) const {  // ||Q_{k+1} U^i xi||^2
    long double s = 0.0L;
    for (std::size_t m = 0; m < x.size(); ++m) {
      if (block[m] == k) s += x[i][m] * x[i][m];
    }
    return static_cast<double>(s / norm);
  }
};

inline Reflection reflection(const std::function<double(std::int64_t)>& r, const std::vector<std::int64_t>& cutoffs,
                             double shift = 0.0) {
  Reflection out;
  const std::int64_t n = cutoffs.back();
  out.x = cholesky(toeplitz(r, n, shift));
  out.norm = 1.0L + shift;
  for (std::int64_t m = 0, k = 0; m < n; ++m) {
    while (m >= cutoffs[static_cast<std::size_t>(k)]) ++k;
    out.block.push_back(static_cast<std::size_t>(k));
    out.sign.push_back(k % 2 == 1 ? -1 : 1);
  }
  return out;
}

}  // namespace oracle
