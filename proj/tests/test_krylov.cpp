#include <doctest.h>

#include <cmath>

#include "divavg/errors.hpp"
#include "divavg/krylov.hpp"
#include "divavg/oracle.hpp"
#include "oracles.hpp"

using namespace divavg;

namespace {

std::function<double(std::int64_t)> as_function(const CorrelationSequence& seq) {
  return [&seq](std::int64_t lag) { return seq(lag); };
}

}  // namespace

TEST_CASE("lebesgue ladder is the identity") {
  GramLadder ladder{CorrelationSequence(Lebesgue{})};
  ladder.extend(8);
  CHECK(ladder.jitter() == 0.0);
  for (std::int64_t i = 0; i < 8; ++i) {
    for (std::int64_t j = 0; j <= i; ++j) CHECK(ladder.factor_entry(i, j) == (i == j ? 1.0 : 0.0));
  }
  const auto y = ladder.projection_coords(4, 2);
  REQUIRE(y.size() == 4);
  CHECK(y == std::vector<double>{0.0, 0.0, 1.0, 0.0});
  CHECK(ladder.projection_coords(4, 9) == std::vector<double>(4, 0.0));
}

TEST_CASE("extend matches a fresh factorization") {
  CorrelationSequence seq(Arc{0.5});
  GramLadder grown(seq), fresh(seq);
  grown.extend(4);
  grown.extend(8);
  fresh.extend(8);
  REQUIRE(grown.jitter() == fresh.jitter());
  for (std::int64_t i = 0; i < 8; ++i) {
    for (std::int64_t j = 0; j <= i; ++j) CHECK(std::abs(grown.factor_entry(i, j) - fresh.factor_entry(i, j)) < 1e-10);
  }
  // Independent textbook Cholesky of the same shifted window.
  const auto l = oracle::cholesky(oracle::toeplitz(as_function(seq), 8, fresh.jitter()));
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j <= i; ++j) CHECK(std::abs(fresh.factor_entry(i, j) - static_cast<double>(l[i][j])) < 1e-10);
  }
  CHECK(fresh.reconstruction_error() <= 1e-8 * 8);
}

TEST_CASE("pure append keeps earlier rows") {
  GramLadder ladder{CorrelationSequence(Arc{2.5})};
  ladder.extend(6);
  const double jitter = ladder.jitter();
  std::vector<double> before;
  for (std::int64_t j = 0; j <= 5; ++j) before.push_back(ladder.factor_entry(5, j));
  const auto result = ladder.extend(12);
  if (ladder.jitter() == jitter) {
    CHECK_FALSE(result.refactored);
    for (std::int64_t j = 0; j <= 5; ++j) CHECK(ladder.factor_entry(5, j) == before[static_cast<std::size_t>(j)]);
  } else {
    CHECK(result.refactored);
  }
}

TEST_CASE("degenerate window engages jitter") {
  GramLadder ladder{CorrelationSequence(CorrelationTable{{1.0, 1.0}})};
  ladder.extend(2);
  CHECK(ladder.jitter() > 0.0);
  CHECK(ladder.jitter() <= ladder.options().jitter_cap);
  REQUIRE_FALSE(ladder.window_diagnostics().empty());
  CHECK(ladder.window_diagnostics().back().attempts > 1);
}

TEST_CASE("indefinite window names the leading minor") {
  GramLadder ladder{CorrelationSequence(CorrelationTable{{1.0, 1.2}})};
  try {
    ladder.extend(4);
    FAIL("expected NonPsdError");
  } catch (const NonPsdError& e) {
    CHECK(e.leading_minor() == 2);
    CHECK(e.pivot() < 0.0);
  }
}

TEST_CASE("projection norms against a dense solve") {
  CorrelationSequence seq(Arc{0.5});
  GramLadder ladder(seq);
  ladder.extend(16);
  ladder.set_cutoffs({1, 8, 16});
  const double jitter = ladder.jitter();

  SUBCASE("window 8, index 12") {
    const auto y = ladder.projection_coords(8, 12);
    double norm = 0.0;
    for (double v : y) norm += v * v;
    CHECK(std::abs(norm - oracle::projection_norm_sq(as_function(seq), 8, 12, jitter)) < 1e-9);
  }
  SUBCASE("level with n_k = 8 at index 20") {
    CHECK(std::abs(ladder.projection_norm_sq(2, 20) - oracle::projection_norm_sq(as_function(seq), 8, 20, jitter)) < 1e-9);
  }
  SUBCASE("every index up to 64 on every window") {
    for (int k = 1; k <= 3; ++k) {
      const std::int64_t n = ladder.cutoffs()[static_cast<std::size_t>(k - 1)];
      for (std::int64_t i = 0; i < 64; ++i) {
        CAPTURE(k);
        CAPTURE(i);
        CHECK(std::abs(ladder.projection_norm_sq(k, i) - oracle::projection_norm_sq(as_function(seq), n, i, jitter)) <
              1e-9);
      }
    }
  }
  SUBCASE("library dense solve agrees with the test oracle") {
    const std::vector<std::int64_t> idx{0, 3, 15, 40};
    const auto lib = dense_projection_norms(seq, TimeSequence{}, 16, idx, jitter);
    for (std::size_t m = 0; m < idx.size(); ++m) {
      CHECK(std::abs(lib[m] - oracle::projection_norm_sq(as_function(seq), 16, idx[m], jitter)) < 1e-10);
    }
  }
  CHECK_THROWS_AS(ladder.projection_coords(17, 0), UsageError);
}

TEST_CASE("lebesgue projection levels") {
  GramLadder ladder{CorrelationSequence(Lebesgue{})};
  ladder.extend(10);
  ladder.set_cutoffs({1, 3, 10});
  CHECK(ladder.projection_norm_sq(2, 1) == 1.0);
  CHECK(ladder.projection_norm_sq(2, 5) == 0.0);

  const auto profile = ladder.block_profile(2);
  CHECK(profile.q == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("block profile invariants") {
  CorrelationSequence seq(Arc{0.5});
  GramLadder ladder(seq);
  ladder.extend(16);
  ladder.set_cutoffs({1, 4, 16});

  SUBCASE("xi lies in the first block") {
    const auto p = ladder.block_profile(0);
    CHECK(p.q[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(p.q[1]) < 1e-12);
    CHECK(std::abs(p.q[2]) < 1e-12);
  }
  SUBCASE("matches explicit Q_k matrices") {
    const auto dense = dense_oracle(seq, TimeSequence{}, std::vector<std::int64_t>{1, 4, 16}, ladder.jitter());
    const auto slab = oracle::reflection(as_function(seq), {1, 4, 16}, ladder.jitter());
    const auto p = ladder.block_profile(10);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(p.q[k] - dense.q[k][10]) < 1e-8);
      CHECK(std::abs(p.q[k] - slab.q(k, 10)) < 1e-8);
    }
  }
  SUBCASE("monotone, exact inside windows, complete") {
    for (std::int64_t i = 0; i < 64; ++i) {
      const auto prof = ladder.block_profile(i);
      double total = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        total += prof.q[k];
        CHECK(prof.q[k] >= 0.0);
        if (k > 0) CHECK(prof.p[k - 1] <= prof.p[k] + 1e-8);
        if (i < ladder.cutoffs()[k]) CHECK(std::abs(prof.p[k] - 1.0) <= 1e-8);
      }
      CHECK(std::abs(total - prof.p[2]) < 1e-12);
      if (i < 16) CHECK(std::abs(total - 1.0) <= 1e-8);
    }
  }
}

TEST_CASE("banded lebesgue factor stays cheap") {
  GramLadder ladder{CorrelationSequence(Lebesgue{})};
  ladder.extend(5000);
  CHECK(ladder.size() == 5000);
  CHECK(ladder.reconstruction_error() == 0.0);
}
