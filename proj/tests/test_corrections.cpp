#include <algorithm>
#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "maxrank/corrections.hpp"
#include "maxrank/matrix.hpp"
#include "maxrank/rank.hpp"
#include "maxrank/rng.hpp"
#include "maxrank/simulation.hpp"

using namespace maxrank;

namespace {

ScoreMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  ScoreMatrix s(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[0].size(); ++k) s(i, k) = rows[i][k];
  }
  return s;
}

ScoreMatrix random_matrix(std::size_t n, std::size_t m, SplitMix64& rng) {
  ScoreMatrix s(n, m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i) s(i, k) = rng.uniform01() * 20 - 10;
  }
  return s;
}

// Independent check: smallest rank t such that at least
// quantile_index(n, alpha) rows have all per-test ranks <= t.
std::int64_t counting_oracle(const RankMatrix& r, double alpha) {
  const auto n = static_cast<std::int64_t>(r.rows());
  const std::int64_t target = quantile_index(n, alpha).index;
  for (std::int64_t t = 1; t <= n; ++t) {
    std::int64_t count = 0;
    for (std::size_t i = 0; i < r.rows(); ++i) {
      bool all = true;
      for (std::size_t k = 0; k < r.cols(); ++k) {
        if (r(i, k) > t) { all = false; break; }
      }
      if (all) ++count;
    }
    if (count >= target) return t;
  }
  return n;
}

}  // namespace

TEST_CASE("max_rank_correct on the hand-enumerated 4x2 example") {
  // Scores chosen so the rank matrix is [[1,2],[2,1],[3,4],[4,3]];
  // row maxima are [2,2,4,4].
  const ScoreMatrix s = from_rows({{10, 21}, {12, 19}, {14, 27}, {16, 25}});
  const RankMatrix r = column_ranks(s, 0);
  REQUIRE(r(0, 0) == 1);
  REQUIRE(r(0, 1) == 2);
  REQUIRE(r(3, 0) == 4);
  REQUIRE(r(3, 1) == 3);

  const auto rmax = row_max_ranks(r);
  CHECK(rmax == std::vector<std::int32_t>{2, 2, 4, 4});

  const auto res = max_rank_correct(r, s, 0.25);
  CHECK(res.method == Method::max_rank);
  CHECK(res.global_rank == 4);           // ceil(5*0.75)=4 -> sorted[4]=4
  CHECK_FALSE(res.clamped);
  CHECK(res.per_test_quantiles[0] == 16.0);  // 4th order statistic per column
  CHECK(res.per_test_quantiles[1] == 27.0);
  CHECK(res.per_test_alpha[0] == Catch::Approx(1.0 - 4.0 / 4.0));
}

TEST_CASE("max-rank with one test equals the uncorrected quantile") {
  SplitMix64 rng(808);
  const ScoreMatrix s = random_matrix(40, 1, rng);
  const RankMatrix r = column_ranks(s, 1);
  const auto mr = max_rank_correct(r, s, 0.1);
  const auto unc = uncorrected(s, 0.1);
  CHECK(mr.global_rank == quantile_index(40, 0.1).index);
  CHECK(mr.global_rank == unc.global_rank);
  CHECK(mr.per_test_quantiles[0] == unc.per_test_quantiles[0]);
  CHECK(mr.per_test_alpha[0] == unc.per_test_alpha[0]);
}

TEST_CASE("perfectly correlated columns reduce to the single-test level") {
  SplitMix64 rng(77);
  const std::size_t n = 25;
  ScoreMatrix s(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = rng.uniform01();
    s(i, 0) = v;
    s(i, 1) = v;
  }
  const RankMatrix r = column_ranks(s, 9);
  for (std::size_t i = 0; i < n; ++i) CHECK(r(i, 0) == r(i, 1));

  const auto res = max_rank_correct(r, s, 0.2);
  CHECK(res.global_rank == quantile_index(n, 0.2).index);
  const auto unc = uncorrected(s, 0.2);
  CHECK(res.per_test_alpha[0] == unc.per_test_alpha[0]);
}

TEST_CASE("bonferroni splits the level across tests") {
  SplitMix64 rng(4);
  const ScoreMatrix s = random_matrix(30, 5, rng);
  const auto res = bonferroni_correct(s, 0.05);
  for (double a : res.per_test_alpha) CHECK(a == Catch::Approx(0.01));
  CHECK(res.global_rank == quantile_index(30, 0.01).index);

  const ScoreMatrix s1 = random_matrix(30, 1, rng);
  CHECK(bonferroni_correct(s1, 0.05).per_test_alpha[0] == Catch::Approx(0.05));
}

TEST_CASE("bonferroni clamps when alpha/m is unreachable") {
  SplitMix64 rng(5);
  const ScoreMatrix s = random_matrix(1000, 100, rng);
  const auto res = bonferroni_correct(s, 0.05);
  // ceil(1001 * 0.9995) = 1001 > 1000
  CHECK(res.global_rank == 1000);
  CHECK(res.clamped);
  for (std::size_t k = 0; k < 100; ++k) {
    const auto col = s.column(k);
    CHECK(res.per_test_quantiles[k] == *std::max_element(col.begin(), col.end()));
  }
}

TEST_CASE("independence-exact solves q^m >= 1-alpha") {
  SplitMix64 rng(6);
  const ScoreMatrix s = random_matrix(50, 5, rng);
  const auto res = independence_exact_correct(s, 0.05);
  // 1 - 0.95^(1/5)
  for (double a : res.per_test_alpha) {
    CHECK(a == Catch::Approx(0.010206218313011495).epsilon(1e-12));
  }
  const ScoreMatrix s1 = random_matrix(50, 1, rng);
  CHECK(independence_exact_correct(s1, 0.05).per_test_alpha[0] ==
        Catch::Approx(0.05));

  // always at least alpha/m
  for (int m = 1; m <= 12; ++m) {
    const ScoreMatrix sm = random_matrix(20, static_cast<std::size_t>(m), rng);
    for (double alpha : {0.01, 0.05, 0.2, 0.5}) {
      const auto ind = independence_exact_correct(sm, alpha);
      CHECK(ind.per_test_alpha[0] >= alpha / m - 1e-15);
    }
  }
}

TEST_CASE("selected ranks order across methods") {
  SplitMix64 rng(31337);

  SECTION("independence <= bonferroni and max-rank <= bonferroni, any data") {
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t n = 3 + rng() % 40;
      const std::size_t m = 1 + rng() % 6;
      const double alpha = std::vector<double>{0.05, 0.1, 0.25, 0.5}[rep % 4];
      const ScoreMatrix s = random_matrix(n, m, rng);
      const RankMatrix r = column_ranks(s, rep);
      const auto mr = max_rank_correct(r, s, alpha);
      const auto ind = independence_exact_correct(s, alpha);
      const auto bon = bonferroni_correct(s, alpha);
      REQUIRE(ind.global_rank <= bon.global_rank);
      REQUIRE(mr.global_rank <= bon.global_rank);
    }
  }

  SECTION("full chain under positive dependence") {
    for (int rep = 0; rep < 200; ++rep) {
      const int n = 20 + static_cast<int>(rng() % 41);
      const int m = 1 + static_cast<int>(rng() % 6);
      const double alpha = (rep % 2 == 0) ? 0.05 : 0.1;
      const double rho = std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}[rep % 5];
      NormalSampler normals(derive_seed(9, {static_cast<std::uint64_t>(rep)}));
      const ScoreMatrix s = sample_equicorrelated(rho, m, n, normals);
      const RankMatrix r = column_ranks(s, rep);
      const auto mr = max_rank_correct(r, s, alpha);
      const auto ind = independence_exact_correct(s, alpha);
      const auto bon = bonferroni_correct(s, alpha);
      REQUIRE(mr.global_rank <= ind.global_rank);
      REQUIRE(ind.global_rank <= bon.global_rank);
    }
  }
}

TEST_CASE("max-rank matches the counting oracle") {
  SplitMix64 rng(271828);
  for (int rep = 0; rep < 150; ++rep) {
    const std::size_t n = 1 + rng() % 8;
    const std::size_t m = 1 + rng() % 3;
    const double alpha = std::vector<double>{0.1, 0.25, 0.5}[rep % 3];
    const ScoreMatrix s = random_matrix(n, m, rng);
    const RankMatrix r = column_ranks(s, rep);
    REQUIRE(max_rank_correct(r, s, alpha).global_rank ==
            counting_oracle(r, alpha));
  }
}

TEST_CASE("corrections are invariant under row permutation") {
  SplitMix64 rng(123);
  const std::size_t n = 18, m = 3;
  const ScoreMatrix s = random_matrix(n, m, rng);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  ScoreMatrix sp(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) sp(i, k) = s(perm[i], k);
  }

  const auto a = max_rank_correct(column_ranks(s, 2), s, 0.2);
  const auto b = max_rank_correct(column_ranks(sp, 2), sp, 0.2);
  CHECK(a.global_rank == b.global_rank);
  CHECK(a.per_test_quantiles == b.per_test_quantiles);

  CHECK(bonferroni_correct(s, 0.2).per_test_quantiles ==
        bonferroni_correct(sp, 0.2).per_test_quantiles);
  CHECK(independence_exact_correct(s, 0.2).per_test_quantiles ==
        independence_exact_correct(sp, 0.2).per_test_quantiles);
}

TEST_CASE("strictly increasing column transforms move quantiles pointwise") {
  SplitMix64 rng(55);
  const std::size_t n = 21, m = 2;
  const ScoreMatrix s = random_matrix(n, m, rng);
  ScoreMatrix st(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) st(i, k) = 2.0 * s(i, k) + 1.0;
  }
  const auto a = max_rank_correct(column_ranks(s, 8), s, 0.25);
  const auto b = max_rank_correct(column_ranks(st, 8), st, 0.25);
  CHECK(a.global_rank == b.global_rank);
  CHECK(a.per_test_alpha == b.per_test_alpha);
  for (std::size_t k = 0; k < m; ++k) {
    CHECK(b.per_test_quantiles[k] ==
          Catch::Approx(2.0 * a.per_test_quantiles[k] + 1.0));
  }
}

TEST_CASE("structural and validation errors") {
  SplitMix64 rng(1);
  const ScoreMatrix s = random_matrix(10, 2, rng);
  const ScoreMatrix s2 = random_matrix(9, 2, rng);
  const RankMatrix r = column_ranks(s2, 0);
  CHECK_THROWS_AS(max_rank_correct(r, s, 0.1), StructuralError);
  const RankMatrix rok = column_ranks(s, 0);
  CHECK_THROWS_AS(max_rank_correct(rok, s, 0.0), ValidationError);
  CHECK_THROWS_AS(bonferroni_correct(s, 1.0), ValidationError);
  CHECK_THROWS_AS(independence_exact_correct(s, -0.1), ValidationError);
}

TEST_CASE("method names round-trip") {
  for (Method m : {Method::max_rank, Method::bonferroni,
                   Method::independence_exact, Method::uncorrected}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(method_from_string("sidak"), ValidationError);
}
