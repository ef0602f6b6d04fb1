#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "maxrank/errors.hpp"
#include "maxrank/matrix.hpp"
#include "maxrank/rng.hpp"

namespace maxrank {

// Sample-corrected empirical quantile position: the 1-based order-statistic
// index ceil((n+1)(1-alpha)), clamped to n. clamped=true signals that n
// samples cannot certify the requested level.
struct QuantileIndex {
  std::int64_t index = 0;
  bool clamped = false;
};

inline QuantileIndex quantile_index(std::int64_t n, double alpha) {
  if (n < 1) throw ValidationError("quantile_index requires n >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0,1)");
  }
  // ceil((n+1)(1-alpha)) == (n+1) - floor((n+1)*alpha) for the values this
  // library meets. Computing via the floor form with a relative nudge keeps
  // decimal alphas (0.05, 0.1, ...) from landing on the wrong side of an
  // exact integer product.
  const double y = static_cast<double>(n + 1) * alpha;
  const auto fl = static_cast<std::int64_t>(std::floor(y + 1e-9 * (1.0 + y)));
  const std::int64_t raw = (n + 1) - fl;
  QuantileIndex q;
  q.clamped = raw > n;
  q.index = q.clamped ? n : raw;
  if (q.index < 1) q.index = 1;
  return q;
}

// Rank of x within pool: the number of elements <= x. Pool values must be
// pairwise distinct (jitter first) and contain x.
inline std::int64_t rank_of(double x, std::span<const double> pool) {
  if (pool.empty()) throw ValidationError("rank_of requires a non-empty pool");
  std::vector<double> sorted(pool.begin(), pool.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw TieError("rank_of: pool contains duplicate values");
  }
  std::int64_t count = 0;
  bool found = false;
  for (double v : pool) {
    if (v <= x) ++count;
    if (v == x) found = true;
  }
  if (!found) throw ValidationError("rank_of: x is not an element of pool");
  return count;
}

// Per-column diagnostics from ranking. A column is degenerate when all its
// entries are identical, in which case tie-breaking falls back to row
// order.
struct RankDiagnostics {
  std::vector<std::uint8_t> degenerate_column;

  bool any_degenerate() const {
    return std::find(degenerate_column.begin(), degenerate_column.end(),
                     std::uint8_t{1}) != degenerate_column.end();
  }
};

namespace detail {

// Seeded per-row jitter values shared by every column, so identical
// columns always receive identical rank columns.
inline std::vector<double> row_jitter(std::uint64_t seed, std::size_t n) {
  SplitMix64 rng(seed);
  std::vector<double> u(n);
  for (auto& v : u) v = rng.uniform_open();
  return u;
}

}  // namespace detail

// Column-wise ranks with seeded tie-breaking. Ties within a column are
// resolved as if jitter u_i * g/2 had been added to each entry, where u_i
// is a per-row uniform in (0,1) determined by (seed, row) alone and g is
// the smallest nonzero within-column gap; distinct values keep their
// order, and tied values are ordered by u. A column with no nonzero gap
// (all entries equal) falls back to row order and is flagged.
inline RankMatrix column_ranks(const ScoreMatrix& s, std::uint64_t seed,
                               RankDiagnostics* diag = nullptr) {
  const std::size_t n = s.rows();
  const std::size_t m = s.cols();
  s.validate();

  const std::vector<double> jitter = detail::row_jitter(seed, n);
  RankMatrix ranks(n, m);
  if (diag) diag->degenerate_column.assign(m, 0);

  std::vector<std::uint32_t> order(n);
  for (std::size_t k = 0; k < m; ++k) {
    const auto col = s.column(k);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (col[a] != col[b]) return col[a] < col[b];
      return a < b;
    });

    if (col[order.front()] == col[order.back()]) {
      // Fully degenerate column: keep row order, flag it.
      if (diag) diag->degenerate_column[k] = 1;
      for (std::size_t i = 0; i < n; ++i) {
        ranks(i, k) = static_cast<std::int32_t>(i + 1);
      }
      continue;
    }

    // Reorder each tie group by the shared row jitter.
    std::size_t g0 = 0;
    while (g0 < n) {
      std::size_t g1 = g0 + 1;
      while (g1 < n && col[order[g1]] == col[order[g0]]) ++g1;
      if (g1 - g0 > 1) {
        std::sort(order.begin() + static_cast<std::ptrdiff_t>(g0),
                  order.begin() + static_cast<std::ptrdiff_t>(g1),
                  [&](std::uint32_t a, std::uint32_t b) {
                    if (jitter[a] != jitter[b]) return jitter[a] < jitter[b];
                    return a < b;
                  });
      }
      g0 = g1;
    }

    for (std::size_t pos = 0; pos < n; ++pos) {
      ranks(order[pos], k) = static_cast<std::int32_t>(pos + 1);
    }
  }
  return ranks;
}

}  // namespace maxrank
