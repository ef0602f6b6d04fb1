#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "maxrank/errors.hpp"
#include "maxrank/matrix.hpp"
#include "maxrank/rank.hpp"

namespace maxrank {

enum class Method {
  max_rank,
  bonferroni,
  independence_exact,
  uncorrected,
};

inline const char* to_string(Method m) {
  switch (m) {
    case Method::max_rank: return "max-rank";
    case Method::bonferroni: return "bonferroni";
    case Method::independence_exact: return "independence";
    case Method::uncorrected: return "uncorrected";
  }
  return "?";
}

inline Method method_from_string(std::string_view name) {
  if (name == "max-rank" || name == "maxrank") return Method::max_rank;
  if (name == "bonferroni") return Method::bonferroni;
  if (name == "independence" || name == "independence-exact") {
    return Method::independence_exact;
  }
  if (name == "uncorrected") return Method::uncorrected;
  throw ValidationError("unknown correction method: " + std::string(name));
}

// Result of a multiple-testing correction, expressed in a shared rank-index
// currency: global_rank is the selected order-statistic position in {1..n},
// per_test_quantiles[k] is the corresponding entry of sorted column k, and
// per_test_alpha[k] the implied per-test significance level.
struct CorrectionResult {
  Method method = Method::uncorrected;
  std::int64_t global_rank = 0;
  bool clamped = false;
  std::vector<double> per_test_quantiles;
  std::vector<double> per_test_alpha;
};

// Row-wise maxima of the rank matrix; the composite worst-case statistic.
inline std::vector<std::int32_t> row_max_ranks(const RankMatrix& r) {
  std::vector<std::int32_t> rmax(r.rows());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    std::int32_t v = r(i, 0);
    for (std::size_t k = 1; k < r.cols(); ++k) v = std::max(v, r(i, k));
    rmax[i] = v;
  }
  return rmax;
}

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0,1)");
  }
}

// Order statistic at 1-based position `index` of one column, without
// sorting the whole column.
inline double column_order_stat(std::span<const double> col,
                                std::int64_t index) {
  std::vector<double> buf(col.begin(), col.end());
  auto nth = buf.begin() + static_cast<std::ptrdiff_t>(index - 1);
  std::nth_element(buf.begin(), nth, buf.end());
  return *nth;
}

inline std::vector<double> quantiles_at(const ScoreMatrix& s,
                                        std::int64_t index) {
  std::vector<double> q(s.cols());
  for (std::size_t k = 0; k < s.cols(); ++k) {
    q[k] = column_order_stat(s.column(k), index);
  }
  return q;
}

}  // namespace detail

// The max-rank correction: take row-wise maxima of the per-test ranks,
// sort, and select the entry at the sample-corrected quantile position as a
// rank threshold shared by all tests.
inline CorrectionResult max_rank_correct(const RankMatrix& r,
                                         const ScoreMatrix& s, double alpha) {
  detail::check_alpha(alpha);
  if (r.rows() != s.rows() || r.cols() != s.cols()) {
    throw StructuralError("rank matrix and score matrix dimensions differ");
  }
  const auto n = static_cast<std::int64_t>(s.rows());

  std::vector<std::int32_t> rmax = row_max_ranks(r);
  std::sort(rmax.begin(), rmax.end());
  const QuantileIndex qi = quantile_index(n, alpha);
  const std::int64_t grank = rmax[static_cast<std::size_t>(qi.index - 1)];

  CorrectionResult res;
  res.method = Method::max_rank;
  res.global_rank = grank;
  res.clamped = qi.clamped;
  res.per_test_quantiles = detail::quantiles_at(s, grank);
  res.per_test_alpha.assign(
      s.cols(), 1.0 - static_cast<double>(grank) / static_cast<double>(n));
  return res;
}

namespace detail {

inline CorrectionResult index_correction(const ScoreMatrix& s, Method method,
                                         double index_alpha,
                                         double per_test_alpha) {
  const auto n = static_cast<std::int64_t>(s.rows());
  const QuantileIndex qi = quantile_index(n, index_alpha);
  CorrectionResult res;
  res.method = method;
  res.global_rank = qi.index;
  res.clamped = qi.clamped;
  res.per_test_quantiles = quantiles_at(s, qi.index);
  res.per_test_alpha.assign(s.cols(), per_test_alpha);
  return res;
}

}  // namespace detail

// Bonferroni baseline: every test at level alpha/m.
inline CorrectionResult bonferroni_correct(const ScoreMatrix& s,
                                           double alpha) {
  detail::check_alpha(alpha);
  const double per_test = alpha / static_cast<double>(s.cols());
  return detail::index_correction(s, Method::bonferroni, per_test, per_test);
}

// Exact closed-form solution under independence: per-test quantile
// probability (1-alpha)^(1/m).
inline CorrectionResult independence_exact_correct(const ScoreMatrix& s,
                                                   double alpha) {
  detail::check_alpha(alpha);
  const double q = std::pow(1.0 - alpha, 1.0 / static_cast<double>(s.cols()));
  const double per_test = 1.0 - q;
  return detail::index_correction(s, Method::independence_exact, per_test,
                                  per_test);
}

// No correction: every test at the target level. The m=1 reference and the
// negative control in FWER experiments.
inline CorrectionResult uncorrected(const ScoreMatrix& s, double alpha) {
  detail::check_alpha(alpha);
  CorrectionResult res =
      detail::index_correction(s, Method::uncorrected, alpha, alpha);
  const auto n = static_cast<std::int64_t>(s.rows());
  res.per_test_alpha.assign(
      s.cols(),
      1.0 - static_cast<double>(res.global_rank) / static_cast<double>(n));
  return res;
}

}  // namespace maxrank
