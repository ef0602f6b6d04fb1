#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "maxrank/corrections.hpp"
#include "maxrank/errors.hpp"
#include "maxrank/matrix.hpp"
#include "maxrank/parallel.hpp"
#include "maxrank/rank.hpp"
#include "maxrank/rng.hpp"

namespace maxrank {

// Calibration nonconformity scores, one list per output dimension. All
// dimensions share the same calibration indices, so lengths must agree.
struct CalibrationSet {
  std::vector<std::vector<double>> scores;  // [dim][sample]

  std::size_t dims() const { return scores.size(); }
  std::size_t size() const { return scores.empty() ? 0 : scores[0].size(); }

  void validate() const {
    if (scores.empty()) {
      throw ValidationError("calibration set needs at least one dimension");
    }
    const std::size_t n = scores[0].size();
    if (n == 0) throw ValidationError("calibration set is empty");
    for (const auto& col : scores) {
      if (col.size() != n) {
        throw StructuralError(
            "calibration score lists must have equal length across "
            "dimensions");
      }
      for (double v : col) {
        if (!std::isfinite(v)) {
          throw ValidationError("calibration scores must be finite");
        }
      }
    }
  }
};

// Conformal p-value: the fraction of calibration samples that conform
// worse than the candidate, |{i : s_i >= s_new}| / (n+1).
inline double conformal_p_value(double s_new, std::span<const double> cal) {
  if (cal.empty()) {
    throw ValidationError("conformal_p_value requires a non-empty "
                          "calibration set");
  }
  std::size_t count = 0;
  for (double s : cal) {
    if (s >= s_new) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(cal.size() + 1);
}

struct DimensionThreshold {
  double threshold = 0.0;
  bool clamped = false;
};

// Single-dimension split conformal quantile: the calibration score at the
// sample-corrected order-statistic position. When clamped, n samples
// cannot certify the requested level and the prediction set should be
// treated as the entire space.
inline DimensionThreshold split_conformal_fit(std::span<const double> cal,
                                              double alpha) {
  if (cal.empty()) {
    throw ValidationError("split_conformal_fit requires calibration scores");
  }
  const auto n = static_cast<std::int64_t>(cal.size());
  const QuantileIndex qi = quantile_index(n, alpha);
  std::vector<double> sorted(cal.begin(), cal.end());
  auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(qi.index - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return {*nth, qi.clamped};
}

// Level at which threshold membership and p-value membership coincide
// exactly: s <= s_(t)  <=>  p > (n-t)/(n+1), with t the selected index.
inline double effective_level(std::int64_t n, double alpha) {
  const QuantileIndex qi = quantile_index(n, alpha);
  return static_cast<double>(n - qi.index) / static_cast<double>(n + 1);
}

// Multivariate prediction set with one threshold per output dimension.
// For absolute-residual scores the set is the box of intervals
// [center_k - threshold_k, center_k + threshold_k].
struct PredictionSet {
  Method method = Method::uncorrected;
  std::vector<double> thresholds;
  bool clamped = false;

  std::pair<double, double> interval(std::size_t dim, double center) const {
    return {center - thresholds[dim], center + thresholds[dim]};
  }

  double volume() const {
    double v = 1.0;
    for (double t : thresholds) v *= 2.0 * t;
    return v;
  }
};

// Builds per-dimension thresholds from calibration scores with the chosen
// multiple-testing correction. The seed fixes rank tie-breaking.
inline PredictionSet multivariate_conformal(const CalibrationSet& cal,
                                            double alpha, Method method,
                                            std::uint64_t seed) {
  cal.validate();
  const std::size_t n = cal.size();
  const std::size_t m = cal.dims();

  ScoreMatrix s(n, m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i) s(i, k) = cal.scores[k][i];
  }

  CorrectionResult res;
  switch (method) {
    case Method::max_rank: {
      const RankMatrix r = column_ranks(s, seed);
      res = max_rank_correct(r, s, alpha);
      break;
    }
    case Method::bonferroni:
      res = bonferroni_correct(s, alpha);
      break;
    case Method::independence_exact:
      res = independence_exact_correct(s, alpha);
      break;
    case Method::uncorrected:
      res = uncorrected(s, alpha);
      break;
  }

  PredictionSet set;
  set.method = method;
  set.thresholds = std::move(res.per_test_quantiles);
  set.clamped = res.clamped;
  return set;
}

// Synthetic m-output regression task. Outputs share a latent noise factor
// whose weight controls the correlation of nonconformity scores across
// dimensions, mirroring the equicorrelated simulation design.
struct SyntheticTask {
  int m = 1;
  double shared_weight = 0.0;  // in [0,1]
  double noise_scale = 1.0;
  int n_train = 100;
  int n_cal = 1000;
  int n_test = 100;

  void validate() const {
    if (m < 1) throw ValidationError("task m must be >= 1");
    if (!(shared_weight >= 0.0 && shared_weight <= 1.0)) {
      throw ValidationError("shared_weight must lie in [0,1]");
    }
    if (!(noise_scale > 0.0)) {
      throw ValidationError("noise_scale must be > 0");
    }
    if (n_train < 2) throw ValidationError("n_train must be >= 2");
    if (n_cal < 1) throw ValidationError("n_cal must be >= 1");
    if (n_test < 1) throw ValidationError("n_test must be >= 1");
  }
};

struct CoverageRow {
  Method correction = Method::max_rank;
  double joint_coverage = 0.0;
  std::vector<double> per_dim_coverage;
  double mean_volume = 0.0;
  bool clamped_any = false;
  std::string error;
};

namespace detail {

struct TaskSample {
  std::vector<double> x;                // latent feature
  std::vector<std::vector<double>> y;   // [dim][sample]
};

inline TaskSample draw_task_sample(const SyntheticTask& task, int count,
                                   NormalSampler& rng) {
  TaskSample out;
  out.x.resize(static_cast<std::size_t>(count));
  out.y.assign(static_cast<std::size_t>(task.m),
               std::vector<double>(static_cast<std::size_t>(count)));
  const double sw = std::sqrt(task.shared_weight);
  const double rw = std::sqrt(1.0 - task.shared_weight);
  for (int i = 0; i < count; ++i) {
    const double x = rng();
    const double e0 = rng();
    out.x[static_cast<std::size_t>(i)] = x;
    for (int k = 0; k < task.m; ++k) {
      const double noise = sw * e0 + rw * rng();
      out.y[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
          x + task.noise_scale * noise;
    }
  }
  return out;
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;

  double predict(double x) const { return intercept + slope * x; }
};

inline LinearFit least_squares(std::span<const double> x,
                               std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

struct TrialOutcome {
  std::vector<long long> joint_hits;                // per correction
  std::vector<std::vector<long long>> dim_hits;     // per correction, dim
  std::vector<double> volume;                       // per correction
  std::vector<std::uint8_t> clamped;                // per correction
};

}  // namespace detail

// Repeated train/calibrate/test splits of the synthetic task: fit a
// per-output least-squares predictor on the latent feature, compute
// absolute-residual scores, build prediction sets under each correction,
// and record joint coverage, per-dimension coverage and mean set volume.
// All corrections within one trial share data, so volume and coverage
// orderings hold per-trial. Per-trial failures are recorded and the
// experiment continues.
inline std::vector<CoverageRow> coverage_experiment(
    const SyntheticTask& task, double alpha,
    const std::vector<Method>& corrections, int trials, std::uint64_t seed,
    int threads = 1) {
  task.validate();
  if (corrections.empty()) {
    throw ValidationError("coverage_experiment needs at least 1 correction");
  }
  if (trials < 1) throw ValidationError("trials must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0,1)");
  }

  const std::size_t nc = corrections.size();
  const auto md = static_cast<std::size_t>(task.m);
  std::vector<std::optional<detail::TrialOutcome>> outcomes(
      static_cast<std::size_t>(trials));
  std::vector<std::string> failures(static_cast<std::size_t>(trials));

  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    try {
      const std::uint64_t tseed =
          derive_seed(seed, Stream::conformal_trial, static_cast<std::uint64_t>(t));
      NormalSampler rng(tseed);
      const auto train = detail::draw_task_sample(task, task.n_train, rng);
      const auto cal = detail::draw_task_sample(task, task.n_cal, rng);
      const auto test = detail::draw_task_sample(task, task.n_test, rng);

      std::vector<detail::LinearFit> fits(md);
      for (std::size_t k = 0; k < md; ++k) {
        fits[k] = detail::least_squares(train.x, train.y[k]);
      }

      CalibrationSet cal_scores;
      cal_scores.scores.assign(md, {});
      for (std::size_t k = 0; k < md; ++k) {
        auto& col = cal_scores.scores[k];
        col.resize(cal.x.size());
        for (std::size_t i = 0; i < cal.x.size(); ++i) {
          col[i] = std::abs(cal.y[k][i] - fits[k].predict(cal.x[i]));
        }
      }

      detail::TrialOutcome out;
      out.joint_hits.assign(nc, 0);
      out.dim_hits.assign(nc, std::vector<long long>(md, 0));
      out.volume.assign(nc, 0.0);
      out.clamped.assign(nc, 0);

      for (std::size_t j = 0; j < nc; ++j) {
        const PredictionSet set = multivariate_conformal(
            cal_scores, alpha, corrections[j],
            derive_seed(tseed, Stream::jitter, j));
        out.volume[j] = set.volume();
        out.clamped[j] = set.clamped ? 1 : 0;
        for (std::size_t i = 0; i < test.x.size(); ++i) {
          bool all = true;
          for (std::size_t k = 0; k < md; ++k) {
            const double resid =
                std::abs(test.y[k][i] - fits[k].predict(test.x[i]));
            if (resid <= set.thresholds[k]) {
              ++out.dim_hits[j][k];
            } else {
              all = false;
            }
          }
          if (all) ++out.joint_hits[j];
        }
      }
      outcomes[t] = std::move(out);
    } catch (const std::exception& ex) {
      failures[t] = ex.what();
    }
  });

  long long ok_trials = 0;
  std::string first_failure;
  long long failed = 0;
  std::vector<CoverageRow> rows(nc);
  for (std::size_t j = 0; j < nc; ++j) {
    rows[j].correction = corrections[j];
    rows[j].per_dim_coverage.assign(md, 0.0);
  }
  for (std::size_t t = 0; t < outcomes.size(); ++t) {
    if (!outcomes[t]) {
      ++failed;
      if (first_failure.empty()) first_failure = failures[t];
      continue;
    }
    ++ok_trials;
    const auto& o = *outcomes[t];
    for (std::size_t j = 0; j < nc; ++j) {
      rows[j].joint_coverage += static_cast<double>(o.joint_hits[j]);
      for (std::size_t k = 0; k < md; ++k) {
        rows[j].per_dim_coverage[k] += static_cast<double>(o.dim_hits[j][k]);
      }
      rows[j].mean_volume += o.volume[j];
      rows[j].clamped_any = rows[j].clamped_any || o.clamped[j] != 0;
    }
  }
  if (ok_trials == 0) {
    throw Error("all trials failed: " + first_failure);
  }
  const double denom =
      static_cast<double>(ok_trials) * static_cast<double>(task.n_test);
  for (std::size_t j = 0; j < nc; ++j) {
    rows[j].joint_coverage /= denom;
    for (auto& v : rows[j].per_dim_coverage) v /= denom;
    rows[j].mean_volume /= static_cast<double>(ok_trials);
    if (failed > 0) {
      rows[j].error = std::to_string(failed) +
                      " trial(s) failed: " + first_failure;
    }
  }
  return rows;
}

inline void write_coverage_csv(std::span<const CoverageRow> rows,
                               std::ostream& out) {
  out << "correction,joint_coverage,per_dim_coverage,mean_volume,"
         "clamped_any,error\n";
  for (const CoverageRow& r : rows) {
    std::string msg = r.error;
    std::replace(msg.begin(), msg.end(), ',', ';');
    out << to_string(r.correction) << ',' << format_double(r.joint_coverage)
        << ','
        << join_semicolon(std::span<const double>(r.per_dim_coverage.data(),
                                                  r.per_dim_coverage.size()))
        << ',' << format_double(r.mean_volume) << ','
        << (r.clamped_any ? "true" : "false") << ',' << msg << '\n';
  }
}

}  // namespace maxrank
