#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
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

// One Monte Carlo experiment cell: equicorrelated Gaussian nulls with
// correlation rho across m tests, n calibration samples per test.
struct SimConfig {
  double rho = 0.0;
  int m = 1;
  int n = 1;
  double alpha = 0.05;
  int trials = 100;
  int fresh_draws = 1000;
  std::uint64_t seed = 0;
  bool allow_negative_rho = false;

  void validate() const {
    if (m < 1) throw ValidationError("m must be >= 1");
    if (n < 1) throw ValidationError("n must be >= 1");
    if (trials < 1) throw ValidationError("trials must be >= 1");
    if (fresh_draws < 1) throw ValidationError("fresh_draws must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ValidationError("alpha must lie in (0,1)");
    }
    if (rho > 1.0 || (rho < 0.0 && !allow_negative_rho)) {
      throw ValidationError(
          "rho must lie in [0,1]; negative rho requires the explicit "
          "override");
    }
  }
};

// Draws rows of X ~ N(0, Sigma) with Sigma = rho*1 + (1-rho)*I.
//
// For rho >= 0 the shared-factor construction X_k = sqrt(rho)*Z0 +
// sqrt(1-rho)*Z_k reproduces Sigma exactly in O(m) per row. For negative
// rho (exploratory) the exact spectral square root of Sigma is used:
// Sigma has eigenvalue 1+(m-1)rho on the all-ones direction and 1-rho on
// its complement, so X = sqrt(1-rho)*(Z - Zbar*1) + sqrt(1+(m-1)rho)*Zbar*1.
// Fails when Sigma is not positive semidefinite.
class EquicorrelatedSampler {
 public:
  EquicorrelatedSampler(double rho, int m, bool allow_negative = false)
      : rho_(rho), m_(m) {
    if (m < 1) throw ValidationError("m must be >= 1");
    if (rho > 1.0 || (rho < 0.0 && !allow_negative)) {
      throw ValidationError(
          "rho must lie in [0,1]; negative rho requires the explicit "
          "override");
    }
    if (rho < 0.0) {
      const double lead = 1.0 + (m - 1) * rho;
      if (lead < 0.0) {
        throw ValidationError(
            "equicorrelated covariance is not positive semidefinite: "
            "1+(m-1)*rho < 0");
      }
      shared_scale_ = std::sqrt(lead);
      resid_scale_ = std::sqrt(1.0 - rho);
    } else {
      shared_scale_ = std::sqrt(rho);
      resid_scale_ = std::sqrt(1.0 - rho);
    }
  }

  int dims() const { return m_; }

  void sample_row(NormalSampler& rng, std::span<double> out) const {
    if (rho_ >= 0.0) {
      const double z0 = shared_scale_ != 0.0 ? rng() : 0.0;
      for (int k = 0; k < m_; ++k) {
        out[static_cast<std::size_t>(k)] =
            shared_scale_ * z0 + resid_scale_ * rng();
      }
      return;
    }
    double mean = 0.0;
    for (int k = 0; k < m_; ++k) {
      out[static_cast<std::size_t>(k)] = rng();
      mean += out[static_cast<std::size_t>(k)];
    }
    mean /= m_;
    for (int k = 0; k < m_; ++k) {
      auto& v = out[static_cast<std::size_t>(k)];
      v = resid_scale_ * (v - mean) + shared_scale_ * mean;
    }
  }

 private:
  double rho_;
  int m_;
  double shared_scale_;
  double resid_scale_;
};

inline ScoreMatrix sample_equicorrelated(double rho, int m, int rows,
                                         NormalSampler& rng,
                                         bool allow_negative = false) {
  if (rows < 1) throw ValidationError("rows must be >= 1");
  EquicorrelatedSampler sampler(rho, m, allow_negative);
  ScoreMatrix s(static_cast<std::size_t>(rows), static_cast<std::size_t>(m));
  std::vector<double> row(static_cast<std::size_t>(m));
  for (int i = 0; i < rows; ++i) {
    sampler.sample_row(rng, row);
    for (int k = 0; k < m; ++k) {
      s(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) =
          row[static_cast<std::size_t>(k)];
    }
  }
  return s;
}

// Monte Carlo estimate of the corrected global significance level: the
// fraction of fresh null vectors with any component above its per-test
// quantile.
struct FwerEstimate {
  double alpha_hat = 0.0;
  std::vector<double> per_test_alpha_hat;
  double mc_stderr = 0.0;
  SimConfig config;
  Method method = Method::max_rank;
  // clamped is true when any trial's correction saturated: the quantile
  // index overflowed n, or (max-rank) the selected rank hit the ceiling n
  // with m > 1 so the thresholds degenerate to column maxima.
  bool clamped = false;
  int clamped_trials = 0;
};

// Evaluates several corrections on common random draws: every method sees
// the same calibration matrices and the same fresh evaluation vectors.
// This pairs the estimates, so ordering claims between methods hold
// per-draw rather than only in expectation. estimate_fwer(cfg, m) equals
// the corresponding entry of estimate_fwer_all(cfg, {..m..}).
inline std::vector<FwerEstimate> estimate_fwer_all(
    const SimConfig& cfg, const std::vector<Method>& methods) {
  cfg.validate();
  const auto m = static_cast<std::size_t>(cfg.m);
  const std::size_t nmethods = methods.size();

  const bool need_ranks =
      std::find(methods.begin(), methods.end(), Method::max_rank) !=
      methods.end();

  std::vector<long long> fwer_hits(nmethods, 0);
  std::vector<std::vector<long long>> test_hits(
      nmethods, std::vector<long long>(m, 0));
  std::vector<int> clamped_trials(nmethods, 0);

  std::vector<std::vector<double>> thresholds(nmethods,
                                              std::vector<double>(m));
  std::vector<double> fresh_row(m);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t trial_key = static_cast<std::uint64_t>(trial);
    NormalSampler cal_rng(
        derive_seed(cfg.seed, Stream::calibration, trial_key));
    const ScoreMatrix s = sample_equicorrelated(
        cfg.rho, cfg.m, cfg.n, cal_rng, cfg.allow_negative_rho);

    std::optional<RankMatrix> ranks;
    if (need_ranks) {
      ranks = column_ranks(s, derive_seed(cfg.seed, Stream::jitter, trial_key));
    }

    for (std::size_t j = 0; j < nmethods; ++j) {
      CorrectionResult res;
      switch (methods[j]) {
        case Method::max_rank:
          res = max_rank_correct(*ranks, s, cfg.alpha);
          if (res.global_rank == cfg.n && cfg.m > 1) res.clamped = true;
          break;
        case Method::bonferroni:
          res = bonferroni_correct(s, cfg.alpha);
          break;
        case Method::independence_exact:
          res = independence_exact_correct(s, cfg.alpha);
          break;
        case Method::uncorrected:
          res = uncorrected(s, cfg.alpha);
          break;
      }
      thresholds[j] = std::move(res.per_test_quantiles);
      if (res.clamped) ++clamped_trials[j];
    }

    EquicorrelatedSampler sampler(cfg.rho, cfg.m, cfg.allow_negative_rho);
    NormalSampler fresh_rng(derive_seed(cfg.seed, Stream::fresh, trial_key));
    for (int d = 0; d < cfg.fresh_draws; ++d) {
      sampler.sample_row(fresh_rng, fresh_row);
      for (std::size_t j = 0; j < nmethods; ++j) {
        bool any = false;
        const auto& thr = thresholds[j];
        for (std::size_t k = 0; k < m; ++k) {
          if (fresh_row[k] > thr[k]) {
            ++test_hits[j][k];
            any = true;
          }
        }
        if (any) ++fwer_hits[j];
      }
    }
  }

  const double total =
      static_cast<double>(cfg.trials) * static_cast<double>(cfg.fresh_draws);
  std::vector<FwerEstimate> out(nmethods);
  for (std::size_t j = 0; j < nmethods; ++j) {
    FwerEstimate& e = out[j];
    e.config = cfg;
    e.method = methods[j];
    e.alpha_hat = static_cast<double>(fwer_hits[j]) / total;
    e.per_test_alpha_hat.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      e.per_test_alpha_hat[k] = static_cast<double>(test_hits[j][k]) / total;
    }
    e.mc_stderr = std::sqrt(e.alpha_hat * (1.0 - e.alpha_hat) / total);
    e.clamped_trials = clamped_trials[j];
    e.clamped = clamped_trials[j] > 0;
  }
  return out;
}

inline FwerEstimate estimate_fwer(const SimConfig& cfg, Method method) {
  return estimate_fwer_all(cfg, {method}).front();
}

// Cartesian experiment grid over correlation, test count, sample size and
// correction method.
struct ExperimentGrid {
  std::vector<double> rho_list;
  std::vector<int> m_list;
  std::vector<int> n_list;
  double alpha = 0.05;
  int trials = 100;
  int fresh_draws = 1000;
  std::uint64_t seed = 0;
  std::vector<Method> methods;
  bool allow_negative_rho = false;

  void validate() const {
    if (methods.empty()) throw ValidationError("grid needs at least 1 method");
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ValidationError("alpha must lie in (0,1)");
    }
    if (trials < 1) throw ValidationError("trials must be >= 1");
    if (fresh_draws < 1) throw ValidationError("fresh_draws must be >= 1");
  }
};

struct GridRow {
  Method method = Method::max_rank;
  double rho = 0.0;
  int m = 0;
  int n = 0;
  double alpha = 0.0;
  double alpha_hat = 0.0;
  double mc_stderr = 0.0;
  bool clamped = false;
  int clamped_trials = 0;
  std::vector<double> per_test_alpha_hat;
  std::string error;
};

// Runs every grid cell. Cell seeds are derived from the master seed and the
// cell's (rho, m, n) coordinates only, so all methods of one cell share
// draws and results do not depend on which methods were requested or on the
// execution order of cells. Per-cell failures are recorded in the row's
// error field and the grid continues. on_row, when set, is invoked once per
// finished row (from worker threads; must be thread-safe).
inline std::vector<GridRow> run_grid(
    const ExperimentGrid& grid, int threads = 1,
    const std::function<void(const GridRow&)>& on_row = {}) {
  grid.validate();
  struct Combo {
    std::size_t ri, mi, ni;
  };
  std::vector<Combo> combos;
  for (std::size_t ri = 0; ri < grid.rho_list.size(); ++ri) {
    for (std::size_t mi = 0; mi < grid.m_list.size(); ++mi) {
      for (std::size_t ni = 0; ni < grid.n_list.size(); ++ni) {
        combos.push_back({ri, mi, ni});
      }
    }
  }

  std::vector<std::vector<GridRow>> per_combo(combos.size());
  parallel_for(combos.size(), threads, [&](std::size_t c) {
    const Combo& co = combos[c];
    SimConfig cfg;
    cfg.rho = grid.rho_list[co.ri];
    cfg.m = grid.m_list[co.mi];
    cfg.n = grid.n_list[co.ni];
    cfg.alpha = grid.alpha;
    cfg.trials = grid.trials;
    cfg.fresh_draws = grid.fresh_draws;
    cfg.allow_negative_rho = grid.allow_negative_rho;
    cfg.seed = derive_seed(
        grid.seed,
        {static_cast<std::uint64_t>(Stream::grid_cell), co.ri, co.mi, co.ni});

    std::vector<GridRow>& rows = per_combo[c];
    rows.resize(grid.methods.size());
    for (std::size_t j = 0; j < grid.methods.size(); ++j) {
      GridRow& row = rows[j];
      row.method = grid.methods[j];
      row.rho = cfg.rho;
      row.m = cfg.m;
      row.n = cfg.n;
      row.alpha = cfg.alpha;
    }
    try {
      const auto estimates = estimate_fwer_all(cfg, grid.methods);
      for (std::size_t j = 0; j < estimates.size(); ++j) {
        GridRow& row = rows[j];
        row.alpha_hat = estimates[j].alpha_hat;
        row.mc_stderr = estimates[j].mc_stderr;
        row.clamped = estimates[j].clamped;
        row.clamped_trials = estimates[j].clamped_trials;
        row.per_test_alpha_hat = estimates[j].per_test_alpha_hat;
      }
    } catch (const std::exception& ex) {
      for (auto& row : rows) row.error = ex.what();
    }
    if (on_row) {
      for (const auto& row : rows) on_row(row);
    }
  });

  // Emit in cartesian order rho x m x n x method regardless of scheduling.
  std::vector<GridRow> out;
  out.reserve(combos.size() * grid.methods.size());
  for (auto& rows : per_combo) {
    for (auto& row : rows) out.push_back(std::move(row));
  }
  return out;
}

inline void write_grid_csv(std::span<const GridRow> rows, std::ostream& out) {
  out << "method,rho,m,n,alpha,alpha_hat,mc_stderr,clamped,"
         "per_test_alpha_hat,error\n";
  for (const GridRow& r : rows) {
    out << to_string(r.method) << ',' << format_double(r.rho) << ',' << r.m
        << ',' << r.n << ',' << format_double(r.alpha) << ',';
    if (r.error.empty()) {
      out << format_double(r.alpha_hat) << ',' << format_double(r.mc_stderr)
          << ',' << (r.clamped ? "true" : "false") << ','
          << join_semicolon(r.per_test_alpha_hat) << ',';
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      out << ",,,," << msg;
    }
    out << '\n';
  }
}

}  // namespace maxrank
