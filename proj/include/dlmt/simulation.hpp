#ifndef DLMT_SIMULATION_HPP_
#define DLMT_SIMULATION_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlmt/data.hpp"
#include "dlmt/fitting.hpp"
#include "dlmt/preprocess.hpp"
#include "dlmt/rng.hpp"
#include "dlmt/spline.hpp"

namespace dlmt {

// Standard Yeo-Johnson power transform.
inline double yeo_johnson(double y, double lam) {
  if (!std::isfinite(lam)) throw std::invalid_argument("yeo_johnson: bad lambda");
  if (y >= 0.0) {
    if (lam != 0.0) return (std::pow(y + 1.0, lam) - 1.0) / lam;
    return std::log1p(y);
  }
  const double two_ml = 2.0 - lam;
  if (two_ml != 0.0) return -(std::pow(1.0 - y, two_ml) - 1.0) / two_ml;
  return -std::log1p(-y);
}

// Exact algebraic inverse; throws if psi lies outside the transform's range
// for the given lambda.
inline double inverse_yeo_johnson(double psi, double lam) {
  if (psi >= 0.0) {
    if (lam == 0.0) return std::expm1(psi);
    const double base = lam * psi + 1.0;
    if (base <= 0.0)
      throw std::domain_error("inverse_yeo_johnson: value outside range");
    return std::pow(base, 1.0 / lam) - 1.0;
  }
  const double two_ml = 2.0 - lam;
  if (two_ml == 0.0) return -std::expm1(-psi);
  const double base = 1.0 - two_ml * psi;
  if (base <= 0.0)
    throw std::domain_error("inverse_yeo_johnson: value outside range");
  return 1.0 - std::pow(base, 1.0 / two_ml);
}

// Data-generating configuration for the parameter-recovery study.
struct SimConfig {
  int p = 100;               // athletes
  int T = 20;                // rating periods
  int players_per_game = 10;
  int games_per_period = 25;
  double v0 = 10.0;
  double sigma2 = 100.0;
  double w = 0.5;
  double yj_lambda = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (p < 1 || T < 1 || games_per_period < 0 || players_per_game < 2 ||
        players_per_game > p)
      throw std::invalid_argument("SimConfig: bad sizes");
    if (!(v0 > 0.0 && sigma2 > 0.0 && w >= 0.0))
      throw std::invalid_argument("SimConfig: variances must be positive");
  }
};

struct SimulatedData {
  Dataset raw;  // observed (inverse-transformed) scores, uncentered
  std::vector<Eigen::VectorXd> theta;  // ground-truth abilities, theta[t-1]
  std::vector<std::vector<std::vector<double>>> psi;  // per period/game
  int resampled_games = 0;
};

// Draws abilities as a normal random walk, then per game samples players
// without replacement, centers their abilities within the game, adds
// observation noise, and maps through the inverse Yeo-Johnson transform.
// Deterministic given the seed.
inline SimulatedData simulate_dataset(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const double sigma = std::sqrt(cfg.sigma2);

  SimulatedData sim;
  sim.theta.resize(cfg.T);
  sim.theta[0] = Eigen::VectorXd(cfg.p);
  for (int i = 0; i < cfg.p; ++i)
    sim.theta[0][i] = rng.normal(0.0, sigma * std::sqrt(cfg.v0));
  for (int t = 1; t < cfg.T; ++t) {
    sim.theta[t] = sim.theta[t - 1];
    for (int i = 0; i < cfg.p; ++i)
      sim.theta[t][i] += rng.normal(0.0, sigma * std::sqrt(cfg.w));
  }

  sim.raw.mode = Mode::multi_competitor;
  sim.raw.centered = false;
  sim.raw.athlete_ids.resize(cfg.p);
  for (int i = 0; i < cfg.p; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "A%04d", i);
    sim.raw.athlete_ids[i] = buf;
  }

  sim.psi.resize(cfg.T);
  sim.raw.periods.resize(cfg.T);
  constexpr int kMaxRetries = 100;
  for (int t = 0; t < cfg.T; ++t) {
    auto& period = sim.raw.periods[t];
    period.index = t + 1;
    for (int gi = 0; gi < cfg.games_per_period; ++gi) {
      Game g;
      g.athletes = rng.sample_without_replacement(cfg.p, cfg.players_per_game);
      const int k = g.size();
      double mean_theta = 0.0;
      for (int a : g.athletes) mean_theta += sim.theta[t][a];
      mean_theta /= k;

      std::vector<double> psi_g(k), y_g(k);
      bool ok = false;
      for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
        if (attempt > 0) ++sim.resampled_games;
        ok = true;
        for (int j = 0; j < k; ++j) {
          psi_g[j] =
              sim.theta[t][g.athletes[j]] - mean_theta + rng.normal(0.0, sigma);
          try {
            y_g[j] = inverse_yeo_johnson(psi_g[j], cfg.yj_lambda);
          } catch (const std::domain_error&) {
            ok = false;
            break;
          }
        }
      }
      if (!ok)
        throw std::runtime_error(
            "simulate_dataset: inverse transform kept failing");
      g.obs = y_g;
      sim.psi[t].push_back(psi_g);
      period.games.push_back(std::move(g));
    }
  }
  return sim;
}

// Projects a learned spline transform onto the Yeo-Johnson family: least
// squares over observation pairs (raw score y_i, centered score u_i),
// minimizing over lambda with the affine part (a, b) solved in closed form:
//   min_{lambda,a,b} sum_i (tau(u_i) - a YJ(y_i, lambda) - b)^2.
// Matching against the raw (uncentered) score reproduces the generator's
// composite map exactly when tau is exact.
struct YjProjection {
  double lambda = 1.0;
  double scale = 1.0;
  double offset = 0.0;
  double rss = 0.0;
};

namespace detail {

inline double yj_fit_rss(const std::vector<double>& target,
                         const std::vector<double>& raw, double lam,
                         double* scale_out = nullptr,
                         double* offset_out = nullptr) {
  const std::size_t n = raw.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = yeo_johnson(raw[i], lam);
    sx += x[i];
    sy += target[i];
    sxx += x[i] * x[i];
    sxy += x[i] * target[i];
  }
  const double det = n * sxx - sx * sx;
  double a = 0.0, b = sy / n;
  if (det > 0.0) {
    a = (n * sxy - sx * sy) / det;
    b = (sy - a * sx) / n;
  }
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = target[i] - a * x[i] - b;
    rss += e * e;
  }
  if (scale_out) *scale_out = a;
  if (offset_out) *offset_out = b;
  return rss;
}

}  // namespace detail

inline YjProjection project_to_yeo_johnson(const TransformParams& tau,
                                           const std::vector<double>& raw_scores,
                                           const std::vector<double>& centered_scores) {
  if (raw_scores.empty() || raw_scores.size() != centered_scores.size())
    throw std::invalid_argument("project_to_yeo_johnson: bad inputs");

  // Subsample deterministically to bound the grid-search cost.
  constexpr std::size_t kMaxPoints = 4096;
  std::vector<double> raw, target;
  const std::size_t stride =
      std::max<std::size_t>(1, raw_scores.size() / kMaxPoints);
  for (std::size_t i = 0; i < raw_scores.size(); i += stride) {
    raw.push_back(raw_scores[i]);
    target.push_back(transform(tau, centered_scores[i]));
  }

  // Coarse grid then golden-section refinement.
  double best_lam = 1.0, best_rss = std::numeric_limits<double>::infinity();
  for (double lam = -1.0; lam <= 3.0 + 1e-12; lam += 0.05) {
    const double rss = detail::yj_fit_rss(target, raw, lam);
    if (rss < best_rss) {
      best_rss = rss;
      best_lam = lam;
    }
  }
  double lo = best_lam - 0.05, hi = best_lam + 0.05;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = detail::yj_fit_rss(target, raw, x1);
  double f2 = detail::yj_fit_rss(target, raw, x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = detail::yj_fit_rss(target, raw, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = detail::yj_fit_rss(target, raw, x2);
    }
  }
  YjProjection proj;
  proj.lambda = 0.5 * (lo + hi);
  proj.rss = detail::yj_fit_rss(target, raw, proj.lambda, &proj.scale,
                                &proj.offset);
  return proj;
}

// One simulate -> fit -> project replication.
struct RecoveryResult {
  bool ok = false;
  std::string error;
  double lambda_fit = 0.0;
  double lambda_error = 0.0;
  double w_hat = 0.0;
  double sigma_hat = 0.0;
  bool fit_converged = false;
};

inline RecoveryResult run_recovery_replication(SimConfig cfg,
                                               FitOptions opts = {}) {
  RecoveryResult res;
  try {
    SimulatedData sim = simulate_dataset(cfg);
    // The generator builds scores around game-centered abilities, so the
    // observed scores already play the role of the game-centered input;
    // re-centering them would distort a nonlinear generating transform.
    Dataset centered = sim.raw;
    centered.centered = true;

    const int T_train = train_periods(centered.num_periods(), opts.train_fraction);
    std::vector<double> train_scores = centered.all_observations(T_train);
    const KnotConfig knots = make_knot_config(train_scores, 3, 3);

    Hyperparams h;
    h.v0 = cfg.v0;
    FittedModel model = fit_map(centered, knots, h, opts);

    // Pair raw with centered scores over the training prefix.
    std::vector<double> raw, cen;
    for (int t = 0; t < T_train; ++t) {
      const auto& rp = sim.raw.periods[t];
      const auto& cp = centered.periods[t];
      for (std::size_t gi = 0; gi < rp.games.size(); ++gi) {
        for (std::size_t j = 0; j < rp.games[gi].obs.size(); ++j) {
          raw.push_back(rp.games[gi].obs[j]);
          cen.push_back(cp.games[gi].obs[j]);
        }
      }
    }
    const YjProjection proj = project_to_yeo_johnson(model.transform, raw, cen);

    res.lambda_fit = proj.lambda;
    res.lambda_error = std::abs(proj.lambda - cfg.yj_lambda);
    res.w_hat = model.w_hat;
    res.sigma_hat = model.sigma_hat();
    res.fit_converged = model.diagnostics.converged;
    res.ok = true;
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

struct RecoveryCellSummary {
  SimConfig cfg;
  int replications = 0;
  int failures = 0;
  double lambda_error_median = 0.0;
  double lambda_error_iqr = 0.0;
  double w_hat_mean = 0.0;
  double sigma_hat_mean = 0.0;
  std::vector<RecoveryResult> per_rep;
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double h = q * (v.size() - 1);
  const auto j = static_cast<std::size_t>(std::floor(h));
  const double frac = h - j;
  const double upper = (j + 1 < v.size()) ? v[j + 1] : v[j];
  return v[j] + frac * (upper - v[j]);
}

}  // namespace detail

// Runs `replications` independent replications of a cell (seeds derived as
// seed + replication index), in parallel.
inline RecoveryCellSummary recovery_experiment(const SimConfig& cfg,
                                               int replications,
                                               FitOptions opts = {}) {
  RecoveryCellSummary cell;
  cell.cfg = cfg;
  cell.replications = replications;

  std::vector<std::future<RecoveryResult>> futures;
  futures.reserve(replications);
  for (int r = 0; r < replications; ++r) {
    SimConfig rep_cfg = cfg;
    rep_cfg.seed = cfg.seed + static_cast<std::uint64_t>(r);
    futures.push_back(std::async(std::launch::async, run_recovery_replication,
                                 rep_cfg, opts));
  }

  std::vector<double> lambda_errors;
  double w_sum = 0.0, sigma_sum = 0.0;
  int ok = 0;
  for (auto& f : futures) {
    RecoveryResult r = f.get();
    if (r.ok) {
      lambda_errors.push_back(r.lambda_error);
      w_sum += r.w_hat;
      sigma_sum += r.sigma_hat;
      ++ok;
    } else {
      ++cell.failures;
    }
    cell.per_rep.push_back(std::move(r));
  }
  if (ok > 0) {
    cell.lambda_error_median = detail::percentile(lambda_errors, 0.5);
    cell.lambda_error_iqr = detail::percentile(lambda_errors, 0.75) -
                            detail::percentile(lambda_errors, 0.25);
    cell.w_hat_mean = w_sum / ok;
    cell.sigma_hat_mean = sigma_sum / ok;
  }
  return cell;
}

}  // namespace dlmt

#endif  // DLMT_SIMULATION_HPP_
