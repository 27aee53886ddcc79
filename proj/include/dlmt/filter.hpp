#ifndef DLMT_FILTER_HPP_
#define DLMT_FILTER_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlmt/data.hpp"
#include "dlmt/stats.hpp"

namespace dlmt {

struct Hyperparams {
  double v0 = 10.0;  // prior ability variance multiple
  double a0 = 0.1;   // inverse-gamma shape
  double b0 = 0.1;   // inverse-gamma scale
  double s_w = 1.0;  // half-normal scale for w
  // Truncated-normal scale for each lambda_b; <= 0 means "derive the default
  // 10*c/B when fitting".
  double s_lambda = 0.0;
  std::vector<double> alpha;  // prior center for lambda; empty => identity fit
  // Disables the diagonal-clearing / variance-cap approximations so the
  // recursions can be validated against brute-force oracles.
  bool exact_mode = false;

  void validate() const {
    if (!(v0 > 0.0 && a0 > 0.0 && b0 > 0.0 && s_w > 0.0))
      throw std::invalid_argument("Hyperparams: scales must be positive");
  }
};

// Posterior summary after period t:
//   theta_t | sigma^2 ~ N(m, sigma^2 V),  sigma^2 ~ Inv-Gamma(a, b).
struct FilterState {
  int t = 0;
  Eigen::VectorXd m;
  Eigen::MatrixXd V;
  double a = 0.0;
  double b = 0.0;
};

struct SmoothedState {
  int t = 0;
  Eigen::VectorXd m;
  Eigen::MatrixXd V;
};

// One-step predictive quantities for a period, stacked over its observations
// in game order.
struct PredictiveStats {
  Eigen::VectorXd predicted_mean;   // Xbar m_{t-1}
  std::vector<double> scale_diag;   // diag of (b/a)(I + Xbar R Xbar^T)
  double log_pred = 0.0;            // log p(psi_t | psi_{1:t-1})
  double b_innovation = 0.0;        // production b_t path
  // Cross-check path m'R^{-1}m + psi'psi - m_t'V_t^{-1}m_t, exact_mode only.
  double b_precision = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Cholesky with jitter escalation (1e-10, then 1e-8, relative to the mean
// diagonal); throws if the matrix still is not SPD.
inline Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& A,
                                              const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = std::max(A.diagonal().mean(), 1.0);
  for (double jitter : {1e-10, 1e-8}) {
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += jitter * scale;
    llt.compute(Aj);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw std::runtime_error("matrix not SPD after jitter escalation: " + what);
}

// Dense design matrix of a period (exact mode): one row per observation.
inline Eigen::MatrixXd dense_design(const RatingPeriod& period, int p,
                                    Mode mode) {
  int n = 0;
  for (const auto& g : period.games) n += static_cast<int>(g.obs.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
  int row = 0;
  for (const auto& g : period.games) {
    if (mode == Mode::head_to_head) {
      X(row, g.athletes[0]) = 1.0;
      X(row, g.athletes[1]) = -1.0;
      ++row;
    } else {
      const int k = g.size();
      for (int r = 0; r < k; ++r) {
        for (int j = 0; j < k; ++j)
          X(row, g.athletes[j]) = (r == j ? 1.0 : 0.0) - 1.0 / k;
        ++row;
      }
    }
  }
  return X;
}

inline Eigen::VectorXd stacked_obs(const RatingPeriod& period) {
  std::vector<double> obs;
  for (const auto& g : period.games)
    obs.insert(obs.end(), g.obs.begin(), g.obs.end());
  return Eigen::Map<Eigen::VectorXd>(obs.data(), obs.size());
}

}  // namespace detail

inline FilterState init_state(int p, const Hyperparams& h) {
  if (p < 1) throw std::invalid_argument("init_state: empty roster");
  h.validate();
  FilterState s;
  s.t = 0;
  s.m = Eigen::VectorXd::Zero(p);
  s.V = h.v0 * Eigen::MatrixXd::Identity(p, p);
  s.a = h.a0;
  s.b = h.b0;
  return s;
}

// One Kalman step over a rating period of transformed observations.
//
// Production mode (exact_mode == false) applies the sparsity approximations:
// the propagated prior V_{t-1}+wI is diagonal (off-diagonals were cleared at
// the end of the previous period), so the predictive covariance
// I + Xbar R Xbar^T is block diagonal across games and each game's block is
// handled independently; after the update, off-diagonals of V_t are cleared
// and its diagonal capped at v0.
inline std::pair<FilterState, PredictiveStats> filter_step(
    const FilterState& s, const RatingPeriod& period, double w,
    const Hyperparams& h, Mode mode = Mode::multi_competitor) {
  if (!(w >= 0.0) || !std::isfinite(w))
    throw std::invalid_argument("filter_step: bad w");
  const auto p = s.m.size();

  int n = 0;
  for (const auto& g : period.games) {
    for (int a : g.athletes)
      if (a < 0 || a >= p)
        throw std::out_of_range("filter_step: athlete index out of range");
    for (double v : g.obs)
      if (!std::isfinite(v))
        throw std::invalid_argument("filter_step: non-finite observation");
    n += static_cast<int>(g.obs.size());
  }

  FilterState out;
  out.t = period.index;
  PredictiveStats stats;

  if (n == 0) {
    out.m = s.m;
    out.V = s.V + w * Eigen::MatrixXd::Identity(p, p);
    if (!h.exact_mode)
      out.V.diagonal() = out.V.diagonal().cwiseMin(h.v0);
    out.a = s.a;
    out.b = s.b;
    stats.predicted_mean = Eigen::VectorXd(0);
    stats.b_innovation = s.b;
    if (h.exact_mode) stats.b_precision = s.b;
    return {out, stats};
  }

  const double df = 2.0 * s.a;
  const double ba = s.b / s.a;
  stats.predicted_mean = Eigen::VectorXd(n);
  stats.scale_diag.resize(n);

  Eigen::MatrixXd A;          // posterior precision factor R^{-1} + X'X
  Eigen::VectorXd rhs;        // R^{-1} m + X' psi
  double quad_innov = 0.0;    // e' (I + X R X')^{-1} e

  if (h.exact_mode) {
    const Eigen::MatrixXd R =
        s.V + w * Eigen::MatrixXd::Identity(p, p);
    const auto Rllt = detail::spd_factor(
        R, "prior covariance, period " + std::to_string(period.index));
    const Eigen::MatrixXd Rinv =
        Rllt.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd X = detail::dense_design(period, p, mode);
    const Eigen::VectorXd psi = detail::stacked_obs(period);

    const Eigen::VectorXd pred = X * s.m;
    const Eigen::MatrixXd sigma =
        Eigen::MatrixXd::Identity(n, n) + X * R * X.transpose();
    stats.predicted_mean = pred;
    for (int i = 0; i < n; ++i) stats.scale_diag[i] = ba * sigma(i, i);
    stats.log_pred = log_mvt_density(psi, df, pred, ba * sigma);

    const auto Sllt = detail::spd_factor(
        sigma, "predictive covariance, period " + std::to_string(period.index));
    const Eigen::VectorXd e = psi - pred;
    quad_innov = e.dot(Sllt.solve(e));

    A = Rinv + X.transpose() * X;
    rhs = Rinv * s.m + X.transpose() * psi;

    const auto Allt = detail::spd_factor(
        A, "posterior precision, period " + std::to_string(period.index));
    out.V = Allt.solve(Eigen::MatrixXd::Identity(p, p));
    out.m = Allt.solve(rhs);
    stats.b_precision =
        s.b + 0.5 * (s.m.dot(Rinv * s.m) + psi.squaredNorm() -
                     out.m.dot(A * out.m));
  } else {
    // Diagonal prior path.
    const Eigen::VectorXd r_diag = s.V.diagonal().array() + w;
    const Eigen::VectorXd r_inv = r_diag.cwiseInverse();

    A = Eigen::MatrixXd::Zero(p, p);
    A.diagonal() = r_inv;
    rhs = r_inv.cwiseProduct(s.m);

    int row = 0;
    double log_pred = 0.0;
    for (const auto& g : period.games) {
      if (mode == Mode::head_to_head) {
        const int a0 = g.athletes[0], a1 = g.athletes[1];
        const double z = g.obs[0];
        const double pred = s.m[a0] - s.m[a1];
        const double sigma = 1.0 + r_diag[a0] + r_diag[a1];
        stats.predicted_mean[row] = pred;
        stats.scale_diag[row] = ba * sigma;
        log_pred += log_t_density(z, df, pred, ba * sigma);
        quad_innov += (z - pred) * (z - pred) / sigma;
        A(a0, a0) += 1.0;
        A(a1, a1) += 1.0;
        A(a0, a1) -= 1.0;
        A(a1, a0) -= 1.0;
        rhs[a0] += z;
        rhs[a1] -= z;
        ++row;
      } else {
        const int k = g.size();
        // Local centered design C = I_k - (1/k) 1 1'.
        Eigen::VectorXd psi_g(k), d_g(k), pred(k);
        double m_mean = 0.0;
        for (int j = 0; j < k; ++j) m_mean += s.m[g.athletes[j]];
        m_mean /= k;
        for (int j = 0; j < k; ++j) {
          psi_g[j] = g.obs[j];
          d_g[j] = r_diag[g.athletes[j]];
          pred[j] = s.m[g.athletes[j]] - m_mean;
        }
        Eigen::MatrixXd C = Eigen::MatrixXd::Identity(k, k);
        C.array() -= 1.0 / k;
        const Eigen::MatrixXd sigma =
            Eigen::MatrixXd::Identity(k, k) +
            C * d_g.asDiagonal() * C.transpose();
        for (int j = 0; j < k; ++j) {
          stats.predicted_mean[row + j] = pred[j];
          stats.scale_diag[row + j] = ba * sigma(j, j);
        }
        log_pred += log_mvt_density(psi_g, df, pred, ba * sigma);
        const auto Sllt = detail::spd_factor(
            sigma, "game predictive block, period " +
                       std::to_string(period.index));
        const Eigen::VectorXd e = psi_g - pred;
        quad_innov += e.dot(Sllt.solve(e));

        // X'X contribution of the game is C (H_k is idempotent); X'psi is
        // the game-mean-adjusted psi.
        double psi_mean = psi_g.mean();
        for (int r = 0; r < k; ++r) {
          const int ar = g.athletes[r];
          rhs[ar] += psi_g[r] - psi_mean;
          for (int c = 0; c < k; ++c)
            A(ar, g.athletes[c]) += C(r, c);
        }
        row += k;
      }
    }
    stats.log_pred = log_pred;

    const auto Allt = detail::spd_factor(
        A, "posterior precision, period " + std::to_string(period.index));
    out.V = Allt.solve(Eigen::MatrixXd::Identity(p, p));
    out.m = Allt.solve(rhs);

    // Sparsification: clear off-diagonals, cap the diagonal at v0.  The
    // diagonal is copied out first (assigning a diagonal view of V back
    // into V would zero the source before reading it).
    const Eigen::VectorXd capped = out.V.diagonal().cwiseMin(h.v0);
    out.V.setZero();
    out.V.diagonal() = capped;
  }

  out.a = s.a + 0.5 * n;
  out.b = s.b + 0.5 * quad_innov;
  stats.b_innovation = out.b;
  return {out, stats};
}

// Filter trajectory over a whole dataset, with metadata needed by the
// smoother and the fitting objective.
struct FilterRun {
  std::vector<FilterState> states;  // states[0] = prior, states[t] = period t
  std::vector<PredictiveStats> stats;  // stats[t-1] belongs to period t
  double w = 0.0;
  bool exact_mode = false;
  double log_predictive = 0.0;
};

inline FilterRun run_filter(const Dataset& d, double w, const Hyperparams& h,
                            int through_t = -1) {
  if (!d.centered)
    throw std::logic_error("run_filter: dataset is not preprocessed");
  FilterRun run;
  run.w = w;
  run.exact_mode = h.exact_mode;
  run.states.push_back(init_state(std::max(d.num_athletes(), 1), h));
  for (const auto& period : d.periods) {
    if (through_t >= 0 && period.index > through_t) break;
    auto [next, stats] = filter_step(run.states.back(), period, w, h, d.mode);
    run.log_predictive += stats.log_pred;
    run.states.push_back(std::move(next));
    run.stats.push_back(std::move(stats));
  }
  return run;
}

// Rauch-Tung-Striebel backward pass on the scale-free covariance factors:
//   S_t   = V_t (V_t + wI)^{-1}
//   m_t^s = m_t + S_t (m_{t+1}^s - m_t)
//   V_t^s = V_t + S_t (V_{t+1}^s - V_t - wI) S_t^T.
inline std::vector<SmoothedState> rts_smooth(const FilterRun& run, double w) {
  if (w != run.w)
    throw std::invalid_argument("rts_smooth: w does not match the filter run");
  const int T = static_cast<int>(run.states.size()) - 1;
  std::vector<SmoothedState> out(T);
  if (T == 0) return out;
  const auto p = run.states.back().m.size();

  out[T - 1] = {run.states[T].t, run.states[T].m, run.states[T].V};
  for (int t = T - 1; t >= 1; --t) {
    const auto& f = run.states[t];
    const Eigen::MatrixXd R = f.V + w * Eigen::MatrixXd::Identity(p, p);
    const auto Rllt = detail::spd_factor(R, "RTS gain");
    // S = V R^{-1}  (solve R S' = V, both symmetric).
    const Eigen::MatrixXd S = Rllt.solve(f.V).transpose();
    out[t - 1].t = f.t;
    out[t - 1].m = f.m + S * (out[t].m - f.m);
    out[t - 1].V =
        f.V + S * (out[t].V - R) * S.transpose();
  }
  return out;
}

struct AthleteSummary {
  double mean = 0.0;
  double sd = 0.0;  // marginal t sd when df > 2, otherwise the t scale
  double lo = 0.0;
  double hi = 0.0;
  bool sd_is_scale_only = false;
};

// Marginal ability posterior per athlete: Student-t with df 2a, location
// m_i and scale sqrt((b/a) V_ii); `credible_mass` central interval.
inline std::vector<AthleteSummary> posterior_summary(const Eigen::VectorXd& m,
                                                     const Eigen::MatrixXd& V,
                                                     double a, double b,
                                                     double credible_mass) {
  if (!(credible_mass >= 0.0 && credible_mass < 1.0))
    throw std::invalid_argument("posterior_summary: credible_mass in [0,1)");
  const double df = 2.0 * a;
  const double q = credible_mass > 0.0
                       ? student_t_quantile(df, 0.5 * (1.0 + credible_mass))
                       : 0.0;
  std::vector<AthleteSummary> out(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double scale = std::sqrt(std::max(0.0, (b / a) * V(i, i)));
    AthleteSummary& s = out[i];
    s.mean = m[i];
    if (df > 2.0) {
      s.sd = scale * std::sqrt(df / (df - 2.0));
    } else {
      s.sd = scale;
      s.sd_is_scale_only = true;
    }
    s.lo = m[i] - q * scale;
    s.hi = m[i] + q * scale;
  }
  return out;
}

}  // namespace dlmt

#endif  // DLMT_FILTER_HPP_
