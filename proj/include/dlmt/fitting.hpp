#ifndef DLMT_FITTING_HPP_
#define DLMT_FITTING_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlmt/data.hpp"
#include "dlmt/filter.hpp"
#include "dlmt/nelder_mead.hpp"
#include "dlmt/spline.hpp"

namespace dlmt {

enum class PriorVariant { truncated_normal, dirichlet };

inline std::string to_string(PriorVariant v) {
  return v == PriorVariant::truncated_normal ? "truncated_normal" : "dirichlet";
}

inline PriorVariant prior_variant_from_string(const std::string& s) {
  if (s == "truncated_normal") return PriorVariant::truncated_normal;
  if (s == "dirichlet") return PriorVariant::dirichlet;
  throw std::invalid_argument("unknown prior variant: " + s);
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Floor for d tau / dy inside log-Jacobian terms.
constexpr double kJacobianFloor = 1e-12;

// Half-Normal(w | s_w^2) up to an additive constant.
inline double log_prior_w(double w, const Hyperparams& h) {
  if (!(w > 0.0)) return kNegInf;
  return -0.5 * w * w / (h.s_w * h.s_w);
}

// Truncated-normal variant: independent N+(alpha_b, s_lambda^2) terms.
// Dirichlet variant: sum (alpha_b - 1) log(lambda_b / c), valid only on the
// scaled simplex sum(lambda) = c.  Constants are dropped in both.
inline double log_prior_lambda(const std::vector<double>& lambda,
                               const Hyperparams& h, PriorVariant variant,
                               double c) {
  if (h.alpha.size() != lambda.size())
    throw std::invalid_argument("log_prior_lambda: alpha size mismatch");
  double sum = 0.0;
  for (double l : lambda) {
    if (l < 0.0) return kNegInf;
    sum += l;
  }
  if (variant == PriorVariant::truncated_normal) {
    const double s2 = h.s_lambda * h.s_lambda;
    if (!(s2 > 0.0))
      throw std::invalid_argument("log_prior_lambda: s_lambda not set");
    double lp = 0.0;
    for (std::size_t b = 0; b < lambda.size(); ++b)
      lp -= 0.5 * (lambda[b] - h.alpha[b]) * (lambda[b] - h.alpha[b]) / s2;
    return lp;
  }
  if (std::abs(sum - c) > 1e-9 * std::max(std::abs(c), 1.0)) return kNegInf;
  double lp = 0.0;
  for (std::size_t b = 0; b < lambda.size(); ++b) {
    if (lambda[b] == 0.0 && h.alpha[b] != 1.0) return kNegInf;
    if (lambda[b] > 0.0) lp += (h.alpha[b] - 1.0) * std::log(lambda[b] / c);
  }
  return lp;
}

// Result of applying a transform to a whole dataset.
struct TransformedData {
  Dataset data;
  int clamp_count = 0;  // observations outside the knot domain
};

inline TransformedData transform_dataset(const Dataset& d,
                                         const TransformParams& p) {
  TransformedData out;
  out.data = d;
  for (auto& period : out.data.periods) {
    for (auto& g : period.games) {
      for (auto& y : g.obs) {
        if (!p.knots.contains(y)) ++out.clamp_count;
        y = transform(p, y);
      }
    }
  }
  return out;
}

// Everything the marginal MAP objective needs, with the spline bases
// precomputed per training observation (knots are fixed during the search).
struct ObjectiveSpec {
  Dataset train;  // centered, untransformed prefix (periods 1..T_train)
  KnotConfig knots;
  Hyperparams h;  // alpha and s_lambda resolved
  PriorVariant variant = PriorVariant::truncated_normal;
  int T_train = 0;
  double lambda0 = 0.0;
  double range_c = 1.0;

  // ibasis[t][g] is the (game size x B) matrix of I-spline values; mbasis
  // stacks M-spline rows over all training observations.
  std::vector<std::vector<Eigen::MatrixXd>> ibasis;
  Eigen::MatrixXd mbasis;
};

inline ObjectiveSpec make_objective_spec(const Dataset& d,
                                         const KnotConfig& knots,
                                         const Hyperparams& h_in,
                                         PriorVariant variant, int T_train,
                                         double lambda0, double range_c) {
  if (!d.centered)
    throw std::logic_error("make_objective_spec: dataset not preprocessed");
  if (T_train < 1 || T_train > d.num_periods())
    throw std::invalid_argument("make_objective_spec: bad T_train");

  ObjectiveSpec spec;
  spec.train = d;
  spec.train.periods.resize(T_train);
  spec.knots = knots;
  spec.variant = variant;
  spec.T_train = T_train;
  spec.lambda0 = lambda0;
  spec.range_c = range_c;

  spec.h = h_in;
  spec.h.validate();
  const int B = knots.basis_size();
  if (spec.h.alpha.empty())
    spec.h.alpha = identity_lambda(knots, range_c, lambda0).lambda;
  if (static_cast<int>(spec.h.alpha.size()) != B)
    throw std::invalid_argument("make_objective_spec: alpha size mismatch");
  if (spec.h.s_lambda <= 0.0) spec.h.s_lambda = 10.0 * range_c / B;

  const int n = spec.train.num_observations();
  spec.mbasis.resize(n, B);
  spec.ibasis.resize(T_train);
  int row = 0;
  for (int t = 0; t < T_train; ++t) {
    for (const auto& g : spec.train.periods[t].games) {
      Eigen::MatrixXd ib(g.obs.size(), B);
      for (std::size_t j = 0; j < g.obs.size(); ++j) {
        const auto iv = eval_ispline_basis(knots, g.obs[j]);
        const auto mv = eval_mspline_basis(knots, g.obs[j]);
        for (int b = 0; b < B; ++b) {
          ib(j, b) = iv[b];
          spec.mbasis(row, b) = mv[b];
        }
        ++row;
      }
      spec.ibasis[t].push_back(std::move(ib));
    }
  }
  return spec;
}

// log J + log p(w) + log p(lambda) + sum_t log p(psi_t | psi_{1:t-1}).
// Unnormalized (prior constants dropped); -inf on domain violations.
inline double log_marginal_posterior(double w,
                                     const std::vector<double>& lambda,
                                     const ObjectiveSpec& spec) {
  const int B = spec.knots.basis_size();
  if (static_cast<int>(lambda.size()) != B)
    throw std::invalid_argument("log_marginal_posterior: lambda size");
  const double lp_w = log_prior_w(w, spec.h);
  const double lp_l =
      log_prior_lambda(lambda, spec.h, spec.variant, spec.range_c);
  if (lp_w == kNegInf || lp_l == kNegInf) return kNegInf;

  const Eigen::Map<const Eigen::VectorXd> lv(lambda.data(), B);

  // Forward-map log-Jacobian, with the derivative floored before the log.
  const Eigen::VectorXd jac = spec.mbasis * lv;
  double log_j = 0.0;
  for (Eigen::Index i = 0; i < jac.size(); ++i)
    log_j += std::log(std::max(jac[i], kJacobianFloor));

  // Transform the training prefix and accumulate the predictive density.
  Dataset work = spec.train;
  for (int t = 0; t < spec.T_train; ++t) {
    std::size_t gi = 0;
    for (auto& g : work.periods[t].games) {
      const Eigen::VectorXd psi =
          (spec.ibasis[t][gi++] * lv).array() + spec.lambda0;
      for (std::size_t j = 0; j < g.obs.size(); ++j) g.obs[j] = psi[j];
    }
  }
  double log_pred;
  try {
    log_pred = run_filter(work, w, spec.h).log_predictive;
  } catch (const std::exception&) {
    return kNegInf;
  }
  return log_j + lp_w + lp_l + log_pred;
}

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double objective = 0.0;
  int clamp_count = 0;       // full-data observations outside the knot domain
  int jacobian_floor_hits = 0;
  std::string warning;
  std::vector<NelderMeadTracePoint> trace;
};

struct FittedModel {
  Mode mode = Mode::multi_competitor;
  double w_hat = 0.0;
  TransformParams transform;
  Hyperparams h;
  PriorVariant variant = PriorVariant::truncated_normal;
  int T_train = 0;
  double train_fraction = 2.0 / 3.0;
  FilterRun filter;                    // step-2 run over the full dataset
  std::vector<SmoothedState> smoothed;
  FitDiagnostics diagnostics;

  double a_T() const { return filter.states.back().a; }
  double b_T() const { return filter.states.back().b; }

  // Posterior mean of sigma (sqrt of the inverse-gamma mean), defined for
  // a_T > 1.
  double sigma_hat() const {
    const double a = a_T();
    return a > 1.0 ? std::sqrt(b_T() / (a - 1.0)) : std::sqrt(b_T() / a);
  }
};

struct FitOptions {
  double train_fraction = 2.0 / 3.0;
  PriorVariant variant = PriorVariant::truncated_normal;
  NelderMeadOptions nm;
};

// Training prefix length: the last ceil(T*(1-f)) periods are held out.
inline int train_periods(int T, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw std::invalid_argument("train_fraction must be in (0, 1]");
  const int held_out =
      static_cast<int>(std::ceil(T * (1.0 - train_fraction) - 1e-12));
  return std::max(1, T - held_out);
}

// Two-step MAP fit: (1) maximize the marginal posterior of (w, lambda) over
// the training prefix, searching in log space; (2) filter + smooth the full
// transformed dataset at the mode.
inline FittedModel fit_map(const Dataset& d, const KnotConfig& knots,
                           const Hyperparams& h, FitOptions opts = {}) {
  if (d.num_periods() < 2)
    throw std::invalid_argument("fit_map: need at least 2 rating periods");
  const int T_train = train_periods(d.num_periods(), opts.train_fraction);
  const double lambda0 = knots.lo;
  const double c = knots.range();
  const ObjectiveSpec spec =
      make_objective_spec(d, knots, h, opts.variant, T_train, lambda0, c);
  const int B = knots.basis_size();

  // Start at (w = 0.1 s_w, lambda = identity weights); zero weights are
  // nudged off the log-space boundary.
  std::vector<double> x0(B + 1);
  x0[0] = std::log(0.1 * spec.h.s_w);
  for (int b = 0; b < B; ++b)
    x0[b + 1] = std::log(std::max(spec.h.alpha[b], 1e-6 * c));

  auto objective = [&](const std::vector<double>& x) {
    const double w = std::exp(x[0]);
    std::vector<double> lambda(B);
    for (int b = 0; b < B; ++b) lambda[b] = std::exp(x[b + 1]);
    const double lp = log_marginal_posterior(w, lambda, spec);
    return std::isfinite(lp) ? -lp : 1e300;
  };

  auto nm = nelder_mead(objective, x0, opts.nm);

  FittedModel model;
  model.mode = d.mode;
  model.w_hat = std::exp(nm.x[0]);
  model.variant = opts.variant;
  model.T_train = T_train;
  model.train_fraction = opts.train_fraction;
  model.h = spec.h;

  model.transform.lambda0 = lambda0;
  model.transform.range_c = c;
  model.transform.knots = knots;
  model.transform.lambda.resize(B);
  for (int b = 0; b < B; ++b)
    model.transform.lambda[b] = std::exp(nm.x[b + 1]);

  model.diagnostics.converged = nm.converged;
  model.diagnostics.iterations = nm.iterations;
  model.diagnostics.evaluations = nm.evaluations;
  model.diagnostics.objective = -nm.f;
  model.diagnostics.trace = std::move(nm.trace);
  if (!nm.converged)
    model.diagnostics.warning =
        "optimizer hit max_iter; returning best point found";

  // Step 2 on the full dataset.
  TransformedData td = transform_dataset(d, model.transform);
  model.diagnostics.clamp_count = td.clamp_count;
  for (const auto& y : d.all_observations())
    if (transform_jacobian(model.transform, y) < kJacobianFloor)
      ++model.diagnostics.jacobian_floor_hits;
  model.filter = run_filter(td.data, model.w_hat, model.h);
  model.smoothed = rts_smooth(model.filter, model.w_hat);
  return model;
}

// Appends one rating period (centered, untransformed scores; athlete indices
// may extend the roster) using the already-learned (w, lambda), then
// refreshes the smoothed trajectory.
inline FittedModel fast_update(const FittedModel& model,
                               const RatingPeriod& period,
                               int num_athletes_after) {
  if (period.index != model.filter.states.back().t + 1)
    throw std::invalid_argument("fast_update: out-of-order period index");
  const auto p_old = model.filter.states.back().m.size();
  if (num_athletes_after < p_old)
    throw std::invalid_argument("fast_update: roster cannot shrink");

  FittedModel out = model;
  if (num_athletes_after > p_old) {
    // Deferred initialization: a new athlete is independent of everyone,
    // mean 0, prior variance v0 plus the innovations accrued so far (the
    // production cap keeps this at v0).
    for (auto& s : out.filter.states) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(num_athletes_after);
      m.head(p_old) = s.m;
      Eigen::MatrixXd V =
          Eigen::MatrixXd::Zero(num_athletes_after, num_athletes_after);
      V.topLeftCorner(p_old, p_old) = s.V;
      double var = model.h.v0 + s.t * model.w_hat;
      if (!model.h.exact_mode) var = std::min(var, model.h.v0);
      for (Eigen::Index i = p_old; i < num_athletes_after; ++i) V(i, i) = var;
      s.m = std::move(m);
      s.V = std::move(V);
    }
  }

  RatingPeriod transformed = period;
  for (auto& g : transformed.games) {
    for (auto& y : g.obs) {
      if (!model.transform.knots.contains(y)) ++out.diagnostics.clamp_count;
      y = transform(model.transform, y);
    }
  }
  auto [next, stats] = filter_step(out.filter.states.back(), transformed,
                                   model.w_hat, model.h, model.mode);
  out.filter.log_predictive += stats.log_pred;
  out.filter.states.push_back(std::move(next));
  out.filter.stats.push_back(std::move(stats));
  out.smoothed = rts_smooth(out.filter, model.w_hat);
  return out;
}

}  // namespace dlmt

#endif  // DLMT_FITTING_HPP_
