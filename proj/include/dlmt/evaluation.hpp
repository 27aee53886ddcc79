#ifndef DLMT_EVALUATION_HPP_
#define DLMT_EVALUATION_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dlmt/data.hpp"
#include "dlmt/fitting.hpp"
#include "dlmt/stats.hpp"

namespace dlmt {

// 1-based average ranks (ties share the mean of their positions), ascending
// by value.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// One test game's one-step prediction, on the transformed scale.
struct GamePrediction {
  int t = 0;
  int game = 0;  // within-period game index
  int n = 0;
  std::vector<double> predicted;        // Xbar m_{t-1} rows
  std::vector<double> observed;         // centered scores (z for h2h)
  std::vector<double> predicted_ranks;  // average-rank ties
  std::vector<double> observed_ranks;
};

// One-step predictions for every game in periods >= first_test_period,
// pulled from the (sequential, hence strictly-prior) filter run.  `d` must
// be the same centered, untransformed dataset the model was fitted on.
inline std::vector<GamePrediction> predict_test_games(const FittedModel& model,
                                                      const Dataset& d,
                                                      int first_test_period) {
  if (model.filter.stats.size() != d.periods.size())
    throw std::invalid_argument(
        "predict_test_games: dataset does not match the fitted trajectory");
  std::vector<GamePrediction> preds;
  for (std::size_t ti = 0; ti < d.periods.size(); ++ti) {
    const auto& period = d.periods[ti];
    if (period.index < first_test_period) continue;
    const auto& stats = model.filter.stats[ti];
    int row = 0;
    for (std::size_t gi = 0; gi < period.games.size(); ++gi) {
      const auto& g = period.games[gi];
      GamePrediction gp;
      gp.t = period.index;
      gp.game = static_cast<int>(gi);
      gp.n = g.size();
      for (std::size_t j = 0; j < g.obs.size(); ++j) {
        gp.predicted.push_back(stats.predicted_mean[row + j]);
        gp.observed.push_back(g.obs[j]);
      }
      row += static_cast<int>(g.obs.size());
      gp.predicted_ranks = average_ranks(gp.predicted);
      gp.observed_ranks = average_ranks(gp.observed);
      preds.push_back(std::move(gp));
    }
  }
  return preds;
}

struct WeightedSpearmanResult {
  double rho = 0.0;
  int games_used = 0;
  int games_excluded = 0;  // all-tied observed ranks
};

// Game-size-weighted Spearman: sum (n_tg - 1) rho_tg / sum (n_tg - 1).
// Games whose observed scores are all tied have undefined rho and are
// excluded (counted).  A constant prediction against varying observations
// scores rho_tg = 0.
inline WeightedSpearmanResult weighted_spearman(
    const std::vector<GamePrediction>& preds) {
  WeightedSpearmanResult res;
  double num = 0.0, den = 0.0;
  for (const auto& gp : preds) {
    if (gp.n < 2)
      throw std::invalid_argument("weighted_spearman: game with n < 2");
    const bool all_tied = std::all_of(
        gp.observed_ranks.begin(), gp.observed_ranks.end(),
        [&](double r) { return r == gp.observed_ranks.front(); });
    if (all_tied) {
      ++res.games_excluded;
      continue;
    }
    const double rho_tg =
        pearson_correlation(gp.observed_ranks, gp.predicted_ranks);
    num += (gp.n - 1) * rho_tg;
    den += (gp.n - 1);
    ++res.games_used;
  }
  res.rho = den > 0.0 ? num / den : 0.0;
  return res;
}

// Head-to-head winner accuracy.  Zero predicted margin or zero observed
// margin scores 0.5 so the metric stays swap-invariant and bounded.
inline double win_accuracy(const std::vector<GamePrediction>& preds) {
  if (preds.empty()) return 0.0;
  double credit = 0.0;
  for (const auto& gp : preds) {
    if (gp.predicted.size() != 1)
      throw std::invalid_argument("win_accuracy: not head-to-head predictions");
    const double pz = gp.predicted[0];
    const double oz = gp.observed[0];
    if (pz == 0.0 || oz == 0.0)
      credit += 0.5;
    else if ((pz > 0.0) == (oz > 0.0))
      credit += 1.0;
  }
  return credit / preds.size();
}

struct QqPoint {
  double residual = 0.0;  // standardized, sorted ascending
  double quantile = 0.0;  // standard normal at (i - 0.5) / n
};

// Standardized one-step test residuals (psi - Xbar m_{t-1}) / predictive
// scale, paired with normal quantiles at plotting positions.
inline std::vector<QqPoint> standardized_residuals(const FittedModel& model,
                                                   const Dataset& d,
                                                   int first_test_period) {
  if (model.filter.stats.size() != d.periods.size())
    throw std::invalid_argument(
        "standardized_residuals: dataset does not match the trajectory");
  std::vector<double> r;
  for (std::size_t ti = 0; ti < d.periods.size(); ++ti) {
    const auto& period = d.periods[ti];
    if (period.index < first_test_period) continue;
    const auto& stats = model.filter.stats[ti];
    int row = 0;
    for (const auto& g : period.games) {
      for (std::size_t j = 0; j < g.obs.size(); ++j) {
        const double psi = transform(model.transform, g.obs[j]);
        const double sd = std::sqrt(stats.scale_diag[row + j]);
        r.push_back(sd > 0.0 ? (psi - stats.predicted_mean[row + j]) / sd
                             : 0.0);
      }
      row += static_cast<int>(g.obs.size());
    }
  }
  std::sort(r.begin(), r.end());
  std::vector<QqPoint> out(r.size());
  const double n = static_cast<double>(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    out[i].residual = r[i];
    out[i].quantile = normal_quantile((i + 0.5) / n);
  }
  return out;
}

inline double qq_correlation(const std::vector<QqPoint>& qq) {
  std::vector<double> a(qq.size()), b(qq.size());
  for (std::size_t i = 0; i < qq.size(); ++i) {
    a[i] = qq[i].residual;
    b[i] = qq[i].quantile;
  }
  return pearson_correlation(a, b);
}

}  // namespace dlmt

#endif  // DLMT_EVALUATION_HPP_
