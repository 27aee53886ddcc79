#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>

#include "dlmt/evaluation.hpp"
#include "dlmt/rng.hpp"

using namespace dlmt;

namespace {

GamePrediction make_pred(std::vector<double> predicted,
                         std::vector<double> observed) {
  GamePrediction gp;
  gp.n = static_cast<int>(predicted.size());
  gp.predicted = std::move(predicted);
  gp.observed = std::move(observed);
  gp.predicted_ranks = average_ranks(gp.predicted);
  gp.observed_ranks = average_ranks(gp.observed);
  return gp;
}

}  // namespace

TEST_CASE("average ranks with ties") {
  CHECK(average_ranks({3.0, 1.0, 2.0}) == std::vector<double>{3.0, 1.0, 2.0});
  CHECK(average_ranks({1.0, 1.0, 2.0}) == std::vector<double>{1.5, 1.5, 3.0});
  CHECK(average_ranks({5.0, 5.0, 5.0}) == std::vector<double>{2.0, 2.0, 2.0});
  CHECK(average_ranks({2.0}) == std::vector<double>{1.0});
}

TEST_CASE("weighted spearman hand cases") {
  // A 3-player game ranked perfectly (rho 1) plus a 2-player game ranked
  // backwards (rho -1): (2*1 + 1*(-1)) / (2 + 1) = 1/3, exactly.
  const std::vector<GamePrediction> preds = {
      make_pred({1.0, 2.0, 3.0}, {10.0, 20.0, 30.0}),
      make_pred({1.0, 2.0}, {5.0, 1.0})};
  const auto res = weighted_spearman(preds);
  CHECK(res.rho == 1.0 / 3.0);  // exact in floating point
  CHECK(res.games_used == 2);
  CHECK(res.games_excluded == 0);
}

TEST_CASE("all-tied observed games are excluded") {
  const std::vector<GamePrediction> preds = {
      make_pred({1.0, 2.0}, {7.0, 7.0}),
      make_pred({1.0, 2.0}, {1.0, 2.0})};
  const auto res = weighted_spearman(preds);
  CHECK(res.rho == 1.0);
  CHECK(res.games_used == 1);
  CHECK(res.games_excluded == 1);
}

TEST_CASE("constant prediction against varying observations scores zero") {
  const std::vector<GamePrediction> preds = {
      make_pred({4.0, 4.0, 4.0}, {1.0, 2.0, 3.0})};
  CHECK(weighted_spearman(preds).rho == 0.0);
}

TEST_CASE("spearman is invariant to monotone transforms of either side") {
  Rng rng(51);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + rng.uniform_int(7);
    std::vector<double> p(n), o(n);
    for (int i = 0; i < n; ++i) {
      p[i] = rng.normal();
      o[i] = rng.normal();
    }
    std::vector<double> p2(n), o2(n);
    for (int i = 0; i < n; ++i) {
      p2[i] = std::exp(0.5 * p[i]) + 3.0;  // strictly increasing map
      o2[i] = o[i] * o[i] * o[i];          // strictly increasing map
    }
    const auto base = weighted_spearman({make_pred(p, o)});
    const auto mapped = weighted_spearman({make_pred(p2, o2)});
    CHECK(base.rho == Catch::Approx(mapped.rho).margin(1e-12));
  }
}

TEST_CASE("spearman is symmetric under swapping predictions and observations") {
  Rng rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + rng.uniform_int(5);
    std::vector<double> p(n), o(n);
    for (int i = 0; i < n; ++i) {
      p[i] = rng.normal();
      o[i] = rng.normal();
    }
    CHECK(weighted_spearman({make_pred(p, o)}).rho ==
          Catch::Approx(weighted_spearman({make_pred(o, p)}).rho)
              .margin(1e-12));
  }
}

TEST_CASE("equal-size games reduce to the unweighted mean") {
  Rng rng(53);
  std::vector<GamePrediction> preds;
  double sum = 0.0;
  for (int g = 0; g < 10; ++g) {
    std::vector<double> p(4), o(4);
    for (int i = 0; i < 4; ++i) {
      p[i] = rng.normal();
      o[i] = rng.normal();
    }
    GamePrediction gp = make_pred(p, o);
    sum += pearson_correlation(gp.observed_ranks, gp.predicted_ranks);
    preds.push_back(std::move(gp));
  }
  CHECK(weighted_spearman(preds).rho == Catch::Approx(sum / 10).margin(1e-12));
}

TEST_CASE("win accuracy hand case") {
  // Observed margins (+, +, -); predictions (+, -, -): 2 of 3 right.
  const std::vector<GamePrediction> preds = {make_pred({1.0}, {2.0}),
                                             make_pred({-0.5}, {1.0}),
                                             make_pred({-2.0}, {-1.0})};
  CHECK(win_accuracy(preds) == Catch::Approx(2.0 / 3.0).margin(1e-15));
}

TEST_CASE("zero margins score one half") {
  CHECK(win_accuracy({make_pred({0.0}, {3.0})}) == 0.5);
  CHECK(win_accuracy({make_pred({3.0}, {0.0})}) == 0.5);
}

TEST_CASE("win accuracy is invariant to swapping both athletes") {
  Rng rng(54);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<GamePrediction> fwd, rev;
    for (int g = 0; g < 5; ++g) {
      const double p = rng.normal(), o = rng.normal();
      fwd.push_back(make_pred({p}, {o}));
      rev.push_back(make_pred({-p}, {-o}));
    }
    CHECK(win_accuracy(fwd) == win_accuracy(rev));
  }
}

TEST_CASE("win accuracy rejects multi-competitor games") {
  CHECK_THROWS_AS(win_accuracy({make_pred({1.0, 2.0}, {1.0, 2.0})}),
                  std::invalid_argument);
}

TEST_CASE("qq correlation of perfectly normal-like values is near one") {
  // Feed the normal quantiles back in as residuals: correlation exactly 1.
  std::vector<QqPoint> qq(101);
  for (int i = 0; i < 101; ++i) {
    qq[i].quantile = normal_quantile((i + 0.5) / 101.0);
    qq[i].residual = 2.0 * qq[i].quantile + 0.3;  // affine in the quantile
  }
  CHECK(qq_correlation(qq) == Catch::Approx(1.0).margin(1e-12));
}
