#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numeric>

#include "dlmt/simulation.hpp"

using namespace dlmt;

TEST_CASE("yeo-johnson special cases") {
  CHECK(yeo_johnson(3.7, 1.0) == Catch::Approx(3.7).margin(1e-12));
  CHECK(yeo_johnson(-2.2, 1.0) == Catch::Approx(-2.2).margin(1e-12));
  const double e = std::exp(1.0);
  CHECK(yeo_johnson(e - 1.0, 0.0) == Catch::Approx(1.0).margin(1e-12));
  // Negative branch with lambda = 2 uses -log1p(-y).
  CHECK(yeo_johnson(-(e - 1.0), 2.0) == Catch::Approx(-1.0).margin(1e-12));
  // Positive branch lambda = 2: ((y+1)^2 - 1)/2.
  CHECK(yeo_johnson(1.0, 2.0) == Catch::Approx(1.5).margin(1e-12));
  // Negative branch lambda = 0.5: -((1-y)^1.5 - 1)/1.5.
  CHECK(yeo_johnson(-3.0, 0.5) ==
        Catch::Approx(-(std::pow(4.0, 1.5) - 1.0) / 1.5).margin(1e-12));
}

TEST_CASE("yeo-johnson is monotone and continuous at zero") {
  for (double lam : {-0.5, 0.0, 0.7, 1.0, 1.3, 2.0, 2.5}) {
    double prev = yeo_johnson(-50.0, lam);
    for (int i = 1; i <= 200; ++i) {
      const double y = -50.0 + 100.0 * i / 200.0;
      const double v = yeo_johnson(y, lam);
      CHECK(v > prev);
      prev = v;
    }
    CHECK(yeo_johnson(1e-12, lam) == Catch::Approx(0.0).margin(1e-10));
  }
}

TEST_CASE("yeo-johnson round-trips through its inverse") {
  for (double lam : {0.0, 0.7, 1.0, 1.3, 2.0}) {
    for (double y : {-50.0, -1.0, 0.0, 0.5, 50.0}) {
      const double psi = yeo_johnson(y, lam);
      CHECK(inverse_yeo_johnson(psi, lam) ==
            Catch::Approx(y).margin(1e-10 * std::max(1.0, std::abs(y))));
    }
  }
}

TEST_CASE("inverse yeo-johnson rejects out-of-range values") {
  // Positive branch with lambda < 0: base = lambda psi + 1 <= 0.
  CHECK_THROWS_AS(inverse_yeo_johnson(3.0, -0.5), std::domain_error);
  // Negative branch with lambda > 2: base = 1 - (2 - lambda) psi <= 0.
  CHECK_THROWS_AS(inverse_yeo_johnson(-3.0, 2.5), std::domain_error);
}

TEST_CASE("simulation is deterministic given the seed") {
  SimConfig cfg;
  cfg.p = 20;
  cfg.T = 5;
  cfg.players_per_game = 5;
  cfg.games_per_period = 4;
  cfg.seed = 99;
  const SimulatedData a = simulate_dataset(cfg);
  const SimulatedData b = simulate_dataset(cfg);
  REQUIRE(a.raw.periods.size() == b.raw.periods.size());
  for (std::size_t t = 0; t < a.raw.periods.size(); ++t) {
    REQUIRE(a.raw.periods[t].games.size() == b.raw.periods[t].games.size());
    for (std::size_t g = 0; g < a.raw.periods[t].games.size(); ++g) {
      CHECK(a.raw.periods[t].games[g].athletes ==
            b.raw.periods[t].games[g].athletes);
      CHECK(a.raw.periods[t].games[g].obs == b.raw.periods[t].games[g].obs);
    }
  }
  for (int t = 0; t < cfg.T; ++t)
    CHECK((a.theta[t].array() == b.theta[t].array()).all());

  SimConfig other = cfg;
  other.seed = 100;
  const SimulatedData c = simulate_dataset(other);
  CHECK_FALSE((a.theta[0].array() == c.theta[0].array()).all());
}

TEST_CASE("zero innovation variance freezes the abilities") {
  SimConfig cfg;
  cfg.p = 10;
  cfg.T = 6;
  cfg.players_per_game = 4;
  cfg.games_per_period = 2;
  cfg.w = 0.0;
  const SimulatedData sim = simulate_dataset(cfg);
  for (int t = 1; t < cfg.T; ++t)
    CHECK((sim.theta[t].array() == sim.theta[0].array()).all());
}

TEST_CASE("ability innovations have variance near sigma2 w") {
  SimConfig cfg;
  cfg.p = 2000;
  cfg.T = 2;
  cfg.players_per_game = 10;
  cfg.games_per_period = 0;
  cfg.sigma2 = 100.0;
  cfg.w = 0.5;
  cfg.seed = 7;
  const SimulatedData sim = simulate_dataset(cfg);
  double ss = 0.0;
  for (int i = 0; i < cfg.p; ++i) {
    const double d = sim.theta[1][i] - sim.theta[0][i];
    ss += d * d;
  }
  const double var = ss / cfg.p;
  CHECK(var == Catch::Approx(cfg.sigma2 * cfg.w).epsilon(0.10));
}

TEST_CASE("initial abilities have variance near sigma2 v0") {
  SimConfig cfg;
  cfg.p = 4000;
  cfg.T = 1;
  cfg.players_per_game = 10;
  cfg.games_per_period = 0;
  cfg.sigma2 = 100.0;
  cfg.v0 = 10.0;
  cfg.seed = 8;
  const SimulatedData sim = simulate_dataset(cfg);
  double ss = 0.0;
  for (int i = 0; i < cfg.p; ++i) ss += sim.theta[0][i] * sim.theta[0][i];
  CHECK(ss / cfg.p == Catch::Approx(cfg.sigma2 * cfg.v0).epsilon(0.10));
}

TEST_CASE("identity-transform scores are game-centered abilities plus noise") {
  SimConfig cfg;
  cfg.p = 30;
  cfg.T = 3;
  cfg.players_per_game = 6;
  cfg.games_per_period = 5;
  cfg.yj_lambda = 1.0;
  cfg.seed = 9;
  const SimulatedData sim = simulate_dataset(cfg);
  // With the identity transform, psi == observed scores; each game's noise
  // e = obs - centered(theta) should be iid N(0, sigma2): check its scale.
  double ss = 0.0;
  int n = 0;
  for (int t = 0; t < cfg.T; ++t) {
    for (const auto& g : sim.raw.periods[t].games) {
      const int k = g.size();
      double mean_theta = 0.0;
      for (int a : g.athletes) mean_theta += sim.theta[t][a];
      mean_theta /= k;
      for (int j = 0; j < k; ++j) {
        const double e = g.obs[j] - (sim.theta[t][g.athletes[j]] - mean_theta);
        ss += e * e;
        ++n;
      }
    }
  }
  CHECK(ss / n == Catch::Approx(cfg.sigma2).epsilon(0.25));
}

TEST_CASE("transformed-scale scores in psi are mean zero per game") {
  SimConfig cfg;
  cfg.p = 30;
  cfg.T = 2;
  cfg.players_per_game = 8;
  cfg.games_per_period = 6;
  cfg.yj_lambda = 0.7;
  cfg.seed = 10;
  const SimulatedData sim = simulate_dataset(cfg);
  for (int t = 0; t < cfg.T; ++t) {
    for (std::size_t g = 0; g < sim.psi[t].size(); ++g) {
      // Observed scores are the inverse transform of the psi draws.
      const auto& game = sim.raw.periods[t].games[g];
      for (std::size_t j = 0; j < game.obs.size(); ++j)
        CHECK(game.obs[j] ==
              Catch::Approx(inverse_yeo_johnson(sim.psi[t][g][j],
                                                cfg.yj_lambda))
                  .margin(1e-9));
    }
  }
}

TEST_CASE("yeo-johnson projection recovers a known generating lambda") {
  // Build tau as the identity on a spline basis, then project the pairs
  // (raw, tau(centered)) where raw = inverse_yj(centered): the projection
  // should find the generating lambda.
  const double lam_true = 0.7;
  std::vector<double> centered, raw;
  for (int i = 0; i <= 400; ++i) {
    const double psi = -40.0 + 80.0 * i / 400.0;
    centered.push_back(psi);
    raw.push_back(inverse_yeo_johnson(psi, lam_true));
  }
  const KnotConfig knots = make_knot_config(centered, 3, 3);
  const TransformParams ident = identity_lambda(knots, knots.range(), knots.lo);
  // target = tau(centered) = centered; raw run through yj(lam_true) matches.
  const YjProjection proj = project_to_yeo_johnson(ident, raw, centered);
  CHECK(proj.lambda == Catch::Approx(lam_true).margin(5e-3));
  CHECK(proj.scale == Catch::Approx(1.0).margin(1e-2));
}

TEST_CASE("recovery replication on an identity cell recovers lambda") {
  SimConfig cfg;
  cfg.p = 40;
  cfg.T = 8;
  cfg.players_per_game = 8;
  cfg.games_per_period = 10;
  cfg.yj_lambda = 1.0;
  cfg.seed = 5;
  FitOptions opts;
  const RecoveryResult res = run_recovery_replication(cfg, opts);
  REQUIRE(res.ok);
  CHECK(res.lambda_error == std::abs(res.lambda_fit - cfg.yj_lambda));
  CHECK(res.lambda_error < 0.15);  // loose bound for a small, fast cell
  CHECK(res.w_hat > 0.0);
  CHECK(res.sigma_hat > 0.0);
}
