#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "dlmt/preprocess.hpp"
#include "dlmt/rng.hpp"

using namespace dlmt;

namespace {

RawResult row(const std::string& date, const std::string& game,
              const std::string& athlete, double score) {
  return RawResult{parse_date(date), game, athlete, score};
}

}  // namespace

TEST_CASE("game centering subtracts the within-game mean") {
  const std::vector<RawResult> rows = {
      row("2001-02-01", "g1", "a", 10.0), row("2001-02-01", "g1", "b", 20.0),
      row("2001-02-01", "g1", "c", 30.0), row("2001-02-01", "g2", "a", 5.0),
      row("2001-02-01", "g2", "b", 5.0)};
  Dataset d = preprocess(rows, PeriodScheme::annual, Mode::multi_competitor);
  REQUIRE(d.periods.size() == 1);
  REQUIRE(d.periods[0].games.size() == 2);
  CHECK(d.periods[0].games[0].obs == std::vector<double>{-10.0, 0.0, 10.0});
  CHECK(d.periods[0].games[1].obs == std::vector<double>{0.0, 0.0});
}

TEST_CASE("centered games sum to zero") {
  Rng rng(21);
  std::vector<RawResult> rows;
  double max_abs = 0.0;
  for (int g = 0; g < 50; ++g) {
    const int k = 2 + rng.uniform_int(9);
    for (int i = 0; i < k; ++i) {
      const double y = 1000.0 * rng.normal();
      max_abs = std::max(max_abs, std::abs(y));
      rows.push_back(row("2001-02-01", "g" + std::to_string(g),
                         "a" + std::to_string(g) + "_" + std::to_string(i), y));
    }
  }
  Dataset d = preprocess(rows, PeriodScheme::annual, Mode::multi_competitor);
  for (const auto& g : d.periods[0].games) {
    const double s = std::accumulate(g.obs.begin(), g.obs.end(), 0.0);
    CHECK(std::abs(s) <= 1e-9 * max_abs);
  }
}

TEST_CASE("centering removes constant shifts bit-for-bit") {
  std::vector<RawResult> rows = {row("2001-02-01", "g1", "a", 12.5),
                                 row("2001-02-01", "g1", "b", -7.25),
                                 row("2001-02-01", "g1", "c", 3.0),
                                 row("2001-02-01", "g1", "d", 40.0)};
  Dataset base = preprocess(rows, PeriodScheme::annual, Mode::multi_competitor);
  for (auto& r : rows) r.score += 1024.0;  // power of two: exact arithmetic
  Dataset shifted =
      preprocess(rows, PeriodScheme::annual, Mode::multi_competitor);
  CHECK(base.periods[0].games[0].obs == shifted.periods[0].games[0].obs);
}

TEST_CASE("centering is equivariant under athlete permutation") {
  const std::vector<RawResult> fwd = {
      row("2001-02-01", "g1", "a", 1.0), row("2001-02-01", "g1", "b", 4.0),
      row("2001-02-01", "g1", "c", 10.0)};
  const std::vector<RawResult> rev = {
      row("2001-02-01", "g1", "c", 10.0), row("2001-02-01", "g1", "b", 4.0),
      row("2001-02-01", "g1", "a", 1.0)};
  Dataset df = preprocess(fwd, PeriodScheme::annual, Mode::multi_competitor);
  Dataset dr = preprocess(rev, PeriodScheme::annual, Mode::multi_competitor);
  const auto& gf = df.periods[0].games[0];
  const auto& gr = dr.periods[0].games[0];
  for (int i = 0; i < 3; ++i) {
    const std::string id = df.athlete_ids[gf.athletes[i]];
    const auto it =
        std::find_if(gr.athletes.begin(), gr.athletes.end(), [&](int a) {
          return dr.athlete_ids[a] == id;
        });
    REQUIRE(it != gr.athletes.end());
    CHECK(gf.obs[i] == gr.obs[it - gr.athletes.begin()]);
  }
}

TEST_CASE("head-to-head differencing is antisymmetric") {
  const std::vector<RawResult> rows = {row("2001-02-01", "g1", "a", 5.0),
                                       row("2001-02-01", "g1", "b", 0.0),
                                       row("2001-02-01", "g2", "c", 0.0),
                                       row("2001-02-01", "g2", "d", 5.0),
                                       row("2001-02-01", "g3", "a", 10.0),
                                       row("2001-02-01", "g3", "c", 3.0)};
  Dataset d = preprocess(rows, PeriodScheme::annual, Mode::head_to_head);
  CHECK(d.periods[0].games[0].obs == std::vector<double>{5.0});
  CHECK(d.periods[0].games[1].obs == std::vector<double>{-5.0});
  CHECK(d.periods[0].games[2].obs == std::vector<double>{7.0});
}

TEST_CASE("head-to-head swap of both rows flips the sign only") {
  const std::vector<RawResult> fwd = {row("2001-02-01", "g1", "a", 9.0),
                                      row("2001-02-01", "g1", "b", 2.0)};
  const std::vector<RawResult> rev = {row("2001-02-01", "g1", "b", 2.0),
                                      row("2001-02-01", "g1", "a", 9.0)};
  Dataset df = preprocess(fwd, PeriodScheme::annual, Mode::head_to_head);
  Dataset dr = preprocess(rev, PeriodScheme::annual, Mode::head_to_head);
  CHECK(df.periods[0].games[0].obs[0] == 7.0);
  CHECK(dr.periods[0].games[0].obs[0] == -7.0);
}

TEST_CASE("head-to-head rejects games without exactly two athletes") {
  const std::vector<RawResult> rows = {row("2001-02-01", "g1", "a", 1.0),
                                       row("2001-02-01", "g1", "b", 2.0),
                                       row("2001-02-01", "g1", "c", 3.0)};
  CHECK_THROWS_AS(preprocess(rows, PeriodScheme::annual, Mode::head_to_head),
                  std::invalid_argument);
}

TEST_CASE("biannual periods split at July 1") {
  const std::vector<RawResult> rows = {
      row("2004-01-15", "g1", "a", 1.0), row("2004-01-15", "g1", "b", 2.0),
      row("2004-08-20", "g2", "a", 1.0), row("2004-08-20", "g2", "b", 2.0)};
  Dataset d = preprocess(rows, PeriodScheme::biannual, Mode::multi_competitor);
  REQUIRE(d.periods.size() == 2);
  CHECK(d.periods[0].index == 1);
  CHECK(d.periods[1].index == 2);
  CHECK(d.periods[0].games.size() == 1);
  CHECK(d.periods[1].games.size() == 1);
}

TEST_CASE("sixteen seasons span about thirty-two biannual periods") {
  std::vector<RawResult> rows;
  for (int y = 2000; y < 2016; ++y) {
    rows.push_back(row(std::to_string(y) + "-02-01", "w" + std::to_string(y),
                       "a", 1.0));
    rows.push_back(row(std::to_string(y) + "-02-01", "w" + std::to_string(y),
                       "b", 2.0));
    rows.push_back(row(std::to_string(y) + "-09-01", "s" + std::to_string(y),
                       "a", 1.0));
    rows.push_back(row(std::to_string(y) + "-09-01", "s" + std::to_string(y),
                       "b", 2.0));
  }
  Dataset d = preprocess(rows, PeriodScheme::biannual, Mode::multi_competitor);
  CHECK(d.periods.size() == 32);
}

TEST_CASE("empty intermediate periods are preserved") {
  const std::vector<RawResult> rows = {
      row("2000-02-01", "g1", "a", 1.0), row("2000-02-01", "g1", "b", 2.0),
      row("2003-02-01", "g2", "a", 1.0), row("2003-02-01", "g2", "b", 2.0)};
  Dataset d = preprocess(rows, PeriodScheme::annual, Mode::multi_competitor);
  REQUIRE(d.periods.size() == 4);
  CHECK(d.periods[0].games.size() == 1);
  CHECK(d.periods[1].games.empty());
  CHECK(d.periods[2].games.empty());
  CHECK(d.periods[3].games.size() == 1);
}

TEST_CASE("every row lands in exactly one period and game") {
  Rng rng(22);
  std::vector<RawResult> rows;
  int n_rows = 0;
  for (int g = 0; g < 40; ++g) {
    const int year = 2000 + rng.uniform_int(5);
    const int month = 1 + rng.uniform_int(12);
    const int k = 2 + rng.uniform_int(6);
    char date[16];
    std::snprintf(date, sizeof(date), "%04d-%02d-10", year, month);
    for (int i = 0; i < k; ++i, ++n_rows)
      rows.push_back(row(date, "g" + std::to_string(g),
                         "a" + std::to_string(g) + "_" + std::to_string(i),
                         rng.normal()));
  }
  Dataset d = preprocess(rows, PeriodScheme::quarterly, Mode::multi_competitor);
  int counted = 0;
  for (std::size_t t = 0; t < d.periods.size(); ++t) {
    CHECK(d.periods[t].index == static_cast<int>(t) + 1);
    for (const auto& g : d.periods[t].games)
      counted += static_cast<int>(g.size());
  }
  CHECK(counted + d.dropped_singletons == n_rows);
  CHECK(d.dropped_singletons == 0);
}

TEST_CASE("log pre-scaling then centering") {
  const double e = std::exp(1.0);
  const std::vector<RawResult> rows = {row("2001-02-01", "g1", "a", e),
                                       row("2001-02-01", "g1", "b", e * e)};
  Dataset d = preprocess(rows, PeriodScheme::annual, Mode::multi_competitor,
                         PreScalePolicy::log_then_center);
  CHECK(d.periods[0].games[0].obs[0] == Catch::Approx(-0.5).margin(1e-12));
  CHECK(d.periods[0].games[0].obs[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("log pre-scaling rejects nonpositive scores") {
  const std::vector<RawResult> rows = {row("2001-02-01", "g1", "a", -1.0),
                                       row("2001-02-01", "g1", "b", 2.0)};
  CHECK_THROWS_AS(preprocess(rows, PeriodScheme::annual,
                             Mode::multi_competitor,
                             PreScalePolicy::log_then_center),
                  std::invalid_argument);
}

TEST_CASE("unit-variance pre-scaling leaves unit-variance games unchanged") {
  const std::vector<RawResult> rows = {row("2001-02-01", "g1", "a", -1.0),
                                       row("2001-02-01", "g1", "b", 0.0),
                                       row("2001-02-01", "g1", "c", 1.0)};
  Dataset d = preprocess(rows, PeriodScheme::annual, Mode::multi_competitor,
                         PreScalePolicy::unit_variance_per_game);
  CHECK(d.periods[0].games[0].obs[0] == Catch::Approx(-1.0).margin(1e-12));
  CHECK(d.periods[0].games[0].obs[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(d.periods[0].games[0].obs[2] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("singleton games are dropped and counted") {
  const std::vector<RawResult> rows = {row("2001-02-01", "g1", "a", 1.0),
                                       row("2001-02-01", "g2", "a", 1.0),
                                       row("2001-02-01", "g2", "b", 2.0)};
  Dataset d = preprocess(rows, PeriodScheme::annual, Mode::multi_competitor);
  CHECK(d.dropped_singletons == 1);
  CHECK(d.periods[0].games.size() == 1);
}

TEST_CASE("duplicate athlete within a game is rejected") {
  const std::vector<RawResult> rows = {row("2001-02-01", "g1", "a", 1.0),
                                       row("2001-02-01", "g1", "a", 2.0)};
  CHECK_THROWS_AS(
      preprocess(rows, PeriodScheme::annual, Mode::multi_competitor),
      std::invalid_argument);
}
