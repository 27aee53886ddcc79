#ifndef DLMT_PREPROCESS_HPP_
#define DLMT_PREPROCESS_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlmt/data.hpp"

namespace dlmt {

enum class PeriodScheme { annual, biannual, quarterly, bimonthly, monthly };

inline std::string to_string(PeriodScheme s) {
  switch (s) {
    case PeriodScheme::annual: return "annual";
    case PeriodScheme::biannual: return "biannual";
    case PeriodScheme::quarterly: return "quarterly";
    case PeriodScheme::bimonthly: return "bimonthly";
    case PeriodScheme::monthly: return "monthly";
  }
  return "annual";
}

inline PeriodScheme period_scheme_from_string(const std::string& s) {
  if (s == "annual") return PeriodScheme::annual;
  if (s == "biannual") return PeriodScheme::biannual;
  if (s == "quarterly") return PeriodScheme::quarterly;
  if (s == "bimonthly") return PeriodScheme::bimonthly;
  if (s == "monthly") return PeriodScheme::monthly;
  throw std::invalid_argument("unknown period scheme: " + s);
}

// Calendar buckets are consecutive integers, so that empty intermediate
// periods can be represented.
inline long period_ordinal(const Date& d, PeriodScheme s) {
  switch (s) {
    case PeriodScheme::annual: return d.year;
    case PeriodScheme::biannual: return 2L * d.year + (d.month > 6 ? 1 : 0);
    case PeriodScheme::quarterly: return 4L * d.year + (d.month - 1) / 3;
    case PeriodScheme::bimonthly: return 6L * d.year + (d.month - 1) / 2;
    case PeriodScheme::monthly: return 12L * d.year + (d.month - 1);
  }
  return d.year;
}

// Groups raw results into games and contiguous rating periods.  Scores stay
// raw (uncentered); athletes are indexed in first-appearance order of the
// chronologically sorted input.
inline Dataset assign_rating_periods(const std::vector<RawResult>& results,
                                     PeriodScheme scheme,
                                     Mode mode = Mode::multi_competitor) {
  if (results.empty())
    throw std::invalid_argument("assign_rating_periods: no results");

  // Stable sort by date keeps input order within a day reproducible.
  std::vector<const RawResult*> sorted;
  sorted.reserve(results.size());
  for (const auto& r : results) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RawResult* a, const RawResult* b) {
                     return a->date < b->date;
                   });

  Dataset d;
  d.mode = mode;
  std::map<std::string, int> index;
  auto athlete = [&](const std::string& id) {
    auto [it, inserted] = index.emplace(id, d.num_athletes());
    if (inserted) d.athlete_ids.push_back(id);
    return it->second;
  };

  const long first = period_ordinal(sorted.front()->date, scheme);
  const long last = period_ordinal(sorted.back()->date, scheme);
  d.periods.resize(last - first + 1);
  for (long o = first; o <= last; ++o)
    d.periods[o - first].index = static_cast<int>(o - first + 1);

  // Games are keyed by (period, game_id); rows in one game keep input order.
  std::map<std::pair<long, std::string>, Game> games;
  std::vector<std::pair<long, std::string>> game_order;
  for (const RawResult* r : sorted) {
    if (!std::isfinite(r->score))
      throw std::invalid_argument("non-finite score for athlete " +
                                  r->athlete_id + " in game " + r->game_id);
    const auto key = std::make_pair(period_ordinal(r->date, scheme), r->game_id);
    auto [it, inserted] = games.emplace(key, Game{});
    if (inserted) game_order.push_back(key);
    const int a = athlete(r->athlete_id);
    for (int existing : it->second.athletes) {
      if (existing == a)
        throw std::invalid_argument("duplicate athlete " + r->athlete_id +
                                    " in game " + r->game_id);
    }
    it->second.athletes.push_back(a);
    it->second.obs.push_back(r->score);
  }
  for (const auto& key : game_order)
    d.periods[key.first - first].games.push_back(std::move(games.at(key)));

  if (mode == Mode::head_to_head) {
    for (const auto& p : d.periods)
      for (const auto& g : p.games)
        if (g.size() != 2)
          throw std::invalid_argument(
              "head_to_head game with " + std::to_string(g.size()) +
              " athletes in period " + std::to_string(p.index));
  }
  return d;
}

// Optional score pre-scaling, applied before centering/differencing.
inline void pre_scale(Dataset& d, PreScalePolicy policy) {
  if (d.centered)
    throw std::logic_error("pre_scale must run before centering");
  if (policy == PreScalePolicy::none) {
    d.pre_scale = policy;
    return;
  }
  for (auto& p : d.periods) {
    for (auto& g : p.games) {
      if (policy == PreScalePolicy::log_then_center) {
        for (auto& y : g.obs) {
          if (!(y > 0.0))
            throw std::invalid_argument(
                "log pre-scaling requires strictly positive scores");
          y = std::log(y);
        }
      } else {  // unit_variance_per_game
        if (g.size() < 3) continue;  // scale factor left at 1
        const double mean =
            std::accumulate(g.obs.begin(), g.obs.end(), 0.0) / g.obs.size();
        double ss = 0.0;
        for (double y : g.obs) ss += (y - mean) * (y - mean);
        const double sd = std::sqrt(ss / (g.obs.size() - 1));
        if (sd > 0.0)
          for (auto& y : g.obs) y = mean + (y - mean) / sd;
      }
    }
  }
  d.pre_scale = policy;
}

// Subtracts the within-game mean from each score.  Singleton games carry no
// relative information after centering and are dropped (counted).
inline void center_games(Dataset& d) {
  if (d.mode != Mode::multi_competitor)
    throw std::logic_error("center_games: dataset is not multi_competitor");
  if (d.centered) return;
  for (auto& p : d.periods) {
    std::vector<Game> kept;
    kept.reserve(p.games.size());
    for (auto& g : p.games) {
      if (g.size() < 2) {
        ++d.dropped_singletons;
        continue;
      }
      const double mean =
          std::accumulate(g.obs.begin(), g.obs.end(), 0.0) / g.obs.size();
      for (auto& y : g.obs) y -= mean;
      kept.push_back(std::move(g));
    }
    p.games = std::move(kept);
  }
  d.centered = true;
}

// Head-to-head: each game becomes one observation, first athlete's score
// minus the second's.
inline void diff_scores(Dataset& d) {
  if (d.mode != Mode::head_to_head)
    throw std::logic_error("diff_scores: dataset is not head_to_head");
  if (d.centered) return;
  for (auto& p : d.periods) {
    for (auto& g : p.games) {
      if (g.size() != 2 || g.obs.size() != 2)
        throw std::invalid_argument("head_to_head game without 2 athletes");
      g.obs = {g.obs[0] - g.obs[1]};
    }
  }
  d.centered = true;
}

// Full preprocessing pipeline, in the order scale -> center/difference.
inline Dataset preprocess(const std::vector<RawResult>& results,
                          PeriodScheme scheme, Mode mode,
                          PreScalePolicy policy = PreScalePolicy::none) {
  Dataset d = assign_rating_periods(results, scheme, mode);
  pre_scale(d, policy);
  if (mode == Mode::multi_competitor)
    center_games(d);
  else
    diff_scores(d);
  return d;
}

}  // namespace dlmt

#endif  // DLMT_PREPROCESS_HPP_
