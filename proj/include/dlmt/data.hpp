#ifndef DLMT_DATA_HPP_
#define DLMT_DATA_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dlmt {

enum class Mode { multi_competitor, head_to_head };

inline std::string to_string(Mode m) {
  return m == Mode::multi_competitor ? "multi_competitor" : "head_to_head";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "multi_competitor") return Mode::multi_competitor;
  if (s == "head_to_head") return Mode::head_to_head;
  throw std::invalid_argument("unknown mode: " + s);
}

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

// Parses ISO-8601 YYYY-MM-DD.
inline Date parse_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw std::invalid_argument("bad date (want YYYY-MM-DD): " + s);
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9')
      throw std::invalid_argument("bad date (want YYYY-MM-DD): " + s);
  }
  Date d;
  d.year = std::stoi(s.substr(0, 4));
  d.month = std::stoi(s.substr(5, 2));
  d.day = std::stoi(s.substr(8, 2));
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
    throw std::invalid_argument("bad date: " + s);
  return d;
}

inline std::string format_date(const Date& d) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

// One row of input: an athlete's score in a game.
struct RawResult {
  Date date;
  std::string game_id;
  std::string athlete_id;
  double score = 0.0;
};

// A game after preprocessing.  In multi_competitor mode `obs` holds one
// (eventually game-centered) score per athlete.  In head_to_head mode
// `athletes` has exactly two entries and `obs` the single score difference
// (first minus second).
struct Game {
  std::vector<int> athletes;
  std::vector<double> obs;

  int size() const { return static_cast<int>(athletes.size()); }
};

struct RatingPeriod {
  int index = 0;  // 1-based, contiguous
  std::vector<Game> games;
};

enum class PreScalePolicy { none, log_then_center, unit_variance_per_game };

inline std::string to_string(PreScalePolicy p) {
  switch (p) {
    case PreScalePolicy::none: return "none";
    case PreScalePolicy::log_then_center: return "log_then_center";
    case PreScalePolicy::unit_variance_per_game: return "unit_variance_per_game";
  }
  return "none";
}

inline PreScalePolicy pre_scale_from_string(const std::string& s) {
  if (s == "none") return PreScalePolicy::none;
  if (s == "log_then_center") return PreScalePolicy::log_then_center;
  if (s == "unit_variance_per_game") return PreScalePolicy::unit_variance_per_game;
  throw std::invalid_argument("unknown pre_scale policy: " + s);
}

struct Dataset {
  Mode mode = Mode::multi_competitor;
  std::vector<RatingPeriod> periods;
  std::vector<std::string> athlete_ids;  // index -> id, first-appearance order
  PreScalePolicy pre_scale = PreScalePolicy::none;
  bool centered = false;  // games hold model-ready observations
  int dropped_singletons = 0;

  int num_athletes() const { return static_cast<int>(athlete_ids.size()); }
  int num_periods() const { return static_cast<int>(periods.size()); }

  int athlete_index(const std::string& id) const {
    for (std::size_t i = 0; i < athlete_ids.size(); ++i)
      if (athlete_ids[i] == id) return static_cast<int>(i);
    throw std::out_of_range("unknown athlete: " + id);
  }

  // Total observation count over periods [1, through_t].
  int num_observations(int through_t = -1) const {
    int n = 0;
    for (const auto& p : periods) {
      if (through_t >= 0 && p.index > through_t) break;
      for (const auto& g : p.games) n += static_cast<int>(g.obs.size());
    }
    return n;
  }

  std::vector<double> all_observations(int through_t = -1) const {
    std::vector<double> out;
    for (const auto& p : periods) {
      if (through_t >= 0 && p.index > through_t) break;
      for (const auto& g : p.games)
        out.insert(out.end(), g.obs.begin(), g.obs.end());
    }
    return out;
  }
};

}  // namespace dlmt

#endif  // DLMT_DATA_HPP_
