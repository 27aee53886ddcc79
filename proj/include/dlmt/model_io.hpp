#ifndef DLMT_MODEL_IO_HPP_
#define DLMT_MODEL_IO_HPP_

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlmt/data.hpp"
#include "dlmt/fitting.hpp"
#include "dlmt/preprocess.hpp"
#include "dlmt/rng.hpp"

namespace dlmt {

using json = nlohmann::json;

constexpr int kModelFormatVersion = 1;

// Raised for malformed input data (maps to CLI exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal that round-trips binary64.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

enum class Orientation { higher_is_better, lower_is_better };

inline std::string to_string(Orientation o) {
  return o == Orientation::higher_is_better ? "higher_is_better"
                                            : "lower_is_better";
}

inline Orientation orientation_from_string(const std::string& s) {
  if (s == "higher_is_better") return Orientation::higher_is_better;
  if (s == "lower_is_better") return Orientation::lower_is_better;
  throw std::invalid_argument("unknown orientation: " + s);
}

// Everything a run needs beyond the data itself; serialized into ModelFile
// so that `update` can validate chronology and reuse the same settings.
struct RunConfig {
  Mode mode = Mode::multi_competitor;
  PeriodScheme period_scheme = PeriodScheme::biannual;
  Orientation orientation = Orientation::higher_is_better;
  int degree = 3;
  int n_interior = 3;
  double train_fraction = 2.0 / 3.0;
  PreScalePolicy pre_scale = PreScalePolicy::none;
  PriorVariant prior_variant = PriorVariant::truncated_normal;
  Hyperparams hyper;
  NelderMeadOptions nm;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
      throw std::invalid_argument("train_fraction must be in (0, 1]");
    hyper.validate();
  }
};

inline json to_json(const RunConfig& c) {
  json j;
  j["mode"] = to_string(c.mode);
  j["period_scheme"] = to_string(c.period_scheme);
  j["orientation"] = to_string(c.orientation);
  j["degree"] = c.degree;
  j["n_interior"] = c.n_interior;
  j["train_fraction"] = c.train_fraction;
  j["pre_scale"] = to_string(c.pre_scale);
  j["prior_variant"] = to_string(c.prior_variant);
  j["hyperparams"] = {{"v0", c.hyper.v0},       {"a0", c.hyper.a0},
                      {"b0", c.hyper.b0},       {"s_w", c.hyper.s_w},
                      {"s_lambda", c.hyper.s_lambda},
                      {"exact_mode", c.hyper.exact_mode}};
  j["optimizer"] = {{"max_iter", c.nm.max_iter},
                    {"x_tol", c.nm.x_tol},
                    {"f_tol", c.nm.f_tol}};
  j["seed"] = c.seed;
  j["rng"] = Rng::kAlgorithm;
  return j;
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode"));
  if (j.contains("period_scheme"))
    c.period_scheme = period_scheme_from_string(j.at("period_scheme"));
  if (j.contains("orientation"))
    c.orientation = orientation_from_string(j.at("orientation"));
  c.degree = j.value("degree", 3);
  c.n_interior = j.value("n_interior", 3);
  c.train_fraction = j.value("train_fraction", 2.0 / 3.0);
  if (j.contains("pre_scale"))
    c.pre_scale = pre_scale_from_string(j.at("pre_scale"));
  if (j.contains("prior_variant"))
    c.prior_variant = prior_variant_from_string(j.at("prior_variant"));
  if (j.contains("hyperparams")) {
    const auto& h = j.at("hyperparams");
    c.hyper.v0 = h.value("v0", 10.0);
    c.hyper.a0 = h.value("a0", 0.1);
    c.hyper.b0 = h.value("b0", 0.1);
    c.hyper.s_w = h.value("s_w", 1.0);
    c.hyper.s_lambda = h.value("s_lambda", 0.0);
    c.hyper.exact_mode = h.value("exact_mode", false);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.nm.max_iter = o.value("max_iter", 0);
    c.nm.x_tol = o.value("x_tol", 1e-6);
    c.nm.f_tol = o.value("f_tol", 1e-8);
  }
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
  return c;
}

// --- CSV ingestion -------------------------------------------------------

inline double parse_score(const std::string& s, int line) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    std::string hint;
    if (s.find(':') != std::string::npos)
      hint = " (times like H:MM:SS must be pre-converted to seconds)";
    throw DataError("line " + std::to_string(line) +
                    ": score is not a decimal number: '" + s + "'" + hint);
  }
  return v;
}

// CSV with header date,game_id,athlete_id,score.  Duplicate
// (game_id, athlete_id) pairs are rejected with both row numbers.
inline std::vector<RawResult> load_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "date,game_id,athlete_id,score")
    throw DataError(path + ": expected header 'date,game_id,athlete_id,score'");

  std::vector<RawResult> out;
  std::map<std::pair<std::string, std::string>, int> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4)
      throw DataError("line " + std::to_string(lineno) +
                      ": expected 4 columns, got " +
                      std::to_string(fields.size()));
    RawResult r;
    try {
      r.date = parse_date(fields[0]);
    } catch (const std::invalid_argument& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
    r.game_id = fields[1];
    r.athlete_id = fields[2];
    r.score = parse_score(fields[3], lineno);
    const auto key = std::make_pair(r.game_id, r.athlete_id);
    auto [it, inserted] = seen.emplace(key, lineno);
    if (!inserted)
      throw DataError("line " + std::to_string(lineno) +
                      ": duplicate athlete '" + r.athlete_id + "' in game '" +
                      r.game_id + "' (first at line " +
                      std::to_string(it->second) + ")");
    out.push_back(std::move(r));
  }
  if (out.empty()) throw DataError(path + ": no data rows");
  return out;
}

inline void write_results_csv(const std::string& path, const Dataset& raw,
                              PeriodScheme scheme) {
  // Synthetic dates: period t lands in its own bucket of the scheme.
  auto date_for_period = [&](int t) {
    Date d{2000, 1, 15};
    const int step = scheme == PeriodScheme::annual      ? 12
                     : scheme == PeriodScheme::biannual  ? 6
                     : scheme == PeriodScheme::quarterly ? 3
                     : scheme == PeriodScheme::bimonthly ? 2
                                                         : 1;
    const int months = (t - 1) * step;
    d.year += months / 12;
    d.month += months % 12;
    if (d.month > 12) {
      d.month -= 12;
      ++d.year;
    }
    return d;
  };
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "date,game_id,athlete_id,score\n";
  for (const auto& p : raw.periods) {
    const std::string date = format_date(date_for_period(p.index));
    for (std::size_t gi = 0; gi < p.games.size(); ++gi) {
      const auto& g = p.games[gi];
      const std::string game_id =
          "t" + std::to_string(p.index) + "g" + std::to_string(gi + 1);
      for (int j = 0; j < g.size(); ++j) {
        out << date << ',' << game_id << ',' << raw.athlete_ids[g.athletes[j]]
            << ',' << format_double(g.obs[j]) << '\n';
      }
    }
  }
}

// --- Model persistence ---------------------------------------------------

struct ModelFile {
  RunConfig config;
  FittedModel model;
  std::vector<std::string> athlete_ids;
  int last_period = 0;
  Date last_date;  // latest result date seen, anchors `update` chronology
};

inline json to_json(const ModelFile& mf) {
  const FittedModel& m = mf.model;
  if (m.h.exact_mode)
    throw std::invalid_argument(
        "exact_mode models are not persistable: their covariance is not "
        "diagonal, and ModelFile stores per-athlete scalars only");
  json j;
  j["format_version"] = kModelFormatVersion;
  j["run_config"] = to_json(mf.config);
  j["mode"] = to_string(m.mode);
  j["athletes"] = mf.athlete_ids;
  j["last_period"] = mf.last_period;
  j["last_date"] = format_date(mf.last_date);
  j["knots"] = {{"degree", m.transform.knots.degree},
                {"interior", m.transform.knots.interior_knots},
                {"lo", m.transform.knots.lo},
                {"hi", m.transform.knots.hi}};
  j["transform"] = {{"lambda0", m.transform.lambda0},
                    {"lambda", m.transform.lambda},
                    {"range_c", m.transform.range_c}};
  j["w_hat"] = m.w_hat;
  j["prior_variant"] = to_string(m.variant);
  j["T_train"] = m.T_train;
  j["train_fraction"] = m.train_fraction;
  j["hyperparams"] = {{"v0", m.h.v0},
                      {"a0", m.h.a0},
                      {"b0", m.h.b0},
                      {"s_w", m.h.s_w},
                      {"s_lambda", m.h.s_lambda},
                      {"alpha", m.h.alpha},
                      {"exact_mode", m.h.exact_mode}};
  j["sigma2_posterior"] = {{"a_T", m.a_T()}, {"b_T", m.b_T()}};
  j["log_predictive"] = m.filter.log_predictive;

  json periods = json::array();
  for (std::size_t t = 1; t < m.filter.states.size(); ++t) {
    const auto& s = m.filter.states[t];
    json pj;
    pj["t"] = s.t;
    pj["a"] = s.a;
    pj["b"] = s.b;
    pj["filtered_m"] = std::vector<double>(s.m.data(), s.m.data() + s.m.size());
    std::vector<double> v(s.m.size());
    for (Eigen::Index i = 0; i < s.m.size(); ++i) v[i] = s.V(i, i);
    pj["filtered_v"] = v;
    const auto& sm = m.smoothed[t - 1];
    pj["smoothed_m"] =
        std::vector<double>(sm.m.data(), sm.m.data() + sm.m.size());
    for (Eigen::Index i = 0; i < sm.m.size(); ++i) v[i] = sm.V(i, i);
    pj["smoothed_v"] = v;
    periods.push_back(std::move(pj));
  }
  j["periods"] = std::move(periods);

  j["diagnostics"] = {{"converged", m.diagnostics.converged},
                      {"iterations", m.diagnostics.iterations},
                      {"evaluations", m.diagnostics.evaluations},
                      {"objective", m.diagnostics.objective},
                      {"clamp_count", m.diagnostics.clamp_count},
                      {"jacobian_floor_hits", m.diagnostics.jacobian_floor_hits},
                      {"warning", m.diagnostics.warning}};
  return j;
}

inline void save_model(const std::string& path, const ModelFile& mf) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_json(mf).dump(2) << '\n';
}

inline ModelFile model_from_json(const json& j) {
  if (!j.contains("format_version") ||
      j.at("format_version").get<int>() != kModelFormatVersion)
    throw DataError("model file: unsupported or missing format_version");

  ModelFile mf;
  mf.config = run_config_from_json(j.at("run_config"));
  mf.athlete_ids = j.at("athletes").get<std::vector<std::string>>();
  mf.last_period = j.at("last_period").get<int>();
  mf.last_date = parse_date(j.at("last_date").get<std::string>());

  FittedModel& m = mf.model;
  m.mode = mode_from_string(j.at("mode"));
  m.w_hat = j.at("w_hat").get<double>();
  m.variant = prior_variant_from_string(j.at("prior_variant"));
  m.T_train = j.at("T_train").get<int>();
  m.train_fraction = j.at("train_fraction").get<double>();

  const auto& k = j.at("knots");
  m.transform.knots.degree = k.at("degree").get<int>();
  m.transform.knots.interior_knots =
      k.at("interior").get<std::vector<double>>();
  m.transform.knots.lo = k.at("lo").get<double>();
  m.transform.knots.hi = k.at("hi").get<double>();
  const auto& tr = j.at("transform");
  m.transform.lambda0 = tr.at("lambda0").get<double>();
  m.transform.lambda = tr.at("lambda").get<std::vector<double>>();
  m.transform.range_c = tr.at("range_c").get<double>();
  if (static_cast<int>(m.transform.lambda.size()) !=
      m.transform.knots.basis_size())
    throw DataError("model file: lambda length does not match basis size");
  for (double l : m.transform.lambda)
    if (l < 0.0) throw DataError("model file: negative lambda");

  const auto& h = j.at("hyperparams");
  m.h.v0 = h.at("v0").get<double>();
  m.h.a0 = h.at("a0").get<double>();
  m.h.b0 = h.at("b0").get<double>();
  m.h.s_w = h.at("s_w").get<double>();
  m.h.s_lambda = h.at("s_lambda").get<double>();
  m.h.alpha = h.at("alpha").get<std::vector<double>>();
  m.h.exact_mode = h.at("exact_mode").get<bool>();
  m.h.validate();

  const int p = static_cast<int>(mf.athlete_ids.size());
  m.filter.w = m.w_hat;
  m.filter.exact_mode = false;
  m.filter.log_predictive = j.at("log_predictive").get<double>();
  m.filter.states.push_back(init_state(p, m.h));
  for (const auto& pj : j.at("periods")) {
    FilterState s;
    s.t = pj.at("t").get<int>();
    s.a = pj.at("a").get<double>();
    s.b = pj.at("b").get<double>();
    const auto fm = pj.at("filtered_m").get<std::vector<double>>();
    const auto fv = pj.at("filtered_v").get<std::vector<double>>();
    if (static_cast<int>(fm.size()) != p || static_cast<int>(fv.size()) != p)
      throw DataError("model file: trajectory size mismatch");
    s.m = Eigen::Map<const Eigen::VectorXd>(fm.data(), p);
    s.V = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) {
      if (fv[i] < 0.0) throw DataError("model file: negative variance");
      s.V(i, i) = fv[i];
    }
    m.filter.states.push_back(std::move(s));

    SmoothedState sm;
    sm.t = s.t;
    const auto smm = pj.at("smoothed_m").get<std::vector<double>>();
    const auto smv = pj.at("smoothed_v").get<std::vector<double>>();
    sm.m = Eigen::Map<const Eigen::VectorXd>(smm.data(), p);
    sm.V = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) sm.V(i, i) = smv[i];
    m.smoothed.push_back(std::move(sm));
  }
  if (m.filter.states.back().t != mf.last_period)
    throw DataError("model file: last_period does not match trajectory");

  const auto& dg = j.at("diagnostics");
  m.diagnostics.converged = dg.at("converged").get<bool>();
  m.diagnostics.iterations = dg.at("iterations").get<int>();
  m.diagnostics.evaluations = dg.at("evaluations").get<int>();
  m.diagnostics.objective = dg.at("objective").get<double>();
  m.diagnostics.clamp_count = dg.at("clamp_count").get<int>();
  m.diagnostics.jacobian_floor_hits =
      dg.at("jacobian_floor_hits").get<int>();
  m.diagnostics.warning = dg.at("warning").get<std::string>();
  return mf;
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed model file: " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid model file: " + e.what());
  }
}

}  // namespace dlmt

#endif  // DLMT_MODEL_IO_HPP_
