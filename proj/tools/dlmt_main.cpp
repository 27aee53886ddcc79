// dlmt: rating engine CLI.
//
// Subcommands: fit | update | rate | predict | evaluate | simulate |
// transform-inspect.  Exit codes: 0 success, 2 data error, 3 fit completed
// with a warning (optimizer nonconvergence), 4 internal error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>

#include "dlmt/evaluation.hpp"
#include "dlmt/fitting.hpp"
#include "dlmt/model_io.hpp"
#include "dlmt/preprocess.hpp"
#include "dlmt/simulation.hpp"

namespace {

using namespace dlmt;

constexpr int kExitOk = 0;
constexpr int kExitDataError = 2;
constexpr int kExitFitWarning = 3;
constexpr int kExitInternal = 4;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed JSON: " + e.what());
  }
  return j;
}

Date max_date(const std::vector<RawResult>& rows) {
  Date d = rows.front().date;
  for (const auto& r : rows)
    if (d < r.date) d = r.date;
  return d;
}

// Re-runs the deterministic step-2 pass (transform, filter, smooth) of a
// loaded model over a dataset, restoring the per-period predictive stats
// that are not persisted.
FittedModel rebuild_trajectory(const ModelFile& mf, const Dataset& centered) {
  if (centered.mode != mf.model.mode)
    throw DataError("mode mismatch: model is " + to_string(mf.model.mode) +
                    ", data is " + to_string(centered.mode));
  if (centered.athlete_ids != mf.athlete_ids)
    throw DataError("data does not match the model's athlete roster");
  FittedModel m = mf.model;
  TransformedData td = transform_dataset(centered, m.transform);
  m.filter = run_filter(td.data, m.w_hat, m.h);
  m.smoothed = rts_smooth(m.filter, m.w_hat);
  return m;
}

Dataset load_and_preprocess(const std::string& path, const RunConfig& cfg) {
  const auto rows = load_results_csv(path);
  try {
    return preprocess(rows, cfg.period_scheme, cfg.mode, cfg.pre_scale);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

int cmd_fit(const std::string& data_path, const std::string& config_path,
            const std::string& out_path) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = run_config_from_json(read_json_file(config_path));

  const auto rows = load_results_csv(data_path);
  Dataset centered;
  try {
    centered = preprocess(rows, cfg.period_scheme, cfg.mode, cfg.pre_scale);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }

  const int T_train = train_periods(centered.num_periods(), cfg.train_fraction);
  const auto train_scores = centered.all_observations(T_train);
  const KnotConfig knots = make_knot_config(train_scores, cfg.degree, cfg.n_interior);

  FitOptions opts;
  opts.train_fraction = cfg.train_fraction;
  opts.variant = cfg.prior_variant;
  opts.nm = cfg.nm;
  FittedModel model = fit_map(centered, knots, cfg.hyper, opts);

  ModelFile mf;
  mf.config = cfg;
  mf.model = std::move(model);
  mf.athlete_ids = centered.athlete_ids;
  mf.last_period = centered.periods.back().index;
  mf.last_date = max_date(rows);
  save_model(out_path, mf);

  const auto& m = mf.model;
  std::cout << "fit: " << centered.num_athletes() << " athletes, "
            << centered.num_periods() << " periods ("
            << m.T_train << " train), "
            << centered.num_observations() << " observations\n"
            << "w_hat = " << format_double(m.w_hat)
            << ", sigma_hat = " << format_double(m.sigma_hat()) << "\n"
            << "objective = " << format_double(m.diagnostics.objective)
            << " after " << m.diagnostics.iterations << " iterations ("
            << m.diagnostics.evaluations << " evaluations)\n";
  if (centered.dropped_singletons > 0)
    std::cout << "dropped " << centered.dropped_singletons
              << " singleton game(s)\n";
  if (m.diagnostics.clamp_count > 0)
    std::cout << "warning: " << m.diagnostics.clamp_count
              << " observation(s) outside the spline domain were clamped\n";
  if (!m.diagnostics.converged) {
    std::cout << "warning: " << m.diagnostics.warning << "\n";
    return kExitFitWarning;
  }
  return kExitOk;
}

int cmd_update(const std::string& model_path, const std::string& data_path,
               const std::string& out_path) {
  ModelFile mf = load_model(model_path);
  const auto rows = load_results_csv(data_path);

  const long last_ord = period_ordinal(mf.last_date, mf.config.period_scheme);
  for (const auto& r : rows) {
    const long ord = period_ordinal(r.date, mf.config.period_scheme);
    if (ord <= last_ord)
      throw DataError("update data must be strictly after the model's last "
                      "rating period (" + format_date(mf.last_date) + ")");
  }

  Dataset incoming;
  try {
    incoming = preprocess(rows, mf.config.period_scheme, mf.config.mode,
                          mf.config.pre_scale);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }

  // Map incoming athletes onto the stored roster, appending new ones.
  std::vector<std::string> ids = mf.athlete_ids;
  std::vector<int> remap(incoming.num_athletes());
  for (int i = 0; i < incoming.num_athletes(); ++i) {
    const auto& id = incoming.athlete_ids[i];
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) {
      remap[i] = static_cast<int>(ids.size());
      ids.push_back(id);
    } else {
      remap[i] = static_cast<int>(it - ids.begin());
    }
  }

  const long first_ord =
      period_ordinal(rows[std::min_element(rows.begin(), rows.end(),
                                           [](const RawResult& a,
                                              const RawResult& b) {
                                             return a.date < b.date;
                                           }) -
                          rows.begin()]
                         .date,
                     mf.config.period_scheme);

  FittedModel updated = mf.model;
  // Calendar gaps become empty periods; each incoming period is appended in
  // order with its athlete indices rewritten to the extended roster.
  int next_index = mf.last_period;
  for (long ord = last_ord + 1; ord < first_ord; ++ord) {
    RatingPeriod empty;
    empty.index = ++next_index;
    updated = fast_update(updated, empty, static_cast<int>(ids.size()));
  }
  for (const auto& p : incoming.periods) {
    RatingPeriod period = p;
    period.index = ++next_index;
    for (auto& g : period.games)
      for (auto& a : g.athletes) a = remap[a];
    updated = fast_update(updated, period, static_cast<int>(ids.size()));
  }

  mf.model = std::move(updated);
  mf.athlete_ids = std::move(ids);
  mf.last_period = next_index;
  mf.last_date = max_date(rows);
  save_model(out_path, mf);
  std::cout << "update: appended " << incoming.num_periods()
            << " period(s), roster now " << mf.athlete_ids.size()
            << " athletes, last period " << mf.last_period << "\n";
  return kExitOk;
}

int cmd_rate(const std::string& model_path, const std::string& out_path,
             bool smoothed, int period, double interval) {
  ModelFile mf = load_model(model_path);
  const FittedModel& m = mf.model;
  const int T = m.filter.states.back().t;
  if (period <= 0) period = T;
  if (period < 1 || period > T)
    throw DataError("period " + std::to_string(period) +
                    " out of range [1, " + std::to_string(T) + "]");

  Eigen::VectorXd mean;
  Eigen::MatrixXd V;
  double a, b;
  if (smoothed) {
    const auto& s = m.smoothed[period - 1];
    mean = s.m;
    V = s.V;
    a = m.a_T();  // sigma^2 posterior conditions on all data
    b = m.b_T();
  } else {
    const auto& s = m.filter.states[period];
    mean = s.m;
    V = s.V;
    a = s.a;
    b = s.b;
  }
  const auto summary = posterior_summary(mean, V, a, b, interval);

  std::vector<int> order(summary.size());
  std::iota(order.begin(), order.end(), 0);
  const bool ascending =
      mf.config.orientation == Orientation::lower_is_better;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return ascending ? summary[x].mean < summary[y].mean
                     : summary[x].mean > summary[y].mean;
  });

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  out << "rank,athlete_id,mean,sd,lo,hi\n";
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& s = summary[order[r]];
    out << (r + 1) << ',' << mf.athlete_ids[order[r]] << ','
        << format_double(s.mean) << ',' << format_double(s.sd) << ','
        << format_double(s.lo) << ',' << format_double(s.hi) << '\n';
  }
  std::cout << "rate: wrote " << summary.size() << " athletes ("
            << (smoothed ? "smoothed" : "filtered") << ", period " << period
            << ")\n";
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, int from) {
  ModelFile mf = load_model(model_path);
  Dataset centered = load_and_preprocess(data_path, mf.config);
  FittedModel m = rebuild_trajectory(mf, centered);
  if (from <= 0) from = m.T_train + 1;
  const auto preds = predict_test_games(m, centered, from);

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  out << "period,game,obs,predicted,observed,predicted_rank,observed_rank\n";
  for (const auto& g : preds) {
    for (int j = 0; j < g.n; ++j) {
      out << g.t << ',' << g.game << ',' << j << ','
          << format_double(g.predicted[j]) << ','
          << format_double(g.observed[j]) << ','
          << format_double(g.predicted_ranks[j]) << ','
          << format_double(g.observed_ranks[j]) << '\n';
    }
  }
  std::cout << "predict: wrote " << preds.size()
            << " game(s) from period " << from << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& out_path, const std::string& qq_path,
                 int from) {
  ModelFile mf = load_model(model_path);
  Dataset centered = load_and_preprocess(data_path, mf.config);
  FittedModel m = rebuild_trajectory(mf, centered);
  if (from <= 0) from = m.T_train + 1;

  const auto preds = predict_test_games(m, centered, from);
  const auto qq = standardized_residuals(m, centered, from);

  json metrics;
  metrics["first_test_period"] = from;
  metrics["games"] = static_cast<int>(preds.size());
  metrics["residuals"] = static_cast<int>(qq.size());
  metrics["qq_correlation"] = qq_correlation(qq);
  if (m.mode == Mode::multi_competitor) {
    const auto ws = weighted_spearman(preds);
    metrics["weighted_spearman"] = {{"rho", ws.rho},
                                    {"games_used", ws.games_used},
                                    {"games_excluded", ws.games_excluded}};
  } else {
    metrics["win_accuracy"] = win_accuracy(preds);
  }

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  out << metrics.dump(2) << '\n';

  if (!qq_path.empty()) {
    std::ofstream qout(qq_path);
    if (!qout) throw DataError("cannot write " + qq_path);
    qout << "residual,normal_quantile\n";
    for (const auto& p : qq)
      qout << format_double(p.residual) << ',' << format_double(p.quantile)
           << '\n';
  }
  std::cout << "evaluate: " << preds.size() << " game(s), qq_correlation = "
            << format_double(qq_correlation(qq)) << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& truth_path) {
  SimConfig cfg;
  if (!config_path.empty()) {
    const json j = read_json_file(config_path);
    cfg.p = j.value("p", cfg.p);
    cfg.T = j.value("T", cfg.T);
    cfg.players_per_game = j.value("players_per_game", cfg.players_per_game);
    cfg.games_per_period = j.value("games_per_period", cfg.games_per_period);
    cfg.v0 = j.value("v0", cfg.v0);
    cfg.sigma2 = j.value("sigma2", cfg.sigma2);
    cfg.w = j.value("w", cfg.w);
    cfg.yj_lambda = j.value("yj_lambda", cfg.yj_lambda);
    cfg.seed = j.value("seed", cfg.seed);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }

  const SimulatedData sim = simulate_dataset(cfg);
  write_results_csv(out_path, sim.raw, PeriodScheme::biannual);

  if (!truth_path.empty()) {
    json truth;
    truth["config"] = {{"p", cfg.p},
                       {"T", cfg.T},
                       {"players_per_game", cfg.players_per_game},
                       {"games_per_period", cfg.games_per_period},
                       {"v0", cfg.v0},
                       {"sigma2", cfg.sigma2},
                       {"w", cfg.w},
                       {"yj_lambda", cfg.yj_lambda},
                       {"seed", cfg.seed}};
    truth["rng"] = Rng::kAlgorithm;
    truth["resampled_games"] = sim.resampled_games;
    json theta = json::array();
    for (const auto& th : sim.theta)
      theta.push_back(std::vector<double>(th.data(), th.data() + th.size()));
    truth["theta"] = std::move(theta);
    std::ofstream out(truth_path);
    if (!out) throw DataError("cannot write " + truth_path);
    out << truth.dump(2) << '\n';
  }
  std::cout << "simulate: wrote " << sim.raw.num_observations()
            << " observations over " << cfg.T << " periods\n";
  return kExitOk;
}

int cmd_transform_inspect(const std::string& model_path,
                          const std::string& out_path) {
  ModelFile mf = load_model(model_path);
  const TransformParams& tr = mf.model.transform;
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  out << "y,tau,dtau_dy\n";
  constexpr int kPoints = 512;
  for (int i = 0; i < kPoints; ++i) {
    const double y =
        tr.knots.lo + (tr.knots.hi - tr.knots.lo) * i / (kPoints - 1);
    out << format_double(y) << ',' << format_double(transform(tr, y)) << ','
        << format_double(transform_jacobian(tr, y)) << '\n';
  }
  std::cout << "transform-inspect: wrote " << kPoints << " points\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-varying latent ability ratings from scored game results"};
  app.require_subcommand(1);

  std::string data_path, config_path, model_path, out_path, qq_path,
      truth_path;
  bool smoothed = false;
  int period = 0, from = 0;
  double interval = 0.95;

  auto* fit = app.add_subcommand("fit", "Fit a model from a results CSV");
  fit->add_option("--data", data_path, "results CSV")->required();
  fit->add_option("--config", config_path, "run config JSON");
  fit->add_option("--out", out_path, "output model JSON")->required();

  auto* update =
      app.add_subcommand("update", "Append new periods to a fitted model");
  update->add_option("--model", model_path, "model JSON")->required();
  update->add_option("--data", data_path, "new results CSV")->required();
  update->add_option("--out", out_path, "output model JSON")->required();

  auto* rate = app.add_subcommand("rate", "Ranked rating table");
  rate->add_option("--model", model_path, "model JSON")->required();
  rate->add_option("--out", out_path, "output CSV")->required();
  rate->add_flag("--smoothed", smoothed, "use the smoothed trajectory");
  rate->add_option("--period", period, "rating period (default: last)");
  rate->add_option("--interval", interval, "credible mass (default 0.95)");

  auto* predict =
      app.add_subcommand("predict", "One-step predictions for test games");
  predict->add_option("--model", model_path, "model JSON")->required();
  predict->add_option("--data", data_path, "results CSV")->required();
  predict->add_option("--out", out_path, "output CSV")->required();
  predict->add_option("--from", from,
                      "first test period (default: first held-out)");

  auto* evaluate = app.add_subcommand("evaluate", "Held-out metrics");
  evaluate->add_option("--model", model_path, "model JSON")->required();
  evaluate->add_option("--data", data_path, "results CSV")->required();
  evaluate->add_option("--out", out_path, "metrics JSON")->required();
  evaluate->add_option("--qq", qq_path, "Q-Q plot CSV");
  evaluate->add_option("--from", from,
                       "first test period (default: first held-out)");

  auto* simulate = app.add_subcommand("simulate", "Generate synthetic data");
  simulate->add_option("--config", config_path, "simulation config JSON");
  simulate->add_option("--out", out_path, "output results CSV")->required();
  simulate->add_option("--truth", truth_path, "ground-truth JSON");

  auto* inspect = app.add_subcommand(
      "transform-inspect", "Tabulate the learned score transform");
  inspect->add_option("--model", model_path, "model JSON")->required();
  inspect->add_option("--out", out_path, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(data_path, config_path, out_path);
    if (update->parsed()) return cmd_update(model_path, data_path, out_path);
    if (rate->parsed())
      return cmd_rate(model_path, out_path, smoothed, period, interval);
    if (predict->parsed())
      return cmd_predict(model_path, data_path, out_path, from);
    if (evaluate->parsed())
      return cmd_evaluate(model_path, data_path, out_path, qq_path, from);
    if (simulate->parsed())
      return cmd_simulate(config_path, out_path, truth_path);
    if (inspect->parsed())
      return cmd_transform_inspect(model_path, out_path);
  } catch (const dlmt::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
