// csipred: data generation, training, prediction, evaluation, tuning and the
// four-model comparison.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csipred/config.hpp"
#include "csipred/errors.hpp"
#include "csipred/experiment.hpp"
#include "csipred/synthchan.hpp"

namespace fs = std::filesystem;
using namespace csipred;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kDiverged = 3 };

struct Common {
  std::string config_path;
  std::int64_t seed = -1;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--config", c.config_path, "key = value config file");
  cmd->add_option("--seed", c.seed, "run seed (overrides the config)");
  cmd->add_option("--out", c.out, out_help)->required();
  cmd->add_option("--set", c.overrides, "override one config key: key=value");
}

void log(const std::string& msg) { std::cerr << "csipred: " << msg << '\n'; }

ExperimentConfig resolve(const Common& c, const char* seed_key = "seed") {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{}
                                               : ExperimentConfig::load(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed >= 0) cfg.set(seed_key, std::to_string(c.seed));
  cfg.validate();
  return cfg;
}

fs::path out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

PreparedData load_prepared(const ExperimentConfig& cfg) {
  CleaningReport report;
  CsiSeries series = load_dataset(cfg, &report);
  if (!report.empty()) log("cleaning: " + report.to_text());
  return prepare(series, cfg, report);
}

std::string loss_csv(const Predictor& p) {
  std::string out = "feature,epoch,loss\n";
  for (const auto& m : p.models) {
    for (std::size_t e = 0; e < m.loss_history.size(); ++e) {
      out += std::to_string(m.feature) + ',' + std::to_string(e + 1) + ',' +
             format_double(m.loss_history[e]) + '\n';
    }
  }
  return out;
}

int cmd_gen_data(const Common& c) {
  const ExperimentConfig cfg = resolve(c, "synth.seed");
  CsiSeries s = generate_fading(cfg.fading());
  s.track = cfg.get("data.track");
  save_csi(c.out, s);
  std::cout << "rows=" << s.length() * s.antenna_count() << " antennas=" << s.antenna_count()
            << " config_digest=" << cfg.digest() << '\n';
  return kOk;
}

int cmd_train(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path dir = out_dir(c.out);
  write_file(dir / "config.txt", cfg.to_text());
  const PreparedData data = load_prepared(cfg);
  if (!data.cleaning.empty()) write_file(dir / "cleaning.txt", data.cleaning.to_text());
  log("training " + to_string(cfg.model()) + " on " + std::to_string(data.features.size()) +
      " feature series, dataset " + data.digest());
  const Predictor p = train_predictor(cfg.model(), data, cfg, cfg.seed());
  const Checkpoint cp = p.to_checkpoint();
  cp.save(dir / "model.ckpt");
  write_file(dir / "loss.csv", loss_csv(p));
  std::cout << "checkpoint=" << (dir / "model.ckpt").string()
            << " digest=" << file_digest(dir / "model.ckpt") << '\n';
  return kOk;
}

int cmd_predict(const Common& c, const std::string& checkpoint, const std::string& split) {
  ExperimentConfig cfg = resolve(c);
  if (!split.empty()) cfg.set("eval.split", split);
  const Predictor p = Predictor::from_checkpoint(Checkpoint::load(checkpoint));
  const PreparedData data = load_prepared(cfg);
  const SplitForecast f = forecast_split(p, data, parse_split_name(cfg.get("eval.split")));
  write_file(c.out, format_predictions(f));
  std::cout << "predictions=" << c.out << " digest=" << file_digest(c.out) << '\n';
  return kOk;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, const std::string& predictions,
                 const std::string& split) {
  ExperimentConfig cfg = resolve(c);
  if (!split.empty()) cfg.set("eval.split", split);
  if (checkpoint.empty() == predictions.empty()) {
    throw ConfigError("evaluate needs exactly one of --checkpoint or --predictions");
  }
  const fs::path dir = out_dir(c.out);
  const PreparedData data = load_prepared(cfg);
  const SplitName which = parse_split_name(cfg.get("eval.split"));
  std::vector<MetricReport> reports;
  if (!checkpoint.empty()) {
    const Predictor p = Predictor::from_checkpoint(Checkpoint::load(checkpoint));
    reports = evaluate_forecast(forecast_split(p, data, which), to_string(p.kind), data.track,
                                p.seed, p.config_digest);
  } else {
    const SplitForecast f = attach_predictions(truth_only(data, which), read_file(predictions));
    reports = evaluate_forecast(f, "predictions", data.track, cfg.seed(), cfg.digest());
  }
  write_file(dir / "metrics.csv", reports_to_csv(reports));
  write_file(dir / "metrics.json", reports_to_json(reports));
  const auto& all = reports.back();
  std::cout << "nmse=" << format_double(all.nmse) << " nmse_db=" << format_double(all.nmse_db)
            << " cosine=" << format_double(all.cosine) << " windows=" << all.windows << '\n';
  return kOk;
}

int cmd_tune(const Common& c, const std::string& grid_path) {
  const ExperimentConfig base = resolve(c);
  const ParamGrid grid = parse_grid(read_file(grid_path));
  {
    ExperimentConfig probe = base;
    for (const auto& [key, values] : grid.axes) {
      for (const auto& v : values) probe.set(key, v);
    }
  }
  const fs::path dir = out_dir(c.out);
  CleaningReport report;
  const CsiSeries series = load_dataset(base, &report);
  const GridResult result = grid_search(grid, [&](const GridCell& cell) {
    ExperimentConfig cfg = base;
    for (const auto& [k, v] : cell) cfg.set(k, v);
    cfg.validate();
    const PreparedData data = prepare(series, cfg, report);
    const Predictor p = train_predictor(cfg.model(), data, cfg, cfg.seed());
    const auto reports = evaluate_forecast(forecast_split(p, data, SplitName::validation),
                                           to_string(p.kind), data.track, p.seed, cfg.digest());
    std::string label;
    for (const auto& [k, v] : cell) label += k + "=" + v + " ";
    log("cell " + label + "validation nmse=" + format_double(reports.back().nmse));
    return TrialOutcome{reports.back().nmse, p.parameter_count()};
  });
  ExperimentConfig best = base;
  for (const auto& [k, v] : result.best) best.set(k, v);
  write_file(dir / "trials.csv", trials_to_csv(result));
  write_file(dir / "best.txt", best.to_text());
  std::cout << "best_validation_nmse=" << format_double(result.best_outcome.validation_nmse)
            << " best_config=" << (dir / "best.txt").string() << '\n';
  return kOk;
}

int cmd_compare(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path dir = out_dir(c.out);
  write_file(dir / "config.txt", cfg.to_text());
  const PreparedData data = load_prepared(cfg);
  const auto persist = [&dir](const CompareResult& r) {
    write_file(dir / "compare.csv", compare_to_csv(r));
  };
  const CompareResult result = run_compare(data, cfg, persist, log);
  write_file(dir / "compare.csv", compare_to_csv(result));
  write_file(dir / "compare_summary.csv", compare_summary_csv(result));
  write_file(dir / "compare.json", compare_to_json(result));
  std::cout << compare_summary_csv(result);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSI prediction toolkit: RNN, BiLSTM, decomposable NP and hybrid forecasters"};
  app.require_subcommand(1);

  Common gen, train, predict, evaluate, tune, compare;
  std::string checkpoint, predictions, split, grid_path;

  auto* g = app.add_subcommand("gen-data", "write a synthetic fading track as CSI CSV");
  add_common(g, gen, "output CSV path");
  auto* t = app.add_subcommand("train", "train the configured model");
  add_common(t, train, "output directory");
  auto* p = app.add_subcommand("predict", "write forecasts for one split");
  add_common(p, predict, "output predictions CSV");
  p->add_option("--checkpoint", checkpoint, "trained model checkpoint")->required();
  p->add_option("--split", split, "train | validation | test");
  auto* e = app.add_subcommand("evaluate", "NMSE and cosine similarity reports");
  add_common(e, evaluate, "output directory");
  e->add_option("--checkpoint", checkpoint, "trained model checkpoint");
  e->add_option("--predictions", predictions, "predictions CSV (t,antenna,step,re,im)");
  e->add_option("--split", split, "train | validation | test");
  auto* u = app.add_subcommand("tune", "grid search on the validation split");
  add_common(u, tune, "output directory");
  u->add_option("--grid", grid_path, "grid file: key = v1, v2, ...")->required();
  auto* c = app.add_subcommand("compare", "train and compare all four predictors");
  add_common(c, compare, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? kOk : kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen_data(gen);
    if (t->parsed()) return cmd_train(train);
    if (p->parsed()) return cmd_predict(predict, checkpoint, split);
    if (e->parsed()) return cmd_evaluate(evaluate, checkpoint, predictions, split);
    if (u->parsed()) return cmd_tune(tune, grid_path);
    if (c->parsed()) return cmd_compare(compare);
  } catch (const ConfigError& err) {
    log(std::string("config error: ") + err.what());
    return kUsage;
  } catch (const DivergenceError& err) {
    log(std::string("divergence: ") + err.what());
    return kDiverged;
  } catch (const std::exception& err) {
    log(std::string("error: ") + err.what());
    return kData;
  }
  return kUsage;
}
