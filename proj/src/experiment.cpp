#include "csipred/experiment.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

#include "csipred/errors.hpp"
#include "csipred/synthchan.hpp"
#include "json.hpp"

namespace csipred {

namespace {

constexpr std::string_view kPredictionsHeader = "t,antenna,step,re,im";

const std::vector<ModelKind> kTableOrder = {ModelKind::hybrid, ModelKind::bilstm, ModelKind::rnn,
                                            ModelKind::np};

Architecture hybrid_source(const ExperimentConfig& config) {
  return config.get("hybrid.source") == "bilstm" ? Architecture::bilstm : Architecture::rnn;
}

ModelKind kind_of(Architecture a) { return a == Architecture::bilstm ? ModelKind::bilstm : ModelKind::rnn; }

void check_compatible(const Predictor& p, const PreparedData& data) {
  if (p.lags != data.lags || p.horizon != data.horizon) {
    throw ContractError("model expects " + std::to_string(p.lags) + "->" +
                        std::to_string(p.horizon) + " windows but the dataset provides " +
                        std::to_string(data.lags) + "->" + std::to_string(data.horizon));
  }
  if (p.models.size() != data.features.size()) {
    throw ContractError("model has " + std::to_string(p.models.size()) +
                        " feature models but the dataset has " +
                        std::to_string(data.features.size()) + " feature series");
  }
  for (std::size_t i = 0; i < p.models.size(); ++i) {
    if (p.models[i].feature != data.features[i].feature) {
      throw ContractError("feature order differs between model and dataset");
    }
  }
}

std::vector<double> split_csv_line(const std::string& line, std::size_t expected, std::size_t lineno) {
  std::vector<double> out;
  std::istringstream is(line);
  std::string cell;
  while (std::getline(is, cell, ',')) {
    try {
      out.push_back(parse_double(cell));
    } catch (const DataError&) {
      throw ParseError("bad number '" + cell + "'", lineno);
    }
  }
  if (out.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " columns", lineno);
  }
  return out;
}

}  // namespace

std::string to_string(SplitName s) {
  switch (s) {
    case SplitName::train: return "train";
    case SplitName::validation: return "validation";
    case SplitName::test: return "test";
  }
  return "?";
}

SplitName parse_split_name(const std::string& text) {
  if (text == "train") return SplitName::train;
  if (text == "validation") return SplitName::validation;
  if (text == "test") return SplitName::test;
  throw ConfigError("unknown split '" + text + "'");
}

const SupervisedWindowSet& FeatureData::split(SplitName s) const {
  switch (s) {
    case SplitName::train: return windows.train;
    case SplitName::validation: return windows.validation;
    case SplitName::test: return windows.test;
  }
  return windows.test;
}

std::string PreparedData::digest() const {
  std::string text = "track=" + track + "\n";
  for (const auto& f : features) {
    text += "feature=" + std::to_string(f.feature) + "\n" + f.scaler.to_text() + "\n" +
            f.windows.train.digest() + "\n" + f.windows.validation.digest() + "\n" +
            f.windows.test.digest() + "\n";
  }
  return sha256_hex(text);
}

CsiSeries load_dataset(const ExperimentConfig& config, CleaningReport* report) {
  if (config.get("data.source") == "synth") {
    CsiSeries s = generate_fading(config.fading());
    s.track = config.get("data.track");
    if (report != nullptr) *report = {};
    return s;
  }
  RawCsi raw = read_csi_records(config.get("data.path"));
  raw.sample_interval = config.get_double("data.sample_interval");
  raw.track = config.get("data.track");
  CleanResult cleaned = clean(raw);
  if (report != nullptr) *report = cleaned.report;
  return std::move(cleaned.series);
}

PreparedData prepare(const CsiSeries& series, const ExperimentConfig& config,
                     const CleaningReport& cleaning) {
  series.validate();
  PreparedData data;
  data.track = series.track;
  data.lags = config.get_size("window.lags");
  data.horizon = config.get_size("window.horizon");
  data.cleaning = cleaning;
  const std::size_t stride = config.get_size("train.window_stride");
  const std::size_t min_segment = data.lags + data.horizon + 1;
  for (const auto& f : complex_to_features(series)) {
    const NormalizedSplit ns = normalize(split_chronological(f, config.fractions(), min_segment));
    FeatureData fd;
    fd.feature = f.feature;
    fd.antenna = f.antenna;
    fd.component = f.component;
    fd.scaler = ns.scaler;
    fd.windows.train = make_windows(ns.split.train, data.lags, data.horizon).strided(stride);
    fd.windows.validation = make_windows(ns.split.validation, data.lags, data.horizon);
    fd.windows.test = make_windows(ns.split.test, data.lags, data.horizon);
    data.features.push_back(std::move(fd));
  }
  return data;
}

DenseMatrix FeatureModel::predict(const SupervisedWindowSet& windows) const {
  if (windows.empty()) {
    return DenseMatrix(0, static_cast<Eigen::Index>(windows.horizon));
  }
  if (recurrent) return recurrent->predict_batch(windows.inputs);
  if (np) return np->predict_batch(windows);
  if (hybrid) return hybrid_predict_batch(*hybrid, windows);
  throw ContractError("feature model holds no trained model");
}

std::size_t FeatureModel::parameter_count() const {
  if (recurrent) return recurrent->params().size();
  if (np) return np->params().size();
  if (hybrid) return hybrid->rnn.params().size() + hybrid->np.params().size();
  return 0;
}

std::size_t Predictor::parameter_count() const {
  std::size_t n = 0;
  for (const auto& m : models) n += m.parameter_count();
  return n;
}

Checkpoint Predictor::to_checkpoint() const {
  Checkpoint cp;
  auto& head = cp.add("predictor");
  head.set("kind", to_string(kind));
  head.set("track", track);
  head.set("lags", static_cast<long long>(lags));
  head.set("horizon", static_cast<long long>(horizon));
  head.set("seed", static_cast<long long>(seed));
  head.set("config_digest", config_digest.empty() ? "-" : config_digest);
  head.set("features", static_cast<long long>(models.size()));
  for (const auto& m : models) {
    auto& f = cp.add("feature");
    f.set("id", static_cast<long long>(m.feature));
    f.set("shift", m.scaler.shift);
    f.set("scale", m.scaler.scale);
    if (m.recurrent) {
      cp.sections.push_back(m.recurrent->to_section());
    } else if (m.np) {
      cp.sections.push_back(m.np->to_section());
    } else if (m.hybrid) {
      for (auto& s : m.hybrid->to_checkpoint().sections) cp.sections.push_back(std::move(s));
    }
  }
  return cp;
}

Predictor Predictor::from_checkpoint(const Checkpoint& cp) {
  if (cp.sections.empty() || cp.sections.front().kind() != "predictor") {
    throw DataError("checkpoint does not start with a predictor section");
  }
  const auto& head = cp.sections.front();
  Predictor p;
  p.kind = parse_model_kind(head.get("kind"));
  p.track = head.get("track");
  p.lags = static_cast<std::size_t>(head.get_int("lags"));
  p.horizon = static_cast<std::size_t>(head.get_int("horizon"));
  p.seed = static_cast<std::uint64_t>(head.get_int("seed"));
  p.config_digest = head.get("config_digest") == "-" ? "" : head.get("config_digest");
  const auto count = static_cast<std::size_t>(head.get_int("features"));
  std::size_t i = 1;
  auto next = [&](const std::string& kind) -> const CheckpointSection& {
    if (i >= cp.sections.size() || cp.sections[i].kind() != kind) {
      throw DataError("checkpoint: expected a '" + kind + "' section at position " +
                      std::to_string(i + 1));
    }
    return cp.sections[i++];
  };
  for (std::size_t k = 0; k < count; ++k) {
    const auto& f = next("feature");
    FeatureModel m;
    m.feature = static_cast<int>(f.get_int("id"));
    m.scaler.shift = f.get_double("shift");
    m.scaler.scale = f.get_double("scale");
    switch (p.kind) {
      case ModelKind::rnn:
      case ModelKind::bilstm:
        m.recurrent = RecurrentModel::from_section(next("recurrent"));
        break;
      case ModelKind::np:
        m.np = NpModel::from_section(next("np"));
        break;
      case ModelKind::hybrid: {
        Checkpoint sub;
        sub.sections.push_back(next("hybrid"));
        sub.sections.push_back(next("recurrent"));
        sub.sections.push_back(next("np"));
        m.hybrid = HybridModel::from_checkpoint(sub);
        break;
      }
    }
    p.models.push_back(std::move(m));
  }
  if (i != cp.sections.size()) {
    throw DataError("checkpoint: unexpected trailing sections");
  }
  return p;
}

std::string Predictor::digest() const { return sha256_hex(to_checkpoint().serialize()); }

std::uint64_t feature_seed(std::uint64_t seed, int feature) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(feature);
}

Predictor train_predictor(ModelKind kind, const PreparedData& data, const ExperimentConfig& config,
                          std::uint64_t seed, const Predictor* rnn_source) {
  config.validate();
  Predictor p;
  p.kind = kind;
  p.track = data.track;
  p.lags = data.lags;
  p.horizon = data.horizon;
  p.seed = seed;
  p.config_digest = config.digest();
  if (rnn_source != nullptr) {
    if (kind != ModelKind::hybrid) {
      throw ContractError("a stage-1 source only applies to hybrid training");
    }
    check_compatible(*rnn_source, data);
    if (rnn_source->kind != kind_of(hybrid_source(config)) || rnn_source->seed != seed) {
      throw ContractError("stage-1 source must be a " + to_string(kind_of(hybrid_source(config))) +
                          " predictor trained with the same seed");
    }
  }
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    const FeatureData& fd = data.features[i];
    const std::uint64_t s = feature_seed(seed, fd.feature);
    FeatureModel m;
    m.feature = fd.feature;
    m.scaler = fd.scaler;
    try {
      switch (kind) {
        case ModelKind::rnn:
        case ModelKind::bilstm: {
          const Architecture arch = kind == ModelKind::rnn ? Architecture::rnn : Architecture::bilstm;
          RecurrentModel model(config.recurrent(arch), s);
          m.loss_history = train_recurrent(model, fd.windows.train, s).loss_history;
          m.recurrent = std::move(model);
          break;
        }
        case ModelKind::np: {
          NpModel model(config.np(false), s);
          m.loss_history = np_train(model, fd.windows.train, nullptr, s).loss_history;
          m.np = std::move(model);
          break;
        }
        case ModelKind::hybrid: {
          const RecurrentModel* pre =
              rnn_source != nullptr ? &*rnn_source->models[i].recurrent : nullptr;
          HybridBuild b = build_hybrid(fd.windows, config.recurrent(hybrid_source(config)),
                                       config.np(true), s, pre);
          m.loss_history = std::move(b.np_history.loss_history);
          m.hybrid = std::move(b.model);
          break;
        }
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError(to_string(kind) + " (feature " + std::to_string(fd.feature) + ")",
                            e.epoch(), e.batch());
    }
    p.models.push_back(std::move(m));
  }
  return p;
}

SplitForecast truth_only(const PreparedData& data, SplitName split) {
  SplitForecast out;
  for (std::size_t a = 0; a + 1 < data.features.size(); a += 2) {
    const FeatureData& re = data.features[a];
    const FeatureData& im = data.features[a + 1];
    const SupervisedWindowSet& wr = re.split(split);
    const SupervisedWindowSet& wi = im.split(split);
    if (wr.times != wi.times) {
      throw DataError("real and imaginary windows are misaligned");
    }
    out.antenna_ids.push_back(re.antenna);
    out.origins.push_back(wr.times);
    std::vector<ComplexVector> truth(wr.size(), ComplexVector(data.horizon));
    for (std::size_t w = 0; w < wr.size(); ++w) {
      for (std::size_t h = 0; h < data.horizon; ++h) {
        const auto r = static_cast<Eigen::Index>(w);
        const auto c = static_cast<Eigen::Index>(h);
        truth[w][h] = {re.scaler.invert(wr.labels(r, c)), im.scaler.invert(wi.labels(r, c))};
      }
    }
    out.truth.push_back(std::move(truth));
  }
  out.predicted.resize(out.truth.size());
  return out;
}

SplitForecast forecast_split(const Predictor& predictor, const PreparedData& data, SplitName split) {
  check_compatible(predictor, data);
  SplitForecast out = truth_only(data, split);
  for (std::size_t a = 0; a < out.antenna_ids.size(); ++a) {
    const FeatureModel& mr = predictor.models[2 * a];
    const FeatureModel& mi = predictor.models[2 * a + 1];
    const DenseMatrix pr = mr.predict(data.features[2 * a].split(split));
    const DenseMatrix pi = mi.predict(data.features[2 * a + 1].split(split));
    auto& pred = out.predicted[a];
    pred.assign(static_cast<std::size_t>(pr.rows()), ComplexVector(data.horizon));
    for (Eigen::Index w = 0; w < pr.rows(); ++w) {
      for (Eigen::Index h = 0; h < pr.cols(); ++h) {
        pred[static_cast<std::size_t>(w)][static_cast<std::size_t>(h)] = {
            mr.scaler.invert(pr(w, h)), mi.scaler.invert(pi(w, h))};
      }
    }
  }
  return out;
}

std::vector<MetricReport> evaluate_forecast(const SplitForecast& forecast, const std::string& model,
                                            const std::string& track, std::uint64_t seed,
                                            const std::string& config_digest) {
  std::vector<MetricReport> reports;
  MetricValue all_nmse;
  MetricValue all_cos;
  double nmse_sum = 0.0;
  double cos_sum = 0.0;
  for (std::size_t a = 0; a < forecast.antenna_ids.size(); ++a) {
    const MetricValue n = nmse(forecast.predicted[a], forecast.truth[a]);
    const MetricValue c = cosine_similarity(forecast.predicted[a], forecast.truth[a]);
    reports.push_back(make_report(model, track, seed,
                                  "antenna " + std::to_string(forecast.antenna_ids[a]), n, c,
                                  config_digest));
    nmse_sum += n.value;
    cos_sum += c.value;
    all_nmse.windows += n.windows;
    all_nmse.excluded += n.excluded;
    all_cos.windows += c.windows;
    all_cos.excluded += c.excluded;
  }
  const auto count = static_cast<double>(forecast.antenna_ids.size());
  all_nmse.value = nmse_sum / count;
  all_cos.value = cos_sum / count;
  reports.push_back(make_report(model, track, seed, "all", all_nmse, all_cos, config_digest));
  return reports;
}

std::string format_predictions(const SplitForecast& forecast) {
  std::string out(kPredictionsHeader);
  out += '\n';
  const std::size_t windows = forecast.origins.empty() ? 0 : forecast.origins.front().size();
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t a = 0; a < forecast.antenna_ids.size(); ++a) {
      const ComplexVector& v = forecast.predicted[a][w];
      for (std::size_t h = 0; h < v.size(); ++h) {
        out += std::to_string(forecast.origins[a][w]) + ',' +
               std::to_string(forecast.antenna_ids[a]) + ',' + std::to_string(h + 1) + ',' +
               format_double(v[h].real()) + ',' + format_double(v[h].imag()) + '\n';
      }
    }
  }
  return out;
}

SplitForecast attach_predictions(const SplitForecast& truth_frame, const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || (line != kPredictionsHeader &&
                                  line != std::string(kPredictionsHeader) + "\r")) {
    throw ParseError("predictions header must be '" + std::string(kPredictionsHeader) + "'", 1);
  }
  std::map<std::tuple<std::int64_t, int, std::size_t>, std::complex<double>> values;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line, 5, lineno);
    const auto t = static_cast<std::int64_t>(cells[0]);
    const int antenna = static_cast<int>(cells[1]);
    const auto step = static_cast<std::size_t>(cells[2]);
    if (static_cast<double>(t) != cells[0] || static_cast<double>(antenna) != cells[1] ||
        static_cast<double>(step) != cells[2] || step == 0) {
      throw ParseError("t, antenna and step must be integers (step >= 1)", lineno);
    }
    if (!values.emplace(std::tuple{t, antenna, step}, std::complex<double>{cells[3], cells[4]}).second) {
      throw ParseError("duplicate prediction row", lineno);
    }
  }
  SplitForecast out = truth_frame;
  std::size_t used = 0;
  for (std::size_t a = 0; a < out.antenna_ids.size(); ++a) {
    out.predicted[a].assign(out.truth[a].size(), ComplexVector{});
    for (std::size_t w = 0; w < out.truth[a].size(); ++w) {
      ComplexVector& v = out.predicted[a][w];
      v.resize(out.truth[a][w].size());
      for (std::size_t h = 0; h < v.size(); ++h) {
        const auto it = values.find({out.origins[a][w], out.antenna_ids[a], h + 1});
        if (it == values.end()) {
          throw DataError("predictions missing t=" + std::to_string(out.origins[a][w]) +
                          " antenna=" + std::to_string(out.antenna_ids[a]) +
                          " step=" + std::to_string(h + 1));
        }
        v[h] = it->second;
        ++used;
      }
    }
  }
  if (used != values.size()) {
    throw DataError("predictions contain " + std::to_string(values.size() - used) +
                    " rows outside the evaluated split");
  }
  return out;
}

CompareResult run_compare(const PreparedData& data, const ExperimentConfig& config,
                          const std::function<void(const CompareResult&)>& on_row,
                          const ProgressFn& progress) {
  config.validate();
  const SplitName split = parse_split_name(config.get("eval.split"));
  const Architecture source = hybrid_source(config);
  CompareResult result;
  result.dataset_digest = data.digest();
  auto log = [&progress](const std::string& msg) {
    if (progress) progress(msg);
  };
  for (const std::uint64_t seed : config.compare_seeds()) {
    std::map<ModelKind, MetricReport> rows;
    std::map<ModelKind, Predictor> trained;
    auto record = [&](ModelKind kind, const Predictor& p) {
      const auto reports = evaluate_forecast(forecast_split(p, data, split), to_string(kind),
                                             data.track, seed, config.digest());
      rows[kind] = reports.back();
      result.rows.push_back({seed, reports.back()});
      log("seed " + std::to_string(seed) + " " + to_string(kind) +
          ": nmse=" + format_double(reports.back().nmse));
      if (on_row) on_row(result);
    };
    for (ModelKind kind : {ModelKind::rnn, ModelKind::bilstm, ModelKind::np}) {
      log("seed " + std::to_string(seed) + ": training " + to_string(kind));
      trained.emplace(kind, train_predictor(kind, data, config, seed));
      record(kind, trained.at(kind));
    }
    log("seed " + std::to_string(seed) + ": training hybrid");
    record(ModelKind::hybrid, train_predictor(ModelKind::hybrid, data, config, seed,
                                              &trained.at(kind_of(source))));
    // Present each finished seed in table order.
    result.rows.resize(result.rows.size() - kTableOrder.size());
    for (ModelKind kind : kTableOrder) result.rows.push_back({seed, rows.at(kind)});
    if (on_row) on_row(result);
  }
  for (ModelKind kind : kTableOrder) {
    std::vector<double> n;
    std::vector<double> db;
    std::vector<double> c;
    for (const auto& row : result.rows) {
      if (row.report.model != to_string(kind)) continue;
      n.push_back(row.report.nmse);
      db.push_back(row.report.nmse_db);
      c.push_back(row.report.cosine);
    }
    result.medians.emplace_back(to_string(kind), median(n), median(db), median(c));
  }
  return result;
}

std::string compare_to_csv(const CompareResult& result) {
  std::string out = "seed,model,track,nmse,nmse_db,cosine,windows,dataset_digest\n";
  for (const auto& row : result.rows) {
    const auto& r = row.report;
    out += std::to_string(row.seed) + ',' + r.model + ',' + r.track + ',' + format_double(r.nmse) +
           ',' + format_double(r.nmse_db) + ',' + format_double(r.cosine) + ',' +
           std::to_string(r.windows) + ',' + result.dataset_digest + '\n';
  }
  return out;
}

std::string compare_summary_csv(const CompareResult& result) {
  std::string out = "model,median_nmse,median_nmse_db,median_cosine\n";
  for (const auto& [model, n, db, c] : result.medians) {
    out += model + ',' + format_double(n) + ',' + format_double(db) + ',' + format_double(c) + '\n';
  }
  return out;
}

std::string compare_to_json(const CompareResult& result) {
  nlohmann::ordered_json j;
  j["dataset_digest"] = result.dataset_digest;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : result.rows) {
    j["rows"].push_back({{"seed", row.seed},
                         {"model", row.report.model},
                         {"track", row.report.track},
                         {"nmse", row.report.nmse},
                         {"nmse_db", row.report.nmse_db},
                         {"cosine", row.report.cosine},
                         {"windows", row.report.windows}});
  }
  j["medians"] = nlohmann::ordered_json::array();
  for (const auto& [model, n, db, c] : result.medians) {
    j["medians"].push_back(
        {{"model", model}, {"nmse", n}, {"nmse_db", db}, {"cosine", c}});
  }
  return j.dump(2) + "\n";
}

}  // namespace csipred
