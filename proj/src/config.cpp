#include "csipred/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "csipred/checkpoint.hpp"
#include "csipred/errors.hpp"

namespace csipred {

namespace {

enum class Kind { integer, real, boolean, text };

struct KeySpec {
  ConfigKey key;
  Kind kind;
  std::vector<std::string> choices;  // for enumerated text keys
};

const std::vector<KeySpec>& specs() {
  static const std::vector<KeySpec> table = {
      {{"model", "hybrid", "np | rnn | bilstm | hybrid"}, Kind::text, {"np", "rnn", "bilstm", "hybrid"}},
      {{"seed", "1", "model initialization and shuffling seed"}, Kind::integer, {}},
      {{"compare.seeds", "1,2,3", "comma-separated seeds for compare"}, Kind::text, {}},
      {{"data.source", "synth", "synth | file"}, Kind::text, {"synth", "file"}},
      {{"data.path", "", "CSI CSV path when data.source = file"}, Kind::text, {}},
      {{"data.track", "synthetic", "track name used in reports"}, Kind::text, {}},
      {{"data.sample_interval", "0.0005", "seconds between samples"}, Kind::real, {}},
      {{"synth.seed", "1", "fading generator seed"}, Kind::integer, {}},
      {{"synth.carrier_hz", "2180000000", "carrier frequency"}, Kind::real, {}},
      {{"synth.speed_mps", "1.39", "receiver speed"}, Kind::real, {}},
      {{"synth.paths", "32", "sinusoids per antenna"}, Kind::integer, {}},
      {{"synth.antennas", "1", "antenna count"}, Kind::integer, {}},
      {{"synth.samples", "20000", "samples per antenna"}, Kind::integer, {}},
      {{"split.train", "0.8", "training fraction"}, Kind::real, {}},
      {{"split.validation", "0.1", "validation fraction"}, Kind::real, {}},
      {{"split.test", "0.1", "test fraction"}, Kind::real, {}},
      {{"window.lags", "48", "lag depth d"}, Kind::integer, {}},
      {{"window.horizon", "24", "horizon D"}, Kind::integer, {}},
      {{"train.window_stride", "1", "keep every k-th training window"}, Kind::integer, {}},
      {{"rnn.hidden", "200", "hidden units"}, Kind::integer, {}},
      {{"rnn.layers", "3", "stacked layers"}, Kind::integer, {}},
      {{"rnn.dropout", "0.2", "dropout between layers"}, Kind::real, {}},
      {{"rnn.learning_rate", "0.001", "Adam step size"}, Kind::real, {}},
      {{"rnn.epochs", "50", "training epochs"}, Kind::integer, {}},
      {{"rnn.batch_size", "32", "windows per batch"}, Kind::integer, {}},
      {{"rnn.huber_beta", "1", "Huber threshold"}, Kind::real, {}},
      {{"rnn.clip_norm", "5", "global gradient norm limit"}, Kind::real, {}},
      {{"bilstm.hidden", "200", "hidden units per direction"}, Kind::integer, {}},
      {{"bilstm.layers", "3", "stacked layers"}, Kind::integer, {}},
      {{"bilstm.dropout", "0.2", "dropout between layers"}, Kind::real, {}},
      {{"bilstm.combine", "hadamard", "hadamard | concat"}, Kind::text, {"hadamard", "concat"}},
      {{"bilstm.learning_rate", "0.001", "Adam step size"}, Kind::real, {}},
      {{"bilstm.epochs", "50", "training epochs"}, Kind::integer, {}},
      {{"bilstm.batch_size", "32", "windows per batch"}, Kind::integer, {}},
      {{"bilstm.huber_beta", "1", "Huber threshold"}, Kind::real, {}},
      {{"bilstm.clip_norm", "5", "global gradient norm limit"}, Kind::real, {}},
      {{"np.trend", "true", "enable trend"}, Kind::boolean, {}},
      {{"np.trend_mode", "discontinuous", "discontinuous | continuous"}, Kind::text, {"discontinuous", "continuous"}},
      {{"np.changepoints", "30", "changepoint count m"}, Kind::integer, {}},
      {{"np.changepoint_range", "0.9", "fraction of the training span holding changepoints"}, Kind::real, {}},
      {{"np.seasonality", "true", "enable seasonality"}, Kind::boolean, {}},
      {{"np.seasonalities", "6:365.25,3:7,6:1", "order:period_days list"}, Kind::text, {}},
      {{"np.samples_per_day", "2000", "samples mapped to one seasonal day"}, Kind::real, {}},
      {{"np.autoregression", "true", "enable AR-Net"}, Kind::boolean, {}},
      {{"np.ar_layers", "3", "AR-Net hidden layers"}, Kind::integer, {}},
      {{"np.ar_hidden", "32", "AR-Net hidden width"}, Kind::integer, {}},
      {{"np.ar_activation", "relu", "relu | linear"}, Kind::text, {"relu", "linear"}},
      {{"np.learning_rate", "0.01", "Adam step size"}, Kind::real, {}},
      {{"np.epochs", "50", "training epochs"}, Kind::integer, {}},
      {{"np.batch_size", "32", "windows per batch"}, Kind::integer, {}},
      {{"np.huber_beta", "1", "Huber threshold"}, Kind::real, {}},
      {{"hybrid.source", "rnn", "regressor source: rnn | bilstm"}, Kind::text, {"rnn", "bilstm"}},
      {{"eval.split", "test", "train | validation | test"}, Kind::text, {"train", "validation", "test"}},
  };
  return table;
}

const KeySpec& spec_for(const std::string& key) {
  for (const auto& s : specs()) {
    if (s.key.name == key) return s;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_int(const std::string& text, std::int64_t& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && !text.empty();
}

void check_value(const KeySpec& spec, const std::string& value) {
  const std::string& name = spec.key.name;
  switch (spec.kind) {
    case Kind::integer: {
      std::int64_t v = 0;
      if (!parse_int(value, v)) throw ConfigError(name + ": expected an integer, got '" + value + "'");
      break;
    }
    case Kind::real: {
      try {
        if (!std::isfinite(parse_double(value))) throw DataError("non-finite");
      } catch (const DataError&) {
        throw ConfigError(name + ": expected a finite number, got '" + value + "'");
      }
      break;
    }
    case Kind::boolean:
      if (value != "true" && value != "false") {
        throw ConfigError(name + ": expected true or false, got '" + value + "'");
      }
      break;
    case Kind::text:
      if (!spec.choices.empty() &&
          std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
        std::string allowed;
        for (const auto& c : spec.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw ConfigError(name + ": '" + value + "' is not one of " + allowed);
      }
      break;
  }
}

}  // namespace

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::np: return "np";
    case ModelKind::rnn: return "rnn";
    case ModelKind::bilstm: return "bilstm";
    case ModelKind::hybrid: return "hybrid";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "np") return ModelKind::np;
  if (text == "rnn") return ModelKind::rnn;
  if (text == "bilstm") return ModelKind::bilstm;
  if (text == "hybrid") return ModelKind::hybrid;
  throw ConfigError("unknown model '" + text + "'");
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& s : specs()) out.push_back(s.key);
    return out;
  }();
  return keys;
}

ExperimentConfig::ExperimentConfig() {
  for (const auto& s : specs()) values_[s.key.name] = s.key.default_value;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse(text);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  check_value(spec_for(key), value);
  values_[key] = value;
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  spec_for(key);
  return values_.at(key);
}

double ExperimentConfig::get_double(const std::string& key) const { return parse_double(get(key)); }

std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  std::int64_t v = 0;
  if (!parse_int(get(key), v)) throw ConfigError(key + ": not an integer");
  return v;
}

std::size_t ExperimentConfig::get_size(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) throw ConfigError(key + ": must not be negative");
  return static_cast<std::size_t>(v);
}

bool ExperimentConfig::get_bool(const std::string& key) const { return get(key) == "true"; }

std::vector<std::uint64_t> ExperimentConfig::compare_seeds() const {
  std::vector<std::uint64_t> seeds;
  std::istringstream is(get("compare.seeds"));
  std::string item;
  while (std::getline(is, item, ',')) {
    std::int64_t v = 0;
    if (!parse_int(trim(item), v) || v < 0) {
      throw ConfigError("compare.seeds: bad seed '" + trim(item) + "'");
    }
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw ConfigError("compare.seeds: no seeds given");
  return seeds;
}

std::vector<Seasonality> parse_seasonalities(const std::string& text) {
  std::vector<Seasonality> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    std::int64_t order = 0;
    if (colon == std::string::npos || !parse_int(trim(item.substr(0, colon)), order) || order <= 0) {
      throw ConfigError("np.seasonalities: expected order:period, got '" + item + "'");
    }
    double period = 0.0;
    try {
      period = parse_double(trim(item.substr(colon + 1)));
    } catch (const DataError&) {
      throw ConfigError("np.seasonalities: bad period in '" + item + "'");
    }
    out.push_back({period, static_cast<std::size_t>(order)});
  }
  return out;
}

std::string format_seasonalities(const std::vector<Seasonality>& terms) {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += ',';
    out += std::to_string(t.order) + ':' + format_double(t.period);
  }
  return out;
}

FadingConfig ExperimentConfig::fading() const {
  FadingConfig f;
  f.carrier_hz = get_double("synth.carrier_hz");
  f.speed_mps = get_double("synth.speed_mps");
  f.sample_interval = get_double("data.sample_interval");
  f.paths = get_size("synth.paths");
  f.antennas = get_size("synth.antennas");
  f.samples = get_size("synth.samples");
  f.seed = static_cast<std::uint64_t>(get_int("synth.seed"));
  return f;
}

SplitFractions ExperimentConfig::fractions() const {
  return {get_double("split.train"), get_double("split.validation"), get_double("split.test")};
}

RecurrentConfig ExperimentConfig::recurrent(Architecture arch) const {
  const std::string p = arch == Architecture::bilstm ? "bilstm." : "rnn.";
  RecurrentConfig c;
  c.arch = arch;
  c.lags = get_size("window.lags");
  c.horizon = get_size("window.horizon");
  c.hidden = get_size(p + "hidden");
  c.layers = get_size(p + "layers");
  c.dropout = get_double(p + "dropout");
  if (arch == Architecture::bilstm) c.combine = parse_bi_combine(get("bilstm.combine"));
  c.training.learning_rate = get_double(p + "learning_rate");
  c.training.epochs = get_size(p + "epochs");
  c.training.batch_size = get_size(p + "batch_size");
  c.training.huber_beta = get_double(p + "huber_beta");
  c.training.clip_norm = get_double(p + "clip_norm");
  return c;
}

NpConfig ExperimentConfig::np(bool with_regressor) const {
  NpConfig c;
  c.lags = get_size("window.lags");
  c.horizon = get_size("window.horizon");
  c.trend = get_bool("np.trend");
  c.trend_mode = parse_trend_mode(get("np.trend_mode"));
  c.changepoints = get_size("np.changepoints");
  c.changepoint_range = get_double("np.changepoint_range");
  c.seasonality = get_bool("np.seasonality");
  c.seasonalities = parse_seasonalities(get("np.seasonalities"));
  c.samples_per_day = get_double("np.samples_per_day");
  c.autoregression = get_bool("np.autoregression");
  c.ar_layers = get_size("np.ar_layers");
  c.ar_hidden = get_size("np.ar_hidden");
  c.ar_activation = parse_ar_activation(get("np.ar_activation"));
  c.regressor = with_regressor;
  c.learning_rate = get_double("np.learning_rate");
  c.epochs = get_size("np.epochs");
  c.batch_size = get_size("np.batch_size");
  c.huber_beta = get_double("np.huber_beta");
  return c;
}

void ExperimentConfig::validate() const {
  try {
    for (const auto& [k, v] : values_) check_value(spec_for(k), v);
    if (get("data.source") == "synth") {
      fading().validate();
    } else if (get("data.path").empty()) {
      throw ConfigError("data.path is required when data.source = file");
    }
    const SplitFractions f = fractions();
    if (f.train <= 0.0 || f.validation <= 0.0 || f.test <= 0.0 ||
        std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
      throw ConfigError("split fractions must be positive and sum to 1");
    }
    if (get_int("train.window_stride") < 1) throw ConfigError("train.window_stride must be >= 1");
    if (get_int("seed") < 0 || get_int("synth.seed") < 0) throw ConfigError("seeds must be >= 0");
    for (const char* key : {"window.lags", "window.horizon", "rnn.hidden", "rnn.layers",
                            "rnn.epochs", "rnn.batch_size", "bilstm.hidden", "bilstm.layers",
                            "bilstm.epochs", "bilstm.batch_size", "np.changepoints",
                            "np.ar_layers", "np.ar_hidden", "np.epochs", "np.batch_size",
                            "synth.paths", "synth.antennas", "synth.samples"}) {
      if (get_int(key) < 0) throw ConfigError(std::string(key) + " must not be negative");
    }
    compare_seeds();
    recurrent(Architecture::rnn).validate();
    recurrent(Architecture::bilstm).validate();
    np().validate();
    if (get_int("rnn.epochs") == 0 || get_int("bilstm.epochs") == 0 || get_int("np.epochs") == 0) {
      throw ConfigError("epochs must be >= 1");
    }
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& s : specs()) out += s.key.name + " = " + values_.at(s.key.name) + '\n';
  return out;
}

std::string ExperimentConfig::digest() const { return sha256_hex(to_text()); }

}  // namespace csipred
