#include "csipred/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "csipred/checkpoint.hpp"
#include "csipred/errors.hpp"
#include "json.hpp"

namespace csipred {

namespace {

void check_shapes(std::span<const ComplexVector> predicted, std::span<const ComplexVector> truth) {
  if (predicted.size() != truth.size()) {
    throw ContractError("metric: " + std::to_string(predicted.size()) + " predicted windows vs " +
                        std::to_string(truth.size()) + " truth windows");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i].size() != truth[i].size()) {
      throw ContractError("metric: window " + std::to_string(i) + " length mismatch");
    }
  }
}

double squared_norm(const ComplexVector& v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

MetricValue nmse(std::span<const ComplexVector> predicted, std::span<const ComplexVector> truth) {
  check_shapes(predicted, truth);
  MetricValue m;
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double denom = squared_norm(truth[i]);
    if (!(denom > 0.0)) {
      ++m.excluded;
      continue;
    }
    double err = 0.0;
    for (std::size_t k = 0; k < truth[i].size(); ++k) err += std::norm(predicted[i][k] - truth[i][k]);
    sum += err / denom;
    ++m.windows;
  }
  m.value = m.windows > 0 ? sum / static_cast<double>(m.windows)
                          : std::numeric_limits<double>::quiet_NaN();
  return m;
}

MetricValue cosine_similarity(std::span<const ComplexVector> predicted,
                              std::span<const ComplexVector> truth) {
  check_shapes(predicted, truth);
  MetricValue m;
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double np = squared_norm(predicted[i]);
    const double nt = squared_norm(truth[i]);
    if (!(np > 0.0) || !(nt > 0.0)) {
      ++m.excluded;
      continue;
    }
    std::complex<double> inner = 0.0;
    for (std::size_t k = 0; k < truth[i].size(); ++k) inner += std::conj(predicted[i][k]) * truth[i][k];
    sum += std::min(1.0, std::abs(inner) / std::sqrt(np * nt));
    ++m.windows;
  }
  m.value = m.windows > 0 ? sum / static_cast<double>(m.windows)
                          : std::numeric_limits<double>::quiet_NaN();
  return m;
}

MetricValue pooled(std::span<const MetricValue> parts) {
  MetricValue m;
  double sum = 0.0;
  for (const auto& p : parts) {
    if (p.windows > 0) sum += p.value * static_cast<double>(p.windows);
    m.windows += p.windows;
    m.excluded += p.excluded;
  }
  m.value = m.windows > 0 ? sum / static_cast<double>(m.windows)
                          : std::numeric_limits<double>::quiet_NaN();
  return m;
}

double to_db(double linear) { return 10.0 * std::log10(linear); }

MetricReport make_report(std::string model, std::string track, std::uint64_t seed,
                         std::string scope, const MetricValue& nmse_value,
                         const MetricValue& cosine_value, std::string config_digest) {
  MetricReport r;
  r.model = std::move(model);
  r.track = std::move(track);
  r.seed = seed;
  r.scope = std::move(scope);
  r.nmse = nmse_value.value;
  r.nmse_db = to_db(nmse_value.value);
  r.cosine = cosine_value.value;
  r.windows = nmse_value.windows;
  r.excluded = std::max(nmse_value.excluded, cosine_value.excluded);
  r.config_digest = std::move(config_digest);
  return r;
}

std::string reports_to_csv(std::span<const MetricReport> reports) {
  std::ostringstream os;
  os << "model,track,seed,scope,nmse,nmse_db,cosine,windows,excluded,config_digest\n";
  for (const auto& r : reports) {
    os << csv_field(r.model) << ',' << csv_field(r.track) << ',' << r.seed << ','
       << csv_field(r.scope) << ',' << format_double(r.nmse) << ',' << format_double(r.nmse_db)
       << ',' << format_double(r.cosine) << ',' << r.windows << ',' << r.excluded << ','
       << r.config_digest << '\n';
  }
  return os.str();
}

std::string reports_to_json(std::span<const MetricReport> reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    arr.push_back({{"model", r.model},
                   {"track", r.track},
                   {"seed", r.seed},
                   {"scope", r.scope},
                   {"nmse", r.nmse},
                   {"nmse_db", r.nmse_db},
                   {"cosine", r.cosine},
                   {"windows", r.windows},
                   {"excluded", r.excluded},
                   {"config_digest", r.config_digest}});
  }
  return arr.dump(2) + "\n";
}

double median(std::vector<double> values) {
  if (values.empty()) {
    throw ContractError("median of an empty set");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void ParamGrid::validate() const {
  if (axes.empty()) {
    throw ConfigError("grid has no axes");
  }
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i].second.empty()) {
      throw ConfigError("grid axis '" + axes[i].first + "' has no values");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (axes[j].first == axes[i].first) {
        throw ConfigError("grid axis '" + axes[i].first + "' listed twice");
      }
    }
  }
}

std::vector<GridCell> ParamGrid::cells() const {
  validate();
  std::vector<GridCell> out{GridCell{}};
  for (const auto& [key, values] : axes) {
    std::vector<GridCell> next;
    next.reserve(out.size() * values.size());
    for (const auto& cell : out) {
      for (const auto& v : values) {
        GridCell c = cell;
        c[key] = v;
        next.push_back(std::move(c));
      }
    }
    out = std::move(next);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ParamGrid parse_grid(const std::string& text) {
  ParamGrid grid;
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
      throw ConfigError("grid line " + std::to_string(lineno) + ": expected 'key = v1, v2'");
    }
    std::pair<std::string, std::vector<std::string>> axis{trim(line.substr(0, eq)), {}};
    std::istringstream vs(line.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      v = trim(v);
      if (v.empty()) {
        throw ConfigError("grid line " + std::to_string(lineno) + ": empty value");
      }
      axis.second.push_back(v);
    }
    grid.axes.push_back(std::move(axis));
  }
  grid.validate();
  return grid;
}

GridResult grid_search(const ParamGrid& grid, const TrialFn& run) {
  GridResult result;
  const Trial* best = nullptr;
  for (const auto& cell : grid.cells()) {
    Trial t;
    t.cell = cell;
    try {
      t.outcome = run(cell);
      t.ok = std::isfinite(t.outcome.validation_nmse);
      if (!t.ok) t.error = "non-finite validation NMSE";
    } catch (const std::exception& e) {
      t.error = e.what();
    }
    result.trials.push_back(std::move(t));
  }
  for (const auto& t : result.trials) {
    if (!t.ok) continue;
    if (best == nullptr || t.outcome.validation_nmse < best->outcome.validation_nmse ||
        (t.outcome.validation_nmse == best->outcome.validation_nmse &&
         t.outcome.parameter_count < best->outcome.parameter_count)) {
      best = &t;
    }
  }
  if (best == nullptr) {
    throw std::runtime_error("grid search: all " + std::to_string(result.trials.size()) +
                             " cells failed");
  }
  result.best = best->cell;
  result.best_outcome = best->outcome;
  return result;
}

std::string trials_to_csv(const GridResult& result) {
  std::ostringstream os;
  std::vector<std::string> keys;
  if (!result.trials.empty()) {
    for (const auto& [k, v] : result.trials.front().cell) keys.push_back(k);
  }
  for (const auto& k : keys) os << csv_field(k) << ',';
  os << "status,validation_nmse,parameter_count,error\n";
  for (const auto& t : result.trials) {
    for (const auto& k : keys) os << csv_field(t.cell.at(k)) << ',';
    os << (t.ok ? "ok" : "failed") << ','
       << (t.ok ? format_double(t.outcome.validation_nmse) : std::string()) << ','
       << (t.ok ? std::to_string(t.outcome.parameter_count) : std::string()) << ','
       << csv_field(t.error) << '\n';
  }
  return os.str();
}

}  // namespace csipred
