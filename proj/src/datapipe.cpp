#include "csipred/datapipe.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "csipred/checkpoint.hpp"
#include "csipred/errors.hpp"

namespace csipred {

namespace {

constexpr std::string_view kCsvHeader = "t,antenna,re,im";

template <typename T>
T parse_int_cell(std::string_view cell, const char* column, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError(std::string("column '") + column + "': not an integer: '" +
                         std::string(cell) + "'",
                     line);
  }
  return v;
}

double parse_real_cell(std::string_view cell, const char* column, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError(std::string("column '") + column + "': not a number: '" + std::string(cell) +
                         "'",
                     line);
  }
  if (!std::isfinite(v)) {
    throw ParseError(std::string("column '") + column + "': non-finite value '" +
                         std::string(cell) + "'",
                     line);
  }
  return v;
}

std::map<int, std::vector<CsiRecord>> group_by_antenna(const std::vector<CsiRecord>& records) {
  std::map<int, std::vector<CsiRecord>> out;
  for (const auto& r : records) {
    out[r.antenna].push_back(r);
  }
  for (auto& [a, rs] : out) {
    std::stable_sort(rs.begin(), rs.end(),
                     [](const CsiRecord& x, const CsiRecord& y) { return x.t < y.t; });
  }
  return out;
}

}  // namespace

void CsiSeries::validate() const {
  if (antennas.empty()) {
    throw DataError("CSI series has no antennas");
  }
  if (antenna_ids.size() != antennas.size()) {
    throw DataError("CSI series antenna id count does not match antenna data");
  }
  for (const auto& a : antennas) {
    if (a.size() != antennas.front().size()) {
      throw DataError("CSI series antennas have different lengths");
    }
    for (const auto& v : a) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw DataError("CSI series contains a non-finite sample");
      }
    }
  }
}

RawCsi parse_csi_records(const std::string& text) {
  RawCsi raw;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) {
      end = text.size();
    }
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!header_seen) {
      if (line != kCsvHeader) {
        throw ParseError("expected header '" + std::string(kCsvHeader) + "'", line_no);
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) {
      continue;
    }
    std::array<std::string_view, 4> cells;
    std::size_t start = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      const std::size_t comma = c < 3 ? line.find(',', start) : std::string_view::npos;
      if (c < 3 && comma == std::string_view::npos) {
        throw ParseError("expected 4 comma-separated fields", line_no);
      }
      cells[c] = line.substr(start, c < 3 ? comma - start : std::string_view::npos);
      start = comma + 1;
    }
    if (cells[3].find(',') != std::string_view::npos) {
      throw ParseError("expected 4 comma-separated fields", line_no);
    }
    CsiRecord r;
    r.t = parse_int_cell<std::int64_t>(cells[0], "t", line_no);
    r.antenna = parse_int_cell<int>(cells[1], "antenna", line_no);
    const double re = parse_real_cell(cells[2], "re", line_no);
    const double im = parse_real_cell(cells[3], "im", line_no);
    r.value = {re, im};
    raw.records.push_back(r);
  }
  if (!header_seen) {
    throw ParseError("empty file", 1);
  }
  return raw;
}

RawCsi read_csi_records(const std::filesystem::path& path) {
  RawCsi raw = parse_csi_records(read_file(path));
  raw.track = path.stem().string();
  return raw;
}

CsiSeries to_series(const RawCsi& raw) {
  const auto groups = group_by_antenna(raw.records);
  if (groups.empty()) {
    throw DataError("CSI data has no rows");
  }
  CsiSeries s;
  s.sample_interval = raw.sample_interval;
  s.track = raw.track;
  bool first = true;
  std::int64_t lo = 0;
  std::size_t len = 0;
  for (const auto& [antenna, rs] : groups) {
    for (std::size_t i = 1; i < rs.size(); ++i) {
      if (rs[i].t != rs[i - 1].t + 1) {
        throw DataError("non-uniform timestamps for antenna " + std::to_string(antenna) +
                        " between t=" + std::to_string(rs[i - 1].t) + " and t=" +
                        std::to_string(rs[i].t));
      }
    }
    if (first) {
      lo = rs.front().t;
      len = rs.size();
      first = false;
    } else if (rs.front().t != lo || rs.size() != len) {
      throw DataError("antenna " + std::to_string(antenna) +
                      " covers a different index range than the others");
    }
    s.antenna_ids.push_back(antenna);
    std::vector<Complex> values;
    values.reserve(rs.size());
    for (const auto& r : rs) {
      values.push_back(r.value);
    }
    s.antennas.push_back(std::move(values));
  }
  s.first_index = lo;
  return s;
}

CsiSeries load_csi(const std::filesystem::path& path, double sample_interval) {
  RawCsi raw = read_csi_records(path);
  raw.sample_interval = sample_interval;
  return to_series(raw);
}

std::string format_csi(const CsiSeries& series) {
  series.validate();
  std::string out(kCsvHeader);
  out += '\n';
  for (std::size_t i = 0; i < series.length(); ++i) {
    const std::int64_t t = series.first_index + static_cast<std::int64_t>(i);
    for (std::size_t a = 0; a < series.antenna_count(); ++a) {
      const Complex v = series.antennas[a][i];
      out += std::to_string(t);
      out += ',';
      out += std::to_string(series.antenna_ids[a]);
      out += ',';
      out += format_double(v.real());
      out += ',';
      out += format_double(v.imag());
      out += '\n';
    }
  }
  return out;
}

void save_csi(const std::filesystem::path& path, const CsiSeries& series) {
  write_file(path, format_csi(series));
}

std::string CleaningReport::to_text() const {
  std::ostringstream os;
  os << "duplicates_collapsed=" << duplicates_collapsed << '\n'
     << "samples_interpolated=" << samples_interpolated << '\n'
     << "corrupted_replaced=" << corrupted_replaced << '\n';
  return os.str();
}

CleanResult clean(const RawCsi& raw) {
  CleanResult result;
  auto groups = group_by_antenna(raw.records);
  if (groups.empty()) {
    throw DataError("CSI data has no rows");
  }
  struct Track {
    int antenna;
    std::vector<CsiRecord> rows;
  };
  std::vector<Track> tracks;
  for (auto& [antenna, rs] : groups) {
    std::vector<CsiRecord> kept;
    for (const auto& r : rs) {
      if (!kept.empty() && kept.back().t == r.t) {
        ++result.report.duplicates_collapsed;
        continue;
      }
      kept.push_back(r);
    }
    std::vector<CsiRecord> finite;
    for (const auto& r : kept) {
      if (std::isfinite(r.value.real()) && std::isfinite(r.value.imag())) {
        finite.push_back(r);
      } else {
        ++result.report.corrupted_replaced;
      }
    }
    if (finite.empty()) {
      throw DataError("antenna " + std::to_string(antenna) + " has no usable samples");
    }
    tracks.push_back({antenna, std::move(finite)});
  }

  std::int64_t lo = tracks.front().rows.front().t;
  std::int64_t hi = tracks.front().rows.back().t;
  for (const auto& tr : tracks) {
    lo = std::max(lo, tr.rows.front().t);
    hi = std::min(hi, tr.rows.back().t);
  }
  if (hi < lo) {
    throw DataError("antennas share no common index range");
  }

  CsiSeries& s = result.series;
  s.sample_interval = raw.sample_interval;
  s.track = raw.track;
  s.first_index = lo;
  const std::size_t length = static_cast<std::size_t>(hi - lo + 1);
  for (const auto& tr : tracks) {
    std::vector<Complex> values(length);
    std::vector<bool> present(length, false);
    for (const auto& r : tr.rows) {
      if (r.t < lo || r.t > hi) {
        continue;
      }
      const auto i = static_cast<std::size_t>(r.t - lo);
      values[i] = r.value;
      present[i] = true;
    }
    std::size_t i = 0;
    while (i < length) {
      if (present[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < length && !present[j]) {
        ++j;
      }
      const std::size_t gap = j - i;
      if (gap > kMaxInterpolatedGap) {
        throw DataError("unrecoverable gap of " + std::to_string(gap) + " samples for antenna " +
                        std::to_string(tr.antenna) + " starting at t=" +
                        std::to_string(lo + static_cast<std::int64_t>(i)));
      }
      // Range endpoints are present by construction of [lo, hi].
      const Complex left = values[i - 1];
      const Complex right = values[j];
      for (std::size_t k = i; k < j; ++k) {
        const double w = static_cast<double>(k - i + 1) / static_cast<double>(gap + 1);
        values[k] = left + w * (right - left);
      }
      result.report.samples_interpolated += gap;
      i = j;
    }
    s.antenna_ids.push_back(tr.antenna);
    s.antennas.push_back(std::move(values));
  }
  return result;
}

CleanResult clean(const CsiSeries& series) {
  series.validate();
  return {series, {}};
}

std::vector<FeatureSeries> complex_to_features(const CsiSeries& series) {
  std::vector<FeatureSeries> out;
  for (std::size_t a = 0; a < series.antenna_count(); ++a) {
    for (Component c : {Component::real, Component::imag}) {
      FeatureSeries f;
      f.feature = feature_id(a, c);
      f.antenna = series.antenna_ids[a];
      f.component = c;
      f.first_index = series.first_index;
      f.values.reserve(series.length());
      for (const auto& v : series.antennas[a]) {
        f.values.push_back(c == Component::real ? v.real() : v.imag());
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

CsiSeries features_to_complex(const std::vector<FeatureSeries>& features, double sample_interval,
                              const std::string& track) {
  if (features.empty() || features.size() % 2 != 0) {
    throw ContractError("features_to_complex: need real/imag pairs");
  }
  CsiSeries s;
  s.sample_interval = sample_interval;
  s.track = track;
  s.first_index = features.front().first_index;
  for (std::size_t a = 0; a < features.size() / 2; ++a) {
    const FeatureSeries* re = nullptr;
    const FeatureSeries* im = nullptr;
    for (const auto& f : features) {
      if (f.feature == feature_id(a, Component::real)) re = &f;
      if (f.feature == feature_id(a, Component::imag)) im = &f;
    }
    if (re == nullptr || im == nullptr || re->values.size() != im->values.size() ||
        re->first_index != s.first_index || im->first_index != s.first_index) {
      throw ContractError("features_to_complex: inconsistent feature pair for antenna " +
                          std::to_string(a));
    }
    std::vector<Complex> values(re->values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = {re->values[i], im->values[i]};
    }
    s.antenna_ids.push_back(re->antenna);
    s.antennas.push_back(std::move(values));
  }
  return s;
}

Scaler Scaler::fit(const std::vector<double>& training_values) {
  if (training_values.empty()) {
    throw DataError("cannot fit a scaler on an empty training split");
  }
  const auto [lo, hi] = std::minmax_element(training_values.begin(), training_values.end());
  if (!(*hi > *lo)) {
    throw DataError("degenerate scale: training feature is constant");
  }
  return {0.5 * (*hi + *lo), 0.5 * (*hi - *lo)};
}

std::vector<double> Scaler::apply(const std::vector<double>& xs) const {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return apply(x); });
  return out;
}

std::vector<double> Scaler::invert(const std::vector<double>& xs) const {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return invert(x); });
  return out;
}

std::string Scaler::to_text() const {
  return "shift=" + format_double(shift) + "\nscale=" + format_double(scale) + "\n";
}

Scaler Scaler::from_text(const std::string& text) {
  Scaler s;
  bool have_shift = false;
  bool have_scale = false;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key=value", line_no);
    }
    const std::string key = line.substr(0, eq);
    const double value = parse_double(line.substr(eq + 1));
    if (key == "shift") {
      s.shift = value;
      have_shift = true;
    } else if (key == "scale") {
      s.scale = value;
      have_scale = true;
    } else {
      throw ParseError("unknown scaler key '" + key + "'", line_no);
    }
  }
  if (!have_shift || !have_scale || !(s.scale > 0.0)) {
    throw DataError("scaler text needs shift and a positive scale");
  }
  return s;
}

namespace {

FeatureSeries segment(const FeatureSeries& s, std::size_t begin, std::size_t count) {
  FeatureSeries out = s;
  out.first_index = s.first_index + static_cast<std::int64_t>(begin);
  out.values.assign(s.values.begin() + static_cast<std::ptrdiff_t>(begin),
                    s.values.begin() + static_cast<std::ptrdiff_t>(begin + count));
  return out;
}

}  // namespace

ChronologicalSplit split_chronological(const FeatureSeries& series, SplitFractions fractions,
                                       std::size_t min_segment) {
  const double total = fractions.train + fractions.validation + fractions.test;
  if (std::abs(total - 1.0) > 1e-9 || fractions.train <= 0.0 || fractions.validation < 0.0 ||
      fractions.test < 0.0) {
    throw ContractError("split fractions must be non-negative and sum to 1");
  }
  const std::size_t n = series.values.size();
  const auto n_val =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions.validation + 1e-9));
  const auto n_test =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions.test + 1e-9));
  if (n_val + n_test > n) {
    throw DataError("series too short to split");
  }
  const std::size_t n_train = n - n_val - n_test;
  if (n_train < min_segment || n_val < min_segment || n_test < min_segment) {
    throw DataError("series of length " + std::to_string(n) + " is too short: each split needs " +
                    std::to_string(min_segment) + " samples (got " + std::to_string(n_train) +
                    "/" + std::to_string(n_val) + "/" + std::to_string(n_test) + ")");
  }
  return {segment(series, 0, n_train), segment(series, n_train, n_val),
          segment(series, n_train + n_val, n_test)};
}

NormalizedSplit normalize(const ChronologicalSplit& split) {
  NormalizedSplit out{split, Scaler::fit(split.train.values)};
  out.split.train.values = out.scaler.apply(split.train.values);
  out.split.validation.values = out.scaler.apply(split.validation.values);
  out.split.test.values = out.scaler.apply(split.test.values);
  return out;
}

std::size_t window_count(std::size_t length, std::size_t lags, std::size_t horizon) {
  return length >= lags + horizon + 1 ? length - lags - horizon : 0;
}

SupervisedWindowSet make_windows(const FeatureSeries& series, std::size_t lags,
                                 std::size_t horizon) {
  if (lags == 0 || horizon == 0) {
    throw ContractError("make_windows: lags and horizon must be positive");
  }
  const std::size_t n = series.values.size();
  if (n < lags + horizon + 1) {
    throw ContractError("make_windows: series of length " + std::to_string(n) +
                        " is shorter than d + D + 1 = " + std::to_string(lags + horizon + 1));
  }
  const std::size_t count = window_count(n, lags, horizon);
  SupervisedWindowSet w;
  w.lags = lags;
  w.horizon = horizon;
  w.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(lags));
  w.labels.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(horizon));
  w.times.reserve(count);
  w.features.assign(count, series.feature);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t origin = lags + k;
    for (std::size_t j = 0; j < lags; ++j) {
      w.inputs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
          series.values[origin - lags + j];
    }
    for (std::size_t h = 0; h < horizon; ++h) {
      w.labels(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(h)) =
          series.values[origin + 1 + h];
    }
    w.times.push_back(series.first_index + static_cast<std::int64_t>(origin));
  }
  return w;
}

SupervisedWindowSet SupervisedWindowSet::subset(const std::vector<std::size_t>& rows) const {
  SupervisedWindowSet out;
  out.lags = lags;
  out.horizon = horizon;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()), labels.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(r);
    out.labels.row(static_cast<Eigen::Index>(i)) = labels.row(r);
    out.times.push_back(times.at(rows[i]));
    out.features.push_back(features.at(rows[i]));
  }
  return out;
}

SupervisedWindowSet SupervisedWindowSet::strided(std::size_t stride) const {
  if (stride == 0) {
    throw ContractError("window stride must be positive");
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); i += stride) {
    rows.push_back(i);
  }
  return subset(rows);
}

std::string SupervisedWindowSet::digest() const {
  std::string bytes;
  auto put = [&bytes](const void* p, std::size_t n) {
    bytes.append(static_cast<const char*>(p), n);
  };
  put(&lags, sizeof lags);
  put(&horizon, sizeof horizon);
  put(inputs.data(), sizeof(double) * static_cast<std::size_t>(inputs.size()));
  put(labels.data(), sizeof(double) * static_cast<std::size_t>(labels.size()));
  put(times.data(), sizeof(std::int64_t) * times.size());
  put(features.data(), sizeof(int) * features.size());
  return sha256_hex(bytes);
}

}  // namespace csipred
