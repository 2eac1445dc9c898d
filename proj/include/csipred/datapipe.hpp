#pragma once

// Dataset ingestion and preparation: CSV I/O, cleaning, chronological
// splitting, min-max scaling, real/imag feature separation and d-lag /
// D-horizon window construction.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "csipred/numcore.hpp"

namespace csipred {

using Complex = std::complex<double>;

// Uniformly sampled complex channel gains. antennas[a][i] is the sample at
// absolute index first_index + i.
struct CsiSeries {
  double sample_interval = 5e-4;  // seconds
  std::string track = "track";
  std::int64_t first_index = 0;
  std::vector<int> antenna_ids;
  std::vector<std::vector<Complex>> antennas;

  std::size_t antenna_count() const { return antennas.size(); }
  std::size_t length() const { return antennas.empty() ? 0 : antennas.front().size(); }
  // Throws DataError if the invariants (equal lengths, finite samples, >= 1 antenna) fail.
  void validate() const;
  bool operator==(const CsiSeries&) const = default;
};

// Rows as read from disk, before any uniformity checks.
struct CsiRecord {
  std::int64_t t = 0;
  int antenna = 0;
  Complex value;
};

struct RawCsi {
  double sample_interval = 5e-4;
  std::string track = "track";
  std::vector<CsiRecord> records;
};

// CSV contract: header `t,antenna,re,im`, one row per (t, antenna), LF endings.
RawCsi read_csi_records(const std::filesystem::path& path);
RawCsi parse_csi_records(const std::string& text);
// Strict load: every antenna must cover the same contiguous index range with
// no duplicates. Use clean() for tolerant ingestion.
CsiSeries load_csi(const std::filesystem::path& path, double sample_interval = 5e-4);
CsiSeries to_series(const RawCsi& raw);
std::string format_csi(const CsiSeries& series);
void save_csi(const std::filesystem::path& path, const CsiSeries& series);

struct CleaningReport {
  std::size_t duplicates_collapsed = 0;
  std::size_t samples_interpolated = 0;
  std::size_t corrupted_replaced = 0;
  bool empty() const {
    return duplicates_collapsed == 0 && samples_interpolated == 0 && corrupted_replaced == 0;
  }
  std::string to_text() const;
};

struct CleanResult {
  CsiSeries series;
  CleaningReport report;
};

inline constexpr std::size_t kMaxInterpolatedGap = 10;

// Collapses repeated timestamps (first row wins), treats non-finite values as
// missing, and fills gaps of up to kMaxInterpolatedGap samples linearly.
// Longer gaps throw DataError.
CleanResult clean(const RawCsi& raw);
CleanResult clean(const CsiSeries& series);

enum class Component { real = 0, imag = 1 };

// One real-valued stream; feature id = 2 * antenna position + component.
struct FeatureSeries {
  int feature = 0;
  int antenna = 0;
  Component component = Component::real;
  std::int64_t first_index = 0;
  std::vector<double> values;
  bool operator==(const FeatureSeries&) const = default;
};

inline int feature_id(std::size_t antenna_position, Component c) {
  return static_cast<int>(2 * antenna_position) + static_cast<int>(c);
}

std::vector<FeatureSeries> complex_to_features(const CsiSeries& series);
CsiSeries features_to_complex(const std::vector<FeatureSeries>& features,
                              double sample_interval = 5e-4, const std::string& track = "track");

// x_norm = (x - shift) / scale, training range mapped onto [-1, 1].
struct Scaler {
  double shift = 0.0;
  double scale = 1.0;

  static Scaler fit(const std::vector<double>& training_values);  // DataError on zero range
  double apply(double x) const { return (x - shift) / scale; }
  double invert(double x) const { return x * scale + shift; }
  std::vector<double> apply(const std::vector<double>& xs) const;
  std::vector<double> invert(const std::vector<double>& xs) const;
  std::string to_text() const;
  static Scaler from_text(const std::string& text);
  bool operator==(const Scaler&) const = default;
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct ChronologicalSplit {
  FeatureSeries train;
  FeatureSeries validation;
  FeatureSeries test;
};

// Validation and test get floor(n * fraction); the remainder goes to training.
// Any segment shorter than `min_segment` throws DataError.
ChronologicalSplit split_chronological(const FeatureSeries& series, SplitFractions fractions = {},
                                       std::size_t min_segment = 1);

// Fits on train, applies to all three.
struct NormalizedSplit {
  ChronologicalSplit split;
  Scaler scaler;
};
NormalizedSplit normalize(const ChronologicalSplit& split);

// Window with origin t: lags are samples t-d .. t-1 (chronological order),
// labels are samples t+1 .. t+D. Row i of `inputs`/`labels` belongs to times[i].
struct SupervisedWindowSet {
  std::size_t lags = 0;
  std::size_t horizon = 0;
  DenseMatrix inputs;  // N x lags
  DenseMatrix labels;  // N x horizon
  std::vector<std::int64_t> times;
  std::vector<int> features;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  SupervisedWindowSet subset(const std::vector<std::size_t>& rows) const;
  SupervisedWindowSet strided(std::size_t stride) const;
  std::string digest() const;
};

std::size_t window_count(std::size_t length, std::size_t lags, std::size_t horizon);
SupervisedWindowSet make_windows(const FeatureSeries& series, std::size_t lags,
                                 std::size_t horizon);

}  // namespace csipred
