#pragma once

// End-to-end pipeline shared by the CLI, the acceptance suite and the Python
// module: dataset -> per-feature windows -> per-feature models -> metrics.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csipred/checkpoint.hpp"
#include "csipred/config.hpp"
#include "csipred/datapipe.hpp"
#include "csipred/evalx.hpp"
#include "csipred/hybrid.hpp"

namespace csipred {

enum class SplitName { train, validation, test };
std::string to_string(SplitName s);
SplitName parse_split_name(const std::string& text);

struct FeatureData {
  int feature = 0;
  int antenna = 0;
  Component component = Component::real;
  Scaler scaler;
  WindowSplits windows;  // normalized; train already strided

  const SupervisedWindowSet& split(SplitName s) const;
};

struct PreparedData {
  std::string track;
  std::size_t lags = 0;
  std::size_t horizon = 0;
  CleaningReport cleaning;
  std::vector<FeatureData> features;  // ordered by feature id: re, im per antenna

  // Hash over every window set and scaler; equal digests mean identical inputs.
  std::string digest() const;
};

// Synthetic track or cleaned CSV, per config.
CsiSeries load_dataset(const ExperimentConfig& config, CleaningReport* report = nullptr);

PreparedData prepare(const CsiSeries& series, const ExperimentConfig& config,
                     const CleaningReport& cleaning = {});

// One model per feature series. Exactly one of the optional members is set,
// according to `kind`.
struct FeatureModel {
  int feature = 0;
  Scaler scaler;
  std::optional<RecurrentModel> recurrent;
  std::optional<NpModel> np;
  std::optional<HybridModel> hybrid;
  std::vector<double> loss_history;

  // Normalized-scale forecasts, windows x D.
  DenseMatrix predict(const SupervisedWindowSet& windows) const;
  std::size_t parameter_count() const;
};

struct Predictor {
  ModelKind kind = ModelKind::np;
  std::string track;
  std::size_t lags = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<FeatureModel> models;

  std::size_t parameter_count() const;
  Checkpoint to_checkpoint() const;
  static Predictor from_checkpoint(const Checkpoint& checkpoint);
  std::string digest() const;
};

// Seed used for one feature's model, derived from the run seed.
std::uint64_t feature_seed(std::uint64_t seed, int feature);

// `rnn_source` (optional) supplies already-trained stage-1 models for a
// hybrid run; it must have been trained on the same data with the same seed.
Predictor train_predictor(ModelKind kind, const PreparedData& data, const ExperimentConfig& config,
                          std::uint64_t seed, const Predictor* rnn_source = nullptr);

// Forecast for every window of one split, de-normalized and reassembled into
// complex vectors: result[antenna position][window] (D values).
struct SplitForecast {
  std::vector<int> antenna_ids;
  std::vector<std::vector<std::int64_t>> origins;
  std::vector<std::vector<ComplexVector>> predicted;
  std::vector<std::vector<ComplexVector>> truth;
};

SplitForecast forecast_split(const Predictor& predictor, const PreparedData& data, SplitName split);
SplitForecast truth_only(const PreparedData& data, SplitName split);

// Per-antenna reports followed by an "all" row averaged over antennas.
std::vector<MetricReport> evaluate_forecast(const SplitForecast& forecast, const std::string& model,
                                            const std::string& track, std::uint64_t seed,
                                            const std::string& config_digest);

// Predictions CSV: t,antenna,step,re,im (t = forecast origin, step = 1..D).
std::string format_predictions(const SplitForecast& forecast);
// Replaces `predicted` in `truth_frame` with the values of a predictions CSV.
// Every (origin, antenna, step) of the frame must be present exactly once.
SplitForecast attach_predictions(const SplitForecast& truth_frame, const std::string& csv);

struct CompareRow {
  std::uint64_t seed = 0;
  MetricReport report;
};

struct CompareResult {
  std::string dataset_digest;
  std::vector<CompareRow> rows;  // per seed: hybrid, bilstm, rnn, np
  // (model, median nmse, median nmse_db, median cosine) over seeds, "all" scope
  std::vector<std::tuple<std::string, double, double, double>> medians;
};

using ProgressFn = std::function<void(const std::string&)>;

// Trains the four predictors on identical windows for every configured seed
// and evaluates them on `eval.split`. `on_row` sees each row as soon as it is
// available so callers can persist partial results.
CompareResult run_compare(const PreparedData& data, const ExperimentConfig& config,
                          const std::function<void(const CompareResult&)>& on_row = {},
                          const ProgressFn& progress = {});

std::string compare_to_csv(const CompareResult& result);
std::string compare_summary_csv(const CompareResult& result);
std::string compare_to_json(const CompareResult& result);

}  // namespace csipred
