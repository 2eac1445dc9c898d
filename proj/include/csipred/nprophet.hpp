#pragma once

// Decomposable forecaster: prediction = trend + seasonality + AR-Net
// autoregression (+ an optional known-future regressor head), each
// contributing additively and trained jointly on the Huber objective.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csipred/checkpoint.hpp"
#include "csipred/datapipe.hpp"
#include "csipred/numcore.hpp"

namespace csipred {

// 1 iff t >= changepoint.
int changepoint_indicator(double t, double changepoint);

struct TrendParams {
  double base_growth = 0.0;
  double base_offset = 0.0;
  std::vector<double> growth_adjust;
  std::vector<double> offset_adjust;
  std::vector<double> changepoints;  // strictly increasing

  void validate() const;
};

// R_t = (k0 + G_t . zeta) t + (m0 + G_t . rho), G_t the changepoint indicators.
double trend_eval(double t, const TrendParams& params);

// sum_r a_r cos(2 pi r t / p) + b_r sin(2 pi r t / p), r = 1..a.size().
double seasonality_eval(double t, double period, std::span<const double> a,
                        std::span<const double> b);

struct Seasonality {
  double period = 1.0;  // in days
  std::size_t order = 1;
  bool operator==(const Seasonality&) const = default;
};

struct SeasonalityParams {
  std::vector<Seasonality> terms;
  std::vector<std::vector<double>> cos_coeffs;
  std::vector<std::vector<double>> sin_coeffs;
};

double seasonality_total(double t, const SeasonalityParams& params);

struct ClassicArParams {
  double intercept = 0.0;
  std::vector<double> theta;  // theta[e-1] multiplies z_{t-e}
};

// `lags` are chronological (oldest first): lags.back() is z_{t-1}.
double classic_ar_eval(std::span<const double> lags, const ClassicArParams& params);

enum class ArActivation { relu, linear };
std::string to_string(ArActivation a);
ArActivation parse_ar_activation(const std::string& text);

struct ArNetParams {
  std::size_t lags = 48;
  std::size_t horizon = 24;
  ArActivation activation = ArActivation::relu;
  std::vector<DenseMatrix> weights;  // hidden_layers + 1 matrices, first is n_h x d, last is D x n_h
  std::vector<Vector> biases;        // one per hidden layer

  std::size_t hidden_layers() const { return biases.size(); }
  void validate() const;
  static ArNetParams zeros(std::size_t lags, std::size_t horizon, std::size_t hidden_layers,
                           std::size_t hidden);
};

std::vector<double> ar_net_forward(std::span<const double> lags, const ArNetParams& params);

enum class TrendMode { discontinuous, continuous };
std::string to_string(TrendMode m);
TrendMode parse_trend_mode(const std::string& text);

struct NpConfig {
  std::size_t lags = 48;
  std::size_t horizon = 24;

  bool trend = true;
  TrendMode trend_mode = TrendMode::discontinuous;
  std::size_t changepoints = 30;
  double changepoint_range = 0.9;

  bool seasonality = true;
  std::vector<Seasonality> seasonalities{{365.25, 6}, {7.0, 3}, {1.0, 6}};
  double samples_per_day = 2000.0;

  bool autoregression = true;
  std::size_t ar_layers = 3;
  std::size_t ar_hidden = 32;
  ArActivation ar_activation = ArActivation::relu;

  bool regressor = false;

  double learning_rate = 0.01;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double huber_beta = 1.0;

  void validate() const;
};

class NpModel {
 public:
  NpModel(const NpConfig& config, std::uint64_t seed);

  const NpConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  // Trend time is tau = (t - origin) / span; changepoints live in tau units.
  void set_time_frame(double origin, double span);
  double time_origin() const { return time_origin_; }
  double time_span() const { return time_span_; }
  double normalized_time(double t) const { return (t - time_origin_) / time_span_; }
  double days(double t) const { return t / config_.samples_per_day; }

  // Trend growth per raw sample index, in model-value units.
  double growth_per_sample() const;

  TrendParams trend() const;  // offsets resolved for the configured trend mode
  SeasonalityParams seasonality() const;
  ArNetParams ar_net() const;
  DenseMatrix regressor_weights() const;  // D x D

  void set_trend(double base_growth, double base_offset, std::span<const double> growth_adjust,
                 std::span<const double> offset_adjust);
  void set_seasonality(std::size_t term, std::span<const double> cos_coeffs,
                       std::span<const double> sin_coeffs);
  void set_ar_net(const ArNetParams& ar);
  void set_regressor_weights(const DenseMatrix& w);

  // Per-horizon contributions for forecast origin t (steps t+1 .. t+D).
  std::vector<double> trend_component(std::int64_t t) const;
  std::vector<double> seasonality_component(std::int64_t t) const;
  std::vector<double> ar_component(std::span<const double> lags) const;
  std::vector<double> regressor_component(std::span<const double> regressor) const;

  // np_forecast. `regressor` must be supplied (D values) iff the model has a regressor head.
  std::vector<double> forecast(std::int64_t t, std::span<const double> lags,
                               std::span<const double> regressor = {}) const;

  // Rows of `regressors` align with windows; pass nullptr when the model has no regressor head.
  DenseMatrix predict_batch(const SupervisedWindowSet& windows,
                            const DenseMatrix* regressors = nullptr) const;

  // Mean Huber loss over a batch; accumulates exact gradients into `grad` when set.
  double loss_and_grad(std::span<const std::int64_t> times, const DenseMatrix& inputs,
                       const DenseMatrix& labels, const DenseMatrix* regressors,
                       ParamStore* grad) const;

  CheckpointSection to_section() const;
  static NpModel from_section(const CheckpointSection& section);
  std::string digest() const;

 private:
  struct Tape;
  DenseMatrix forward(std::span<const std::int64_t> times, const DenseMatrix& inputs,
                      const DenseMatrix* regressors, Tape* tape) const;
  void check_regressors(const DenseMatrix* regressors, Eigen::Index rows) const;

  NpConfig config_;
  ParamStore params_;
  std::vector<double> changepoints_;
  double time_origin_ = 0.0;
  double time_span_ = 1.0;
  bool trained_ = false;

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t growth_ = kNone, offset_ = kNone, growth_adj_ = kNone, offset_adj_ = kNone;
  std::vector<std::size_t> season_;
  std::vector<std::size_t> ar_w_;
  std::vector<std::size_t> ar_b_;
  std::size_t reg_ = kNone;
};

struct NpTrainResult {
  std::vector<double> loss_history;
};

// Places changepoints over the first changepoint_range of the training span,
// then optimizes every enabled component jointly with Adam.
NpTrainResult np_train(NpModel& model, const SupervisedWindowSet& data,
                       const DenseMatrix* regressors, std::uint64_t seed);

}  // namespace csipred
