#include "csipred/nprophet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "csipred/errors.hpp"

namespace csipred {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// cos(r x), sin(r x) for r = 1..k by angle addition.
void harmonics(double angle, std::size_t k, double* cosv, double* sinv) {
  const double c1 = std::cos(angle);
  const double s1 = std::sin(angle);
  double c = c1;
  double s = s1;
  for (std::size_t r = 0; r < k; ++r) {
    cosv[r] = c;
    sinv[r] = s;
    const double next_c = c * c1 - s * s1;
    s = s * c1 + c * s1;
    c = next_c;
  }
}

}  // namespace

int changepoint_indicator(double t, double changepoint) { return t >= changepoint ? 1 : 0; }

void TrendParams::validate() const {
  if (growth_adjust.size() != changepoints.size() || offset_adjust.size() != changepoints.size()) {
    throw ContractError("trend params: adjustment vectors must have one entry per changepoint");
  }
  for (std::size_t j = 1; j < changepoints.size(); ++j) {
    if (!(changepoints[j] > changepoints[j - 1])) {
      throw ContractError("trend params: changepoints must be strictly increasing");
    }
  }
}

double trend_eval(double t, const TrendParams& p) {
  double growth = p.base_growth;
  double offset = p.base_offset;
  for (std::size_t j = 0; j < p.changepoints.size(); ++j) {
    if (changepoint_indicator(t, p.changepoints[j]) == 1) {
      growth += p.growth_adjust[j];
      offset += p.offset_adjust[j];
    }
  }
  return growth * t + offset;
}

double seasonality_eval(double t, double period, std::span<const double> a,
                        std::span<const double> b) {
  if (!(period > 0.0) || a.size() != b.size()) {
    throw ContractError("seasonality_eval: need period > 0 and matching coefficient counts");
  }
  double sum = 0.0;
  for (std::size_t r = 1; r <= a.size(); ++r) {
    const double x = kTwoPi * static_cast<double>(r) * t / period;
    sum += a[r - 1] * std::cos(x) + b[r - 1] * std::sin(x);
  }
  return sum;
}

double seasonality_total(double t, const SeasonalityParams& params) {
  double sum = 0.0;
  for (std::size_t i = 0; i < params.terms.size(); ++i) {
    sum += seasonality_eval(t, params.terms[i].period, params.cos_coeffs[i], params.sin_coeffs[i]);
  }
  return sum;
}

double classic_ar_eval(std::span<const double> lags, const ClassicArParams& params) {
  if (lags.size() != params.theta.size()) {
    throw ContractError("classic_ar_eval: expected " + std::to_string(params.theta.size()) +
                        " lags, got " + std::to_string(lags.size()));
  }
  const std::size_t d = lags.size();
  double z = params.intercept;
  for (std::size_t e = 1; e <= d; ++e) {
    z += params.theta[e - 1] * lags[d - e];
  }
  return z;
}

std::string to_string(ArActivation a) { return a == ArActivation::relu ? "relu" : "linear"; }

ArActivation parse_ar_activation(const std::string& text) {
  if (text == "relu") return ArActivation::relu;
  if (text == "linear") return ArActivation::linear;
  throw ConfigError("unknown AR activation '" + text + "'");
}

std::string to_string(TrendMode m) {
  return m == TrendMode::discontinuous ? "discontinuous" : "continuous";
}

TrendMode parse_trend_mode(const std::string& text) {
  if (text == "discontinuous") return TrendMode::discontinuous;
  if (text == "continuous") return TrendMode::continuous;
  throw ConfigError("unknown trend mode '" + text + "'");
}

void ArNetParams::validate() const {
  if (weights.size() != biases.size() + 1) {
    throw ContractError("AR-Net: need one more weight matrix than hidden layers");
  }
  auto expect_cols = static_cast<Eigen::Index>(lags);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].cols() != expect_cols) {
      throw ContractError("AR-Net: layer " + std::to_string(i + 1) + " input width mismatch");
    }
    if (i < biases.size() && biases[i].size() != weights[i].rows()) {
      throw ContractError("AR-Net: bias " + std::to_string(i + 1) + " width mismatch");
    }
    expect_cols = weights[i].rows();
  }
  if (weights.back().rows() != static_cast<Eigen::Index>(horizon)) {
    throw ContractError("AR-Net: output layer must have D rows");
  }
}

ArNetParams ArNetParams::zeros(std::size_t lags, std::size_t horizon, std::size_t hidden_layers,
                               std::size_t hidden) {
  ArNetParams p;
  p.lags = lags;
  p.horizon = horizon;
  auto in = static_cast<Eigen::Index>(lags);
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    p.weights.push_back(DenseMatrix::Zero(static_cast<Eigen::Index>(hidden), in));
    p.biases.push_back(Vector::Zero(static_cast<Eigen::Index>(hidden)));
    in = static_cast<Eigen::Index>(hidden);
  }
  p.weights.push_back(DenseMatrix::Zero(static_cast<Eigen::Index>(horizon), in));
  return p;
}

std::vector<double> ar_net_forward(std::span<const double> lags, const ArNetParams& params) {
  params.validate();
  if (lags.size() != params.lags) {
    throw ContractError("ar_net_forward: expected " + std::to_string(params.lags) +
                        " lags, got " + std::to_string(lags.size()));
  }
  Vector w = Eigen::Map<const Vector>(lags.data(), static_cast<Eigen::Index>(lags.size()));
  for (std::size_t i = 0; i < params.hidden_layers(); ++i) {
    Vector p = params.weights[i] * w + params.biases[i];
    if (params.activation == ArActivation::relu) {
      p = p.unaryExpr([](double v) { return relu(v); });
    }
    w = std::move(p);
  }
  const Vector out = params.weights.back() * w;
  return {out.data(), out.data() + out.size()};
}

void NpConfig::validate() const {
  if (lags == 0 || horizon == 0) {
    throw ContractError("np config: lags and horizon must be positive");
  }
  if (!(changepoint_range > 0.0 && changepoint_range <= 1.0)) {
    throw ContractError("np config: changepoint range must lie in (0, 1]");
  }
  for (const auto& s : seasonalities) {
    if (!(s.period > 0.0) || s.order == 0) {
      throw ContractError("np config: seasonality needs period > 0 and order >= 1");
    }
  }
  if (!(samples_per_day > 0.0) || !(learning_rate > 0.0) || batch_size == 0 ||
      !(huber_beta > 0.0)) {
    throw ContractError("np config: invalid training settings");
  }
  if (autoregression && ar_layers > 0 && ar_hidden == 0) {
    throw ContractError("np config: AR-Net hidden width must be positive");
  }
}

NpModel::NpModel(const NpConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t d = config_.lags;
  const std::size_t horizon = config_.horizon;
  if (config_.trend) {
    const std::size_t m = config_.changepoints;
    growth_ = params_.add("trend.growth", 1, 1);
    offset_ = params_.add("trend.offset", 1, 1);
    growth_adj_ = params_.add("trend.growth_adjust", 1, m);
    if (config_.trend_mode == TrendMode::discontinuous) {
      offset_adj_ = params_.add("trend.offset_adjust", 1, m);
    }
    for (std::size_t j = 1; j <= m; ++j) {
      changepoints_.push_back(config_.changepoint_range * static_cast<double>(j) /
                              static_cast<double>(m));
    }
  }
  if (config_.seasonality) {
    for (std::size_t i = 0; i < config_.seasonalities.size(); ++i) {
      season_.push_back(
          params_.add("season." + std::to_string(i), 1, 2 * config_.seasonalities[i].order));
    }
  }
  if (config_.autoregression) {
    std::size_t in = d;
    for (std::size_t i = 0; i < config_.ar_layers; ++i) {
      ar_w_.push_back(params_.add("ar.U" + std::to_string(i + 1), config_.ar_hidden, in));
      ar_b_.push_back(params_.add("ar.b" + std::to_string(i + 1), 1, config_.ar_hidden));
      in = config_.ar_hidden;
    }
    ar_w_.push_back(params_.add("ar.U" + std::to_string(config_.ar_layers + 1), horizon, in));
    Rng rng(seed);
    for (std::size_t i = 0; i < ar_w_.size(); ++i) {
      const std::size_t fan_in = params_.slots()[ar_w_[i]].cols;
      init_uniform_fan_in(params_.slice(ar_w_[i]), fan_in, rng);
      if (i < ar_b_.size()) {
        init_uniform_fan_in(params_.slice(ar_b_[i]), fan_in, rng);
      }
    }
  }
  if (config_.regressor) {
    reg_ = params_.add("regressor.W", horizon, horizon);
  }
}

void NpModel::set_time_frame(double origin, double span) {
  if (!(span > 0.0) || !std::isfinite(origin)) {
    throw ContractError("time frame span must be positive");
  }
  time_origin_ = origin;
  time_span_ = span;
}

double NpModel::growth_per_sample() const {
  if (growth_ == kNone) {
    return 0.0;
  }
  return params_.tensor(growth_)(0, 0) / time_span_;
}

TrendParams NpModel::trend() const {
  TrendParams p;
  if (growth_ == kNone) {
    return p;
  }
  p.base_growth = params_.tensor(growth_)(0, 0);
  p.base_offset = params_.tensor(offset_)(0, 0);
  p.changepoints = changepoints_;
  const auto g = params_.slice(growth_adj_);
  p.growth_adjust.assign(g.begin(), g.end());
  if (config_.trend_mode == TrendMode::discontinuous) {
    const auto o = params_.slice(offset_adj_);
    p.offset_adjust.assign(o.begin(), o.end());
  } else {
    p.offset_adjust.resize(changepoints_.size());
    for (std::size_t j = 0; j < changepoints_.size(); ++j) {
      p.offset_adjust[j] = -changepoints_[j] * p.growth_adjust[j];
    }
  }
  return p;
}

SeasonalityParams NpModel::seasonality() const {
  SeasonalityParams p;
  for (std::size_t i = 0; i < season_.size(); ++i) {
    const std::size_t k = config_.seasonalities[i].order;
    const auto c = params_.slice(season_[i]);
    p.terms.push_back(config_.seasonalities[i]);
    p.cos_coeffs.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k));
    p.sin_coeffs.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(k), c.end());
  }
  return p;
}

ArNetParams NpModel::ar_net() const {
  ArNetParams p;
  p.lags = config_.lags;
  p.horizon = config_.horizon;
  p.activation = config_.ar_activation;
  if (ar_w_.empty()) {
    p.weights.push_back(DenseMatrix::Zero(static_cast<Eigen::Index>(config_.horizon),
                                          static_cast<Eigen::Index>(config_.lags)));
    return p;
  }
  for (std::size_t i = 0; i < ar_w_.size(); ++i) {
    p.weights.emplace_back(params_.tensor(ar_w_[i]));
    if (i < ar_b_.size()) {
      p.biases.emplace_back(params_.tensor(ar_b_[i]).row(0).transpose());
    }
  }
  return p;
}

DenseMatrix NpModel::regressor_weights() const {
  if (reg_ == kNone) {
    throw ContractError("model has no regressor head");
  }
  return params_.tensor(reg_);
}

void NpModel::set_trend(double base_growth, double base_offset,
                        std::span<const double> growth_adjust,
                        std::span<const double> offset_adjust) {
  if (growth_ == kNone) {
    throw ContractError("set_trend: trend component disabled");
  }
  const bool disc = config_.trend_mode == TrendMode::discontinuous;
  if (growth_adjust.size() != changepoints_.size() ||
      (disc && offset_adjust.size() != changepoints_.size()) || (!disc && !offset_adjust.empty())) {
    throw ContractError("set_trend: adjustment vectors do not match the changepoint count");
  }
  params_.tensor(growth_)(0, 0) = base_growth;
  params_.tensor(offset_)(0, 0) = base_offset;
  std::copy(growth_adjust.begin(), growth_adjust.end(), params_.slice(growth_adj_).begin());
  if (disc) {
    std::copy(offset_adjust.begin(), offset_adjust.end(), params_.slice(offset_adj_).begin());
  }
}

void NpModel::set_seasonality(std::size_t term, std::span<const double> cos_coeffs,
                              std::span<const double> sin_coeffs) {
  if (term >= season_.size()) {
    throw ContractError("set_seasonality: no such seasonality term");
  }
  const std::size_t k = config_.seasonalities[term].order;
  if (cos_coeffs.size() != k || sin_coeffs.size() != k) {
    throw ContractError("set_seasonality: expected " + std::to_string(k) + " coefficients each");
  }
  auto dst = params_.slice(season_[term]);
  std::copy(cos_coeffs.begin(), cos_coeffs.end(), dst.begin());
  std::copy(sin_coeffs.begin(), sin_coeffs.end(), dst.begin() + static_cast<std::ptrdiff_t>(k));
}

void NpModel::set_ar_net(const ArNetParams& ar) {
  ar.validate();
  if (ar.weights.size() != ar_w_.size() || ar.lags != config_.lags ||
      ar.horizon != config_.horizon) {
    throw ContractError("set_ar_net: layer structure differs from the model");
  }
  for (std::size_t i = 0; i < ar_w_.size(); ++i) {
    auto dst = params_.tensor(ar_w_[i]);
    if (dst.rows() != ar.weights[i].rows() || dst.cols() != ar.weights[i].cols()) {
      throw ContractError("set_ar_net: weight shape mismatch at layer " + std::to_string(i + 1));
    }
    dst = ar.weights[i];
    if (i < ar_b_.size()) {
      params_.tensor(ar_b_[i]).row(0) = ar.biases[i].transpose();
    }
  }
}

void NpModel::set_regressor_weights(const DenseMatrix& w) {
  if (reg_ == kNone) {
    throw ContractError("model has no regressor head");
  }
  auto dst = params_.tensor(reg_);
  if (dst.rows() != w.rows() || dst.cols() != w.cols()) {
    throw ContractError("regressor weights must be D x D");
  }
  dst = w;
}

std::vector<double> NpModel::trend_component(std::int64_t t) const {
  std::vector<double> out(config_.horizon, 0.0);
  if (growth_ == kNone) {
    return out;
  }
  const TrendParams p = trend();
  for (std::size_t h = 0; h < config_.horizon; ++h) {
    out[h] = trend_eval(normalized_time(static_cast<double>(t + 1 + static_cast<std::int64_t>(h))), p);
  }
  return out;
}

std::vector<double> NpModel::seasonality_component(std::int64_t t) const {
  std::vector<double> out(config_.horizon, 0.0);
  if (season_.empty()) {
    return out;
  }
  const SeasonalityParams p = seasonality();
  for (std::size_t h = 0; h < config_.horizon; ++h) {
    out[h] = seasonality_total(days(static_cast<double>(t + 1 + static_cast<std::int64_t>(h))), p);
  }
  return out;
}

std::vector<double> NpModel::ar_component(std::span<const double> lags) const {
  if (lags.size() != config_.lags) {
    throw ContractError("ar_component: expected " + std::to_string(config_.lags) + " lags");
  }
  if (ar_w_.empty()) {
    return std::vector<double>(config_.horizon, 0.0);
  }
  return ar_net_forward(lags, ar_net());
}

std::vector<double> NpModel::regressor_component(std::span<const double> regressor) const {
  if (reg_ == kNone) {
    return std::vector<double>(config_.horizon, 0.0);
  }
  if (regressor.size() != config_.horizon) {
    throw ContractError("regressor must have D = " + std::to_string(config_.horizon) + " values");
  }
  const Vector r =
      params_.tensor(reg_) * Eigen::Map<const Vector>(regressor.data(),
                                                      static_cast<Eigen::Index>(regressor.size()));
  return {r.data(), r.data() + r.size()};
}

std::vector<double> NpModel::forecast(std::int64_t t, std::span<const double> lags,
                                      std::span<const double> regressor) const {
  if (lags.size() != config_.lags) {
    throw ContractError("np_forecast: expected " + std::to_string(config_.lags) + " lags, got " +
                        std::to_string(lags.size()));
  }
  if (reg_ != kNone && regressor.empty()) {
    throw ContractError("np_forecast: model expects a future regressor but none was given");
  }
  if (reg_ == kNone && !regressor.empty()) {
    throw ContractError("np_forecast: model has no regressor head");
  }
  DenseMatrix in(1, static_cast<Eigen::Index>(lags.size()));
  std::copy(lags.begin(), lags.end(), in.data());
  DenseMatrix reg;
  if (!regressor.empty()) {
    reg.resize(1, static_cast<Eigen::Index>(regressor.size()));
    std::copy(regressor.begin(), regressor.end(), reg.data());
  }
  const std::int64_t times[1] = {t};
  const DenseMatrix out = forward(times, in, regressor.empty() ? nullptr : &reg, nullptr);
  return {out.data(), out.data() + out.size()};
}

struct NpModel::Tape {
  std::vector<DenseMatrix> pre;   // AR-Net pre-activations per hidden layer
  std::vector<DenseMatrix> post;  // activations; post[0] is the lag input
};

void NpModel::check_regressors(const DenseMatrix* regressors, Eigen::Index rows) const {
  if (reg_ != kNone) {
    if (regressors == nullptr) {
      throw ContractError("model expects future regressors but none were given");
    }
    if (regressors->rows() != rows ||
        regressors->cols() != static_cast<Eigen::Index>(config_.horizon)) {
      throw ContractError("regressor matrix must be windows x D");
    }
  } else if (regressors != nullptr) {
    throw ContractError("model has no regressor head");
  }
}

DenseMatrix NpModel::forward(std::span<const std::int64_t> times, const DenseMatrix& inputs,
                             const DenseMatrix* regressors, Tape* tape) const {
  const auto batch = inputs.rows();
  const auto horizon = static_cast<Eigen::Index>(config_.horizon);
  if (static_cast<Eigen::Index>(times.size()) != batch) {
    throw ContractError("np model needs one time index per window");
  }
  if (inputs.cols() != static_cast<Eigen::Index>(config_.lags)) {
    throw ContractError("np model expects " + std::to_string(config_.lags) + " lags");
  }
  check_regressors(regressors, batch);
  DenseMatrix out = DenseMatrix::Zero(batch, horizon);

  if (growth_ != kNone) {
    const TrendParams p = trend();
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index h = 0; h < horizon; ++h) {
        out(b, h) += trend_eval(normalized_time(static_cast<double>(times[b] + 1 + h)), p);
      }
    }
  }
  if (!season_.empty()) {
    std::vector<double> cs;
    std::vector<double> sn;
    for (std::size_t i = 0; i < season_.size(); ++i) {
      const auto& term = config_.seasonalities[i];
      const std::size_t k = term.order;
      cs.resize(k);
      sn.resize(k);
      const auto coeff = params_.slice(season_[i]);
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index h = 0; h < horizon; ++h) {
          const double angle = kTwoPi * days(static_cast<double>(times[b] + 1 + h)) / term.period;
          harmonics(angle, k, cs.data(), sn.data());
          double v = 0.0;
          for (std::size_t r = 0; r < k; ++r) {
            v += coeff[r] * cs[r] + coeff[k + r] * sn[r];
          }
          out(b, h) += v;
        }
      }
    }
  }
  if (!ar_w_.empty()) {
    DenseMatrix w = inputs;
    if (tape != nullptr) {
      tape->post.push_back(w);
    }
    for (std::size_t i = 0; i < ar_b_.size(); ++i) {
      DenseMatrix p = w * params_.tensor(ar_w_[i]).transpose();
      p.rowwise() += params_.tensor(ar_b_[i]).row(0);
      w = config_.ar_activation == ArActivation::relu
              ? DenseMatrix(p.unaryExpr([](double v) { return relu(v); }))
              : p;
      if (tape != nullptr) {
        tape->pre.push_back(std::move(p));
        tape->post.push_back(w);
      }
    }
    out.noalias() += w * params_.tensor(ar_w_.back()).transpose();
  }
  if (reg_ != kNone) {
    out.noalias() += *regressors * params_.tensor(reg_).transpose();
  }
  return out;
}

DenseMatrix NpModel::predict_batch(const SupervisedWindowSet& windows,
                                   const DenseMatrix* regressors) const {
  return forward(windows.times, windows.inputs, regressors, nullptr);
}

double NpModel::loss_and_grad(std::span<const std::int64_t> times, const DenseMatrix& inputs,
                              const DenseMatrix& labels, const DenseMatrix* regressors,
                              ParamStore* grad) const {
  if (labels.rows() != inputs.rows() ||
      labels.cols() != static_cast<Eigen::Index>(config_.horizon)) {
    throw ContractError("np loss: labels must be windows x D");
  }
  if (grad != nullptr && !grad->same_layout(params_)) {
    throw ContractError("np loss: gradient store layout differs from the model");
  }
  Tape tape;
  const DenseMatrix pred = forward(times, inputs, regressors, grad != nullptr ? &tape : nullptr);
  DenseMatrix g;
  const double loss = huber_loss(labels, pred, config_.huber_beta, grad != nullptr ? &g : nullptr);
  if (grad == nullptr) {
    return loss;
  }
  const auto batch = inputs.rows();
  const auto horizon = static_cast<Eigen::Index>(config_.horizon);

  if (growth_ != kNone) {
    const bool disc = config_.trend_mode == TrendMode::discontinuous;
    double& d_growth = grad->tensor(growth_)(0, 0);
    double& d_offset = grad->tensor(offset_)(0, 0);
    auto d_gadj = grad->slice(growth_adj_);
    std::span<double> d_oadj;
    if (disc) {
      d_oadj = grad->slice(offset_adj_);
    }
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index h = 0; h < horizon; ++h) {
        const double gv = g(b, h);
        const double tau = normalized_time(static_cast<double>(times[b] + 1 + h));
        d_growth += gv * tau;
        d_offset += gv;
        for (std::size_t j = 0; j < changepoints_.size(); ++j) {
          if (changepoint_indicator(tau, changepoints_[j]) == 0) {
            continue;
          }
          if (disc) {
            d_gadj[j] += gv * tau;
            d_oadj[j] += gv;
          } else {
            d_gadj[j] += gv * (tau - changepoints_[j]);
          }
        }
      }
    }
  }
  if (!season_.empty()) {
    std::vector<double> cs;
    std::vector<double> sn;
    for (std::size_t i = 0; i < season_.size(); ++i) {
      const auto& term = config_.seasonalities[i];
      const std::size_t k = term.order;
      cs.resize(k);
      sn.resize(k);
      auto d_coeff = grad->slice(season_[i]);
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index h = 0; h < horizon; ++h) {
          const double angle = kTwoPi * days(static_cast<double>(times[b] + 1 + h)) / term.period;
          harmonics(angle, k, cs.data(), sn.data());
          const double gv = g(b, h);
          for (std::size_t r = 0; r < k; ++r) {
            d_coeff[r] += gv * cs[r];
            d_coeff[k + r] += gv * sn[r];
          }
        }
      }
    }
  }
  if (!ar_w_.empty()) {
    const std::size_t hidden = ar_b_.size();
    grad->tensor(ar_w_.back()).noalias() += g.transpose() * tape.post.back();
    DenseMatrix d_w = g * params_.tensor(ar_w_.back());
    for (std::size_t i = hidden; i-- > 0;) {
      DenseMatrix d_pre = d_w;
      if (config_.ar_activation == ArActivation::relu) {
        d_pre.array() *= (tape.pre[i].array() > 0.0).cast<double>();
      }
      grad->tensor(ar_w_[i]).noalias() += d_pre.transpose() * tape.post[i];
      grad->tensor(ar_b_[i]).row(0) += d_pre.colwise().sum();
      if (i > 0) {
        d_w = d_pre * params_.tensor(ar_w_[i]);
      }
    }
  }
  if (reg_ != kNone) {
    grad->tensor(reg_).noalias() += g.transpose() * *regressors;
  }
  return loss;
}

CheckpointSection NpModel::to_section() const {
  CheckpointSection s("np");
  s.set("lags", static_cast<long long>(config_.lags));
  s.set("horizon", static_cast<long long>(config_.horizon));
  s.set("trend", static_cast<long long>(config_.trend));
  s.set("trend_mode", to_string(config_.trend_mode));
  s.set("changepoints", static_cast<long long>(config_.changepoints));
  s.set("changepoint_range", config_.changepoint_range);
  s.set("seasonality", static_cast<long long>(config_.seasonality));
  std::string terms;
  for (const auto& t : config_.seasonalities) {
    if (!terms.empty()) terms += ',';
    terms += std::to_string(t.order) + ":" + format_double(t.period);
  }
  s.set("seasonalities", terms);
  s.set("samples_per_day", config_.samples_per_day);
  s.set("autoregression", static_cast<long long>(config_.autoregression));
  s.set("ar_layers", static_cast<long long>(config_.ar_layers));
  s.set("ar_hidden", static_cast<long long>(config_.ar_hidden));
  s.set("ar_activation", to_string(config_.ar_activation));
  s.set("regressor", static_cast<long long>(config_.regressor));
  s.set("learning_rate", config_.learning_rate);
  s.set("epochs", static_cast<long long>(config_.epochs));
  s.set("batch_size", static_cast<long long>(config_.batch_size));
  s.set("huber_beta", config_.huber_beta);
  s.set("time_origin", time_origin_);
  s.set("time_span", time_span_);
  s.set("trained", static_cast<long long>(trained_ ? 1 : 0));
  s.add_params(params_);
  return s;
}

NpModel NpModel::from_section(const CheckpointSection& s) {
  if (s.kind() != "np") {
    throw DataError("expected an 'np' section, got '" + s.kind() + "'");
  }
  NpConfig c;
  c.lags = static_cast<std::size_t>(s.get_int("lags"));
  c.horizon = static_cast<std::size_t>(s.get_int("horizon"));
  c.trend = s.get_int("trend") != 0;
  c.trend_mode = parse_trend_mode(s.get("trend_mode"));
  c.changepoints = static_cast<std::size_t>(s.get_int("changepoints"));
  c.changepoint_range = s.get_double("changepoint_range");
  c.seasonality = s.get_int("seasonality") != 0;
  c.seasonalities.clear();
  const std::string& terms = s.get("seasonalities");
  std::size_t pos = 0;
  while (pos < terms.size()) {
    std::size_t comma = terms.find(',', pos);
    if (comma == std::string::npos) comma = terms.size();
    const std::string item = terms.substr(pos, comma - pos);
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw DataError("bad seasonality term '" + item + "'");
    }
    c.seasonalities.push_back(
        {parse_double(item.substr(colon + 1)), static_cast<std::size_t>(std::stoul(item.substr(0, colon)))});
    pos = comma + 1;
  }
  c.samples_per_day = s.get_double("samples_per_day");
  c.autoregression = s.get_int("autoregression") != 0;
  c.ar_layers = static_cast<std::size_t>(s.get_int("ar_layers"));
  c.ar_hidden = static_cast<std::size_t>(s.get_int("ar_hidden"));
  c.ar_activation = parse_ar_activation(s.get("ar_activation"));
  c.regressor = s.get_int("regressor") != 0;
  c.learning_rate = s.get_double("learning_rate");
  c.epochs = static_cast<std::size_t>(s.get_int("epochs"));
  c.batch_size = static_cast<std::size_t>(s.get_int("batch_size"));
  c.huber_beta = s.get_double("huber_beta");
  NpModel model(c, 0);
  model.set_time_frame(s.get_double("time_origin"), s.get_double("time_span"));
  s.read_params(model.params_);
  model.trained_ = s.get_int("trained") != 0;
  return model;
}

std::string NpModel::digest() const {
  Checkpoint cp;
  cp.sections.push_back(to_section());
  return sha256_hex(cp.serialize());
}

NpTrainResult np_train(NpModel& model, const SupervisedWindowSet& data,
                       const DenseMatrix* regressors, std::uint64_t seed) {
  const auto& cfg = model.config();
  if (data.empty()) {
    throw ContractError("np_train: empty dataset");
  }
  if (data.times.size() != data.size() || data.times.size() != static_cast<std::size_t>(data.inputs.rows())) {
    throw ContractError("np_train: every window needs an absolute time index");
  }
  if (data.lags != cfg.lags || data.horizon != cfg.horizon) {
    throw ContractError("np_train: window shape does not match the model");
  }
  const auto [tmin, tmax] = std::minmax_element(data.times.begin(), data.times.end());
  const double origin = static_cast<double>(*tmin + 1);
  const double end = static_cast<double>(*tmax + static_cast<std::int64_t>(cfg.horizon));
  model.set_time_frame(origin, std::max(end - origin, 1.0));

  Rng rng(seed);
  AdamState adam(model.params().size());
  ParamStore grad = model.params().zeros_like();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = cfg.batch_size;
  const bool with_reg = regressors != nullptr;

  NpTrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t rows = std::min(batch, order.size() - start);
      const auto r = static_cast<Eigen::Index>(rows);
      DenseMatrix x(r, data.inputs.cols());
      DenseMatrix y(r, data.labels.cols());
      DenseMatrix reg;
      if (with_reg) reg.resize(r, regressors->cols());
      std::vector<std::int64_t> t(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        const auto src = static_cast<Eigen::Index>(order[start + i]);
        const auto dst = static_cast<Eigen::Index>(i);
        x.row(dst) = data.inputs.row(src);
        y.row(dst) = data.labels.row(src);
        if (with_reg) reg.row(dst) = regressors->row(src);
        t[i] = data.times[order[start + i]];
      }
      grad.set_zero();
      const double loss = model.loss_and_grad(t, x, y, with_reg ? &reg : nullptr, &grad);
      if (!std::isfinite(loss) || !all_finite(grad.values())) {
        throw DivergenceError("np", epoch + 1, batches + 1);
      }
      adam_update(model.params().values(), grad.values(), adam, cfg.learning_rate);
      loss_sum += loss;
      ++batches;
    }
    result.loss_history.push_back(loss_sum / static_cast<double>(batches));
  }
  model.mark_trained();
  return result;
}

}  // namespace csipred
