#include "csipred/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csipred/errors.hpp"

namespace csipred {

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::rnn:
      return "rnn";
    case Architecture::lstm:
      return "lstm";
    case Architecture::bilstm:
      return "bilstm";
  }
  return "?";
}

std::string to_string(BiCombine combine) {
  return combine == BiCombine::hadamard ? "hadamard" : "concat";
}

Architecture parse_architecture(const std::string& text) {
  if (text == "rnn") return Architecture::rnn;
  if (text == "lstm") return Architecture::lstm;
  if (text == "bilstm") return Architecture::bilstm;
  throw ConfigError("unknown recurrent architecture '" + text + "'");
}

BiCombine parse_bi_combine(const std::string& text) {
  if (text == "hadamard") return BiCombine::hadamard;
  if (text == "concat") return BiCombine::concat;
  throw ConfigError("unknown bilstm combine mode '" + text + "'");
}

LstmWeights LstmWeights::zeros(std::size_t hidden, std::size_t input_size) {
  const auto h = static_cast<Eigen::Index>(hidden);
  LstmWeights w;
  w.input = DenseMatrix::Zero(4 * h, static_cast<Eigen::Index>(input_size));
  w.recurrent = DenseMatrix::Zero(4 * h, h);
  w.bias = Vector::Zero(4 * h);
  return w;
}

LstmState LstmState::zeros(std::size_t hidden) {
  const auto h = static_cast<Eigen::Index>(hidden);
  return {Vector::Zero(h), Vector::Zero(h)};
}

namespace {

Vector sigmoid_v(const Vector& z) { return z.unaryExpr([](double v) { return sigmoid(v); }); }

}  // namespace

Vector rnn_cell_forward(const Vector& x, const Vector& s_prev, const RnnWeights& w) {
  if (w.input.rows() != w.recurrent.rows() || w.recurrent.rows() != w.recurrent.cols() ||
      w.bias.size() != w.input.rows() || x.size() != w.input.cols() ||
      s_prev.size() != w.recurrent.cols()) {
    throw ContractError("rnn_cell_forward: dimension mismatch");
  }
  Vector a = w.input * x + w.recurrent * s_prev + w.bias;
  return a.array().tanh();
}

LstmState lstm_cell_forward(const Vector& x, const LstmState& prev, const LstmWeights& w) {
  const auto h = w.recurrent.cols();
  if (w.input.rows() != 4 * h || w.recurrent.rows() != 4 * h || w.bias.size() != 4 * h ||
      x.size() != w.input.cols() || prev.s.size() != h || prev.c.size() != h) {
    throw ContractError("lstm_cell_forward: dimension mismatch");
  }
  const Vector z = w.input * x + w.recurrent * prev.s + w.bias;
  const Vector f = sigmoid_v(z.segment(0, h));
  const Vector i = sigmoid_v(z.segment(h, h));
  const Vector g = z.segment(2 * h, h).array().tanh();
  const Vector o = sigmoid_v(z.segment(3 * h, h));
  LstmState next;
  next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);
  next.s = o.cwiseProduct(Vector(next.c.array().tanh()));
  return next;
}

std::vector<Vector> bilstm_forward(const std::vector<Vector>& sequence, const LstmWeights& forward,
                                   const LstmWeights& backward, BiCombine combine) {
  if (sequence.empty()) {
    throw ContractError("bilstm_forward: empty sequence");
  }
  if (forward.hidden() != backward.hidden()) {
    throw ContractError("bilstm_forward: directions must share hidden size");
  }
  const std::size_t n = sequence.size();
  std::vector<Vector> fwd(n);
  std::vector<Vector> bwd(n);
  LstmState state = LstmState::zeros(forward.hidden());
  for (std::size_t t = 0; t < n; ++t) {
    state = lstm_cell_forward(sequence[t], state, forward);
    fwd[t] = state.s;
  }
  state = LstmState::zeros(backward.hidden());
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = n - 1 - k;
    state = lstm_cell_forward(sequence[t], state, backward);
    bwd[t] = state.s;
  }
  std::vector<Vector> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (combine == BiCombine::hadamard) {
      out[t] = fwd[t].cwiseProduct(bwd[t]);
    } else {
      out[t].resize(fwd[t].size() + bwd[t].size());
      out[t] << fwd[t], bwd[t];
    }
  }
  return out;
}

Vector apply_dropout(const Vector& activations, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ContractError("apply_dropout: probability must lie in [0, 1)");
  }
  if (!training || p == 0.0) {
    return activations;
  }
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Vector out(activations.size());
  for (Eigen::Index i = 0; i < activations.size(); ++i) {
    out(i) = keep(rng) ? activations(i) * scale : 0.0;
  }
  return out;
}

void RecurrentConfig::validate() const {
  if (lags == 0 || horizon == 0 || hidden == 0 || layers == 0) {
    throw ContractError("recurrent config: lags, horizon, hidden and layers must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ContractError("recurrent config: dropout must lie in [0, 1)");
  }
  if (!(training.learning_rate > 0.0) || training.batch_size == 0 ||
      !(training.huber_beta > 0.0) || !(training.clip_norm > 0.0)) {
    throw ContractError("recurrent config: invalid training settings");
  }
}

namespace {

// Recurrent states indexed by sequence position: h[t] is the state right
// after the cell consumed x_t, whichever direction the pass runs.
struct DirectionTape {
  std::vector<DenseMatrix> h;
  std::vector<DenseMatrix> c;
  std::vector<DenseMatrix> gates;  // activated f, i, g, o blocks (lstm only)
};

struct LayerTape {
  std::vector<DenseMatrix> inputs;
  DirectionTape fwd;
  DirectionTape bwd;
  std::vector<DenseMatrix> outputs;
  std::vector<DenseMatrix> masks;
  DenseMatrix summary;
};

void run_direction(bool lstm, ConstMatrixMap w, ConstMatrixMap v, ConstMatrixMap b,
                   const std::vector<DenseMatrix>& xs, bool reverse, DirectionTape& tape) {
  const std::size_t n = xs.size();
  const Eigen::Index batch = xs.front().rows();
  const Eigen::Index h = v.cols();
  tape.h.assign(n, DenseMatrix());
  if (lstm) {
    tape.c.assign(n, DenseMatrix());
    tape.gates.assign(n, DenseMatrix());
  }
  DenseMatrix s = DenseMatrix::Zero(batch, h);
  DenseMatrix c = DenseMatrix::Zero(batch, h);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    DenseMatrix z = xs[t] * w.transpose() + s * v.transpose();
    z.rowwise() += b.row(0);
    if (!lstm) {
      s = z.array().tanh();
      tape.h[t] = s;
      continue;
    }
    z.leftCols(2 * h) = z.leftCols(2 * h).unaryExpr([](double a) { return sigmoid(a); });
    z.middleCols(2 * h, h) = z.middleCols(2 * h, h).array().tanh();
    z.rightCols(h) = z.rightCols(h).unaryExpr([](double a) { return sigmoid(a); });
    c = z.leftCols(h).cwiseProduct(c) + z.middleCols(h, h).cwiseProduct(z.middleCols(2 * h, h));
    s = z.rightCols(h).cwiseProduct(DenseMatrix(c.array().tanh()));
    tape.gates[t] = std::move(z);
    tape.c[t] = c;
    tape.h[t] = s;
  }
}

// Backpropagates dh_ext (gradient on each stored h[t]) through one direction.
void backprop_direction(bool lstm, ConstMatrixMap w, ConstMatrixMap v,
                        const std::vector<DenseMatrix>& xs, bool reverse,
                        const DirectionTape& tape, const std::vector<DenseMatrix>& dh_ext,
                        MatrixMap dw, MatrixMap dv, MatrixMap db,
                        std::vector<DenseMatrix>* dxs) {
  const std::size_t n = xs.size();
  const Eigen::Index batch = xs.front().rows();
  const Eigen::Index h = v.cols();
  const DenseMatrix zero = DenseMatrix::Zero(batch, h);
  DenseMatrix d_rec = zero;
  DenseMatrix dc_rec = zero;
  DenseMatrix dz(batch, lstm ? 4 * h : h);
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t t = reverse ? n - 1 - k : k;
    const bool has_prev = k > 0;
    const std::size_t p = reverse ? t + 1 : t - 1;
    const DenseMatrix& s_prev = has_prev ? tape.h[p] : zero;
    const DenseMatrix dh = dh_ext[t] + d_rec;
    if (!lstm) {
      dz.array() = dh.array() * (1.0 - tape.h[t].array().square());
    } else {
      const DenseMatrix& gates = tape.gates[t];
      const auto f = gates.leftCols(h).array();
      const auto i = gates.middleCols(h, h).array();
      const auto g = gates.middleCols(2 * h, h).array();
      const auto o = gates.rightCols(h).array();
      const DenseMatrix& c_prev = has_prev ? tape.c[p] : zero;
      const DenseMatrix tc = tape.c[t].array().tanh();
      const DenseMatrix dc =
          dc_rec.array() + dh.array() * o * (1.0 - tc.array().square());
      dz.leftCols(h).array() = dc.array() * c_prev.array() * f * (1.0 - f);
      dz.middleCols(h, h).array() = dc.array() * g * i * (1.0 - i);
      dz.middleCols(2 * h, h).array() = dc.array() * i * (1.0 - g.square());
      dz.rightCols(h).array() = dh.array() * tc.array() * o * (1.0 - o);
      dc_rec = dc.array() * f;
    }
    dw.noalias() += dz.transpose() * xs[t];
    dv.noalias() += dz.transpose() * s_prev;
    db.row(0) += dz.colwise().sum();
    if (dxs != nullptr) {
      (*dxs)[t].noalias() += dz * w;
    }
    d_rec.noalias() = dz * v;
  }
}

DenseMatrix combine_states(const DenseMatrix& fwd, const DenseMatrix& bwd, BiCombine mode) {
  if (mode == BiCombine::hadamard) {
    return fwd.cwiseProduct(bwd);
  }
  DenseMatrix out(fwd.rows(), fwd.cols() + bwd.cols());
  out << fwd, bwd;
  return out;
}

// Splits the gradient of a combined output back onto the two directions.
void split_combined_grad(const DenseMatrix& d_out, const DenseMatrix& fwd, const DenseMatrix& bwd,
                         BiCombine mode, DenseMatrix& d_fwd, DenseMatrix& d_bwd) {
  if (mode == BiCombine::hadamard) {
    d_fwd += d_out.cwiseProduct(bwd);
    d_bwd += d_out.cwiseProduct(fwd);
  } else {
    d_fwd += d_out.leftCols(fwd.cols());
    d_bwd += d_out.rightCols(bwd.cols());
  }
}

constexpr std::size_t kPredictChunk = 256;

}  // namespace

struct RecurrentModel::ForwardTape {
  std::vector<LayerTape> layers;
};

RecurrentModel::RecurrentModel(const RecurrentConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t gates = config_.arch == Architecture::rnn ? 1 : 4;
  const std::size_t h = config_.hidden;
  for (std::size_t k = 0; k < config_.layers; ++k) {
    const std::size_t in = layer_input_size(k);
    const std::string prefix = "layer" + std::to_string(k);
    LayerSlots slots;
    slots.w = params_.add(prefix + ".fw.W", gates * h, in);
    slots.v = params_.add(prefix + ".fw.V", gates * h, h);
    slots.b = params_.add(prefix + ".fw.b", 1, gates * h);
    if (config_.arch == Architecture::bilstm) {
      slots.bw_w = params_.add(prefix + ".bw.W", gates * h, in);
      slots.bw_v = params_.add(prefix + ".bw.V", gates * h, h);
      slots.bw_b = params_.add(prefix + ".bw.b", 1, gates * h);
    }
    layers_.push_back(slots);
  }
  out_w_ = params_.add("out.W", config_.horizon, layer_output_size());
  out_b_ = params_.add("out.b", 1, config_.horizon);

  for (std::size_t k = 0; k < config_.layers; ++k) {
    const std::size_t fan_in = layer_input_size(k) + h;
    const auto& s = layers_[k];
    for (std::size_t idx : {s.w, s.v, s.b}) {
      init_uniform_fan_in(params_.slice(idx), fan_in, rng);
    }
    if (config_.arch == Architecture::bilstm) {
      for (std::size_t idx : {s.bw_w, s.bw_v, s.bw_b}) {
        init_uniform_fan_in(params_.slice(idx), fan_in, rng);
      }
    }
  }
  init_uniform_fan_in(params_.slice(out_w_), layer_output_size(), rng);
  init_uniform_fan_in(params_.slice(out_b_), layer_output_size(), rng);
}

std::size_t RecurrentModel::layer_output_size() const {
  if (config_.arch == Architecture::bilstm && config_.combine == BiCombine::concat) {
    return 2 * config_.hidden;
  }
  return config_.hidden;
}

std::size_t RecurrentModel::layer_input_size(std::size_t layer) const {
  return layer == 0 ? 1 : layer_output_size();
}

DenseMatrix RecurrentModel::forward_impl(const DenseMatrix& inputs, ForwardTape* tape,
                                         Rng* dropout_rng) const {
  if (static_cast<std::size_t>(inputs.cols()) != config_.lags) {
    throw ContractError("recurrent model expects " + std::to_string(config_.lags) +
                        " lags, got " + std::to_string(inputs.cols()));
  }
  const std::size_t n = config_.lags;
  const bool lstm = config_.arch != Architecture::rnn;
  const bool bi = config_.arch == Architecture::bilstm;
  const bool drop = dropout_rng != nullptr && config_.dropout > 0.0;

  std::vector<DenseMatrix> xs(n);
  for (std::size_t t = 0; t < n; ++t) {
    xs[t] = inputs.col(static_cast<Eigen::Index>(t));
  }
  DenseMatrix summary;
  for (std::size_t k = 0; k < config_.layers; ++k) {
    const auto& s = layers_[k];
    LayerTape lt;
    run_direction(lstm, params_.tensor(s.w), params_.tensor(s.v), params_.tensor(s.b), xs, false,
                  lt.fwd);
    if (bi) {
      run_direction(lstm, params_.tensor(s.bw_w), params_.tensor(s.bw_v), params_.tensor(s.bw_b),
                    xs, true, lt.bwd);
    }
    lt.outputs.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      lt.outputs[t] = bi ? combine_states(lt.fwd.h[t], lt.bwd.h[t], config_.combine) : lt.fwd.h[t];
    }
    lt.summary = bi ? combine_states(lt.fwd.h[n - 1], lt.bwd.h[0], config_.combine)
                    : lt.fwd.h[n - 1];
    summary = lt.summary;

    const bool last = k + 1 == config_.layers;
    if (!last) {
      std::vector<DenseMatrix> next(n);
      if (drop) {
        std::bernoulli_distribution keep(1.0 - config_.dropout);
        const double scale = 1.0 / (1.0 - config_.dropout);
        lt.masks.resize(n);
        for (std::size_t t = 0; t < n; ++t) {
          DenseMatrix mask(lt.outputs[t].rows(), lt.outputs[t].cols());
          for (Eigen::Index i = 0; i < mask.size(); ++i) {
            mask.data()[i] = keep(*dropout_rng) ? scale : 0.0;
          }
          next[t] = lt.outputs[t].cwiseProduct(mask);
          lt.masks[t] = std::move(mask);
        }
      } else {
        next = lt.outputs;
      }
      lt.inputs = std::move(xs);
      xs = std::move(next);
    } else {
      lt.inputs = std::move(xs);
    }
    if (tape != nullptr) {
      tape->layers.push_back(std::move(lt));
    }
  }
  DenseMatrix out = summary * params_.tensor(out_w_).transpose();
  out.rowwise() += params_.tensor(out_b_).row(0);
  return out;
}

double RecurrentModel::loss_and_grad(const DenseMatrix& inputs, const DenseMatrix& labels,
                                     ParamStore* grad, Rng* dropout_rng) const {
  if (inputs.rows() != labels.rows() ||
      static_cast<std::size_t>(labels.cols()) != config_.horizon) {
    throw ContractError("loss_and_grad: inputs/labels shape mismatch");
  }
  if (grad != nullptr && !grad->same_layout(params_)) {
    throw ContractError("loss_and_grad: gradient store layout differs from the model");
  }
  ForwardTape tape;
  const DenseMatrix pred = forward_impl(inputs, grad != nullptr ? &tape : nullptr, dropout_rng);
  DenseMatrix d_pred;
  const double loss =
      huber_loss(labels, pred, config_.training.huber_beta, grad != nullptr ? &d_pred : nullptr);
  if (grad == nullptr) {
    return loss;
  }

  const std::size_t n = config_.lags;
  const bool lstm = config_.arch != Architecture::rnn;
  const bool bi = config_.arch == Architecture::bilstm;
  const Eigen::Index batch = inputs.rows();
  const Eigen::Index h = static_cast<Eigen::Index>(config_.hidden);

  const DenseMatrix& top_summary = tape.layers.back().summary;
  grad->tensor(out_w_).noalias() += d_pred.transpose() * top_summary;
  grad->tensor(out_b_).row(0) += d_pred.colwise().sum();
  DenseMatrix d_summary = d_pred * params_.tensor(out_w_);

  const auto out_cols = static_cast<Eigen::Index>(layer_output_size());
  std::vector<DenseMatrix> d_out(n, DenseMatrix::Zero(batch, out_cols));
  for (std::size_t k = config_.layers; k-- > 0;) {
    const LayerTape& lt = tape.layers[k];
    const auto& s = layers_[k];
    std::vector<DenseMatrix> d_fwd(n, DenseMatrix::Zero(batch, h));
    std::vector<DenseMatrix> d_bwd;
    if (bi) {
      d_bwd.assign(n, DenseMatrix::Zero(batch, h));
      for (std::size_t t = 0; t < n; ++t) {
        split_combined_grad(d_out[t], lt.fwd.h[t], lt.bwd.h[t], config_.combine, d_fwd[t],
                            d_bwd[t]);
      }
      if (d_summary.size() > 0) {
        split_combined_grad(d_summary, lt.fwd.h[n - 1], lt.bwd.h[0], config_.combine,
                            d_fwd[n - 1], d_bwd[0]);
      }
    } else {
      for (std::size_t t = 0; t < n; ++t) {
        d_fwd[t] += d_out[t];
      }
      if (d_summary.size() > 0) {
        d_fwd[n - 1] += d_summary;
      }
    }

    std::vector<DenseMatrix> dxs;
    if (k > 0) {
      dxs.assign(n, DenseMatrix::Zero(batch, static_cast<Eigen::Index>(layer_input_size(k))));
    }
    std::vector<DenseMatrix>* dxs_ptr = k > 0 ? &dxs : nullptr;
    backprop_direction(lstm, params_.tensor(s.w), params_.tensor(s.v), lt.inputs, false, lt.fwd,
                       d_fwd, grad->tensor(s.w), grad->tensor(s.v), grad->tensor(s.b), dxs_ptr);
    if (bi) {
      backprop_direction(lstm, params_.tensor(s.bw_w), params_.tensor(s.bw_v), lt.inputs, true,
                         lt.bwd, d_bwd, grad->tensor(s.bw_w), grad->tensor(s.bw_v),
                         grad->tensor(s.bw_b), dxs_ptr);
    }
    if (k > 0) {
      const LayerTape& below = tape.layers[k - 1];
      for (std::size_t t = 0; t < n; ++t) {
        d_out[t] = below.masks.empty() ? dxs[t] : DenseMatrix(dxs[t].cwiseProduct(below.masks[t]));
      }
      d_summary.resize(0, 0);
    }
  }
  return loss;
}

DenseMatrix RecurrentModel::predict_batch(const DenseMatrix& inputs) const {
  if (!trained_) {
    throw ContractError("predict: model has not been trained");
  }
  DenseMatrix out(inputs.rows(), static_cast<Eigen::Index>(config_.horizon));
  const auto chunk = static_cast<Eigen::Index>(kPredictChunk);
  for (Eigen::Index start = 0; start < inputs.rows(); start += chunk) {
    const Eigen::Index rows = std::min(chunk, inputs.rows() - start);
    out.middleRows(start, rows) = forward_impl(inputs.middleRows(start, rows), nullptr, nullptr);
  }
  return out;
}

std::vector<double> RecurrentModel::predict(std::span<const double> lags) const {
  if (lags.size() != config_.lags) {
    throw ContractError("predict: expected " + std::to_string(config_.lags) + " lags, got " +
                        std::to_string(lags.size()));
  }
  DenseMatrix in(1, static_cast<Eigen::Index>(lags.size()));
  std::copy(lags.begin(), lags.end(), in.data());
  const DenseMatrix out = predict_batch(in);
  return {out.data(), out.data() + out.size()};
}

std::vector<double> predict_horizon(const RecurrentModel& model, std::span<const double> lags) {
  return model.predict(lags);
}

RnnWeights RecurrentModel::rnn_weights(std::size_t layer) const {
  if (config_.arch != Architecture::rnn || layer >= layers_.size()) {
    throw ContractError("rnn_weights: not an rnn layer");
  }
  const auto& s = layers_[layer];
  return {params_.tensor(s.w), params_.tensor(s.v), params_.tensor(s.b).row(0).transpose()};
}

LstmWeights RecurrentModel::lstm_weights(std::size_t layer, bool backward) const {
  if (config_.arch == Architecture::rnn || layer >= layers_.size() ||
      (backward && config_.arch != Architecture::bilstm)) {
    throw ContractError("lstm_weights: no such lstm layer/direction");
  }
  const auto& s = layers_[layer];
  const std::size_t w = backward ? s.bw_w : s.w;
  const std::size_t v = backward ? s.bw_v : s.v;
  const std::size_t b = backward ? s.bw_b : s.b;
  return {params_.tensor(w), params_.tensor(v), params_.tensor(b).row(0).transpose()};
}

void RecurrentModel::set_rnn_weights(std::size_t layer, const RnnWeights& w) {
  const RnnWeights current = rnn_weights(layer);
  if (current.input.rows() != w.input.rows() || current.input.cols() != w.input.cols() ||
      current.recurrent.rows() != w.recurrent.rows() || current.bias.size() != w.bias.size()) {
    throw ContractError("set_rnn_weights: shape mismatch");
  }
  const auto& s = layers_[layer];
  params_.tensor(s.w) = w.input;
  params_.tensor(s.v) = w.recurrent;
  params_.tensor(s.b).row(0) = w.bias.transpose();
}

void RecurrentModel::set_lstm_weights(std::size_t layer, const LstmWeights& w, bool backward) {
  const LstmWeights current = lstm_weights(layer, backward);
  if (current.input.rows() != w.input.rows() || current.input.cols() != w.input.cols() ||
      current.recurrent.rows() != w.recurrent.rows() || current.bias.size() != w.bias.size()) {
    throw ContractError("set_lstm_weights: shape mismatch");
  }
  const auto& s = layers_[layer];
  params_.tensor(backward ? s.bw_w : s.w) = w.input;
  params_.tensor(backward ? s.bw_v : s.v) = w.recurrent;
  params_.tensor(backward ? s.bw_b : s.b).row(0) = w.bias.transpose();
}

CheckpointSection RecurrentModel::to_section() const {
  CheckpointSection s("recurrent");
  s.set("arch", to_string(config_.arch));
  s.set("lags", static_cast<long long>(config_.lags));
  s.set("horizon", static_cast<long long>(config_.horizon));
  s.set("hidden", static_cast<long long>(config_.hidden));
  s.set("layers", static_cast<long long>(config_.layers));
  s.set("dropout", config_.dropout);
  s.set("combine", to_string(config_.combine));
  s.set("learning_rate", config_.training.learning_rate);
  s.set("epochs", static_cast<long long>(config_.training.epochs));
  s.set("batch_size", static_cast<long long>(config_.training.batch_size));
  s.set("huber_beta", config_.training.huber_beta);
  s.set("clip_norm", config_.training.clip_norm);
  s.set("trained", static_cast<long long>(trained_ ? 1 : 0));
  s.add_params(params_);
  return s;
}

RecurrentModel RecurrentModel::from_section(const CheckpointSection& section) {
  if (section.kind() != "recurrent") {
    throw DataError("expected a 'recurrent' section, got '" + section.kind() + "'");
  }
  RecurrentConfig c;
  c.arch = parse_architecture(section.get("arch"));
  c.lags = static_cast<std::size_t>(section.get_int("lags"));
  c.horizon = static_cast<std::size_t>(section.get_int("horizon"));
  c.hidden = static_cast<std::size_t>(section.get_int("hidden"));
  c.layers = static_cast<std::size_t>(section.get_int("layers"));
  c.dropout = section.get_double("dropout");
  c.combine = parse_bi_combine(section.get("combine"));
  c.training.learning_rate = section.get_double("learning_rate");
  c.training.epochs = static_cast<std::size_t>(section.get_int("epochs"));
  c.training.batch_size = static_cast<std::size_t>(section.get_int("batch_size"));
  c.training.huber_beta = section.get_double("huber_beta");
  c.training.clip_norm = section.get_double("clip_norm");
  RecurrentModel model(c, 0);
  section.read_params(model.params_);
  model.trained_ = section.get_int("trained") != 0;
  return model;
}

std::string RecurrentModel::digest() const {
  Checkpoint cp;
  cp.sections.push_back(to_section());
  return sha256_hex(cp.serialize());
}

RecurrentTrainResult train_recurrent(RecurrentModel& model, const SupervisedWindowSet& data,
                                     std::uint64_t seed) {
  const auto& cfg = model.config();
  if (data.empty()) {
    throw ContractError("train_recurrent: empty dataset");
  }
  if (data.lags != cfg.lags || data.horizon != cfg.horizon ||
      static_cast<std::size_t>(data.inputs.cols()) != cfg.lags ||
      static_cast<std::size_t>(data.labels.cols()) != cfg.horizon) {
    throw ContractError("train_recurrent: window shape (" + std::to_string(data.lags) + ", " +
                        std::to_string(data.horizon) + ") does not match the model (" +
                        std::to_string(cfg.lags) + ", " + std::to_string(cfg.horizon) + ")");
  }
  Rng rng(seed);
  AdamState adam(model.params().size());
  ParamStore grad = model.params().zeros_like();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = cfg.training.batch_size;

  RecurrentTrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.training.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t rows = std::min(batch, order.size() - start);
      DenseMatrix x(static_cast<Eigen::Index>(rows), data.inputs.cols());
      DenseMatrix y(static_cast<Eigen::Index>(rows), data.labels.cols());
      for (std::size_t r = 0; r < rows; ++r) {
        const auto src = static_cast<Eigen::Index>(order[start + r]);
        x.row(static_cast<Eigen::Index>(r)) = data.inputs.row(src);
        y.row(static_cast<Eigen::Index>(r)) = data.labels.row(src);
      }
      grad.set_zero();
      const double loss = model.loss_and_grad(x, y, &grad, &rng);
      if (!std::isfinite(loss) || !all_finite(grad.values())) {
        throw DivergenceError(to_string(cfg.arch), epoch + 1, batches + 1);
      }
      clip_global_norm(grad.values(), cfg.training.clip_norm);
      adam_update(model.params().values(), grad.values(), adam, cfg.training.learning_rate);
      loss_sum += loss;
      ++batches;
    }
    result.loss_history.push_back(loss_sum / static_cast<double>(batches));
  }
  model.mark_trained();
  return result;
}

}  // namespace csipred
