#pragma once

// Hand-built recurrent predictors (Elman RNN, LSTM, BiLSTM) with full
// backpropagation through time. A model maps a window of d scalar lags to
// D future values through stacked recurrent layers and one dense projection
// of the last layer's summary state.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csipred/checkpoint.hpp"
#include "csipred/datapipe.hpp"
#include "csipred/numcore.hpp"

namespace csipred {

enum class Architecture { rnn, lstm, bilstm };
enum class BiCombine { hadamard, concat };

std::string to_string(Architecture arch);
std::string to_string(BiCombine combine);
Architecture parse_architecture(const std::string& text);
BiCombine parse_bi_combine(const std::string& text);

struct RnnWeights {
  DenseMatrix input;      // hidden x input
  DenseMatrix recurrent;  // hidden x hidden
  Vector bias;            // hidden
};

enum class Gate { forget = 0, input = 1, candidate = 2, output = 3 };

// Gate blocks are stacked row-wise in the order forget, input, candidate, output.
struct LstmWeights {
  DenseMatrix input;      // 4*hidden x input
  DenseMatrix recurrent;  // 4*hidden x hidden
  Vector bias;            // 4*hidden

  static LstmWeights zeros(std::size_t hidden, std::size_t input_size);
  std::size_t hidden() const { return static_cast<std::size_t>(recurrent.cols()); }
  std::size_t input_size() const { return static_cast<std::size_t>(input.cols()); }

  auto input_gate(Gate g) { return input.middleRows(static_cast<Eigen::Index>(index(g)), rows()); }
  auto recurrent_gate(Gate g) {
    return recurrent.middleRows(static_cast<Eigen::Index>(index(g)), rows());
  }
  auto bias_gate(Gate g) { return bias.segment(static_cast<Eigen::Index>(index(g)), rows()); }

 private:
  Eigen::Index rows() const { return recurrent.cols(); }
  std::size_t index(Gate g) const { return static_cast<std::size_t>(g) * hidden(); }
};

struct LstmState {
  Vector s;  // short-term (output) state
  Vector c;  // long-term cell state
  static LstmState zeros(std::size_t hidden);
};

Vector rnn_cell_forward(const Vector& x, const Vector& s_prev, const RnnWeights& w);
LstmState lstm_cell_forward(const Vector& x, const LstmState& prev, const LstmWeights& w);

// Per-step outputs y_t = fwd_t (x) bwd_t, where fwd runs left to right and bwd
// right to left over the same sequence. Concat stacks [fwd_t; bwd_t] instead.
std::vector<Vector> bilstm_forward(const std::vector<Vector>& sequence, const LstmWeights& forward,
                                   const LstmWeights& backward,
                                   BiCombine combine = BiCombine::hadamard);

// Inverted dropout: survivors scaled by 1/(1-p); identity when not training.
Vector apply_dropout(const Vector& activations, double p, bool training, Rng& rng);

struct RecurrentTraining {
  double learning_rate = 0.001;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double huber_beta = 1.0;
  double clip_norm = 5.0;
};

struct RecurrentConfig {
  Architecture arch = Architecture::rnn;
  std::size_t lags = 48;
  std::size_t horizon = 24;
  std::size_t hidden = 200;  // per direction for bilstm
  std::size_t layers = 3;
  double dropout = 0.2;
  BiCombine combine = BiCombine::hadamard;
  RecurrentTraining training;

  void validate() const;
};

class RecurrentModel {
 public:
  RecurrentModel(const RecurrentConfig& config, std::uint64_t seed);

  const RecurrentConfig& config() const { return config_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Width of one layer's per-step output (2*hidden for concat bilstm).
  std::size_t layer_output_size() const;

  // predict_horizon: d lags -> D values, dropout off. Requires trained().
  std::vector<double> predict(std::span<const double> lags) const;
  DenseMatrix predict_batch(const DenseMatrix& inputs) const;

  // Mean Huber loss of a batch (rows = windows). With `grad` set, accumulates
  // the exact BPTT gradient into it (it must share the parameter layout).
  // A non-null `dropout_rng` enables training-mode dropout.
  double loss_and_grad(const DenseMatrix& inputs, const DenseMatrix& labels, ParamStore* grad,
                       Rng* dropout_rng = nullptr) const;

  RnnWeights rnn_weights(std::size_t layer) const;
  LstmWeights lstm_weights(std::size_t layer, bool backward = false) const;
  void set_rnn_weights(std::size_t layer, const RnnWeights& w);
  void set_lstm_weights(std::size_t layer, const LstmWeights& w, bool backward = false);

  CheckpointSection to_section() const;
  static RecurrentModel from_section(const CheckpointSection& section);
  std::string digest() const;

 private:
  struct LayerSlots {
    std::size_t w = 0, v = 0, b = 0;
    std::size_t bw_w = 0, bw_v = 0, bw_b = 0;
  };

  struct ForwardTape;
  DenseMatrix forward_impl(const DenseMatrix& inputs, ForwardTape* tape, Rng* dropout_rng) const;
  std::size_t layer_input_size(std::size_t layer) const;

  RecurrentConfig config_;
  ParamStore params_;
  std::vector<LayerSlots> layers_;
  std::size_t out_w_ = 0;
  std::size_t out_b_ = 0;
  bool trained_ = false;
};

struct RecurrentTrainResult {
  std::vector<double> loss_history;  // mean training loss per epoch
};

// BPTT over the full window, Huber objective, Adam, global-norm clipping.
// Throws ContractError on an empty or mis-shaped dataset and DivergenceError
// on a non-finite loss.
RecurrentTrainResult train_recurrent(RecurrentModel& model, const SupervisedWindowSet& data,
                                     std::uint64_t seed);

std::vector<double> predict_horizon(const RecurrentModel& model, std::span<const double> lags);

}  // namespace csipred
