#pragma once

// Numeric substrate shared by every model: dense matrices, activations,
// the Huber objective, Adam, and a central-difference gradient oracle.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace csipred {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<DenseMatrix>;
using ConstMatrixMap = Eigen::Map<const DenseMatrix>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

double sigmoid(double x);
double tanh_act(double x);
double relu(double x);

struct LossConfig {
  double huber_beta = 1.0;
};

// Mean Huber loss over all elements.
double huber_loss(std::span<const double> truth, std::span<const double> prediction, double beta);

// Derivative of huber_loss with respect to each prediction element (includes the 1/n of the mean).
std::vector<double> huber_loss_grad(std::span<const double> truth,
                                    std::span<const double> prediction, double beta);

// Matrix form used by the training loops. When `grad` is non-null it receives
// d(mean loss)/d(prediction) with the same shape as `prediction`.
double huber_loss(const DenseMatrix& truth, const DenseMatrix& prediction, double beta,
                  DenseMatrix* grad = nullptr);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(std::size_t n, AdamConfig config = {})
      : first_moment(n, 0.0), second_moment(n, 0.0), config(config) {}

  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  AdamConfig config;
};

// One bias-corrected Adam step, in place. Throws ContractError on shape mismatch
// or a non-positive learning rate.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 double learning_rate);
void adam_update(DenseMatrix& params, const DenseMatrix& grads, AdamState& state,
                 double learning_rate);

// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_global_norm(std::span<double> grads, double max_norm);

bool all_finite(std::span<const double> values);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double eps);

// Named tensors stored back to back in one flat buffer, so optimizers,
// gradient checks and checkpoints can treat a whole model as one vector.
class ParamStore {
 public:
  struct Slot {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return rows * cols; }
    bool operator==(const Slot&) const = default;
  };

  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  MatrixMap tensor(std::size_t index);
  ConstMatrixMap tensor(std::size_t index) const;
  std::span<double> slice(std::size_t index);
  std::span<const double> slice(std::size_t index) const;

  std::size_t find(const std::string& name) const;  // throws ContractError if absent
  const std::vector<Slot>& slots() const { return slots_; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::size_t size() const { return data_.size(); }

  ParamStore zeros_like() const;
  void set_zero();
  bool same_layout(const ParamStore& other) const;

  bool operator==(const ParamStore& other) const = default;

 private:
  std::vector<Slot> slots_;
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
void init_uniform_fan_in(std::span<double> values, std::size_t fan_in, Rng& rng);

}  // namespace csipred
