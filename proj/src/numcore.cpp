#include "csipred/numcore.hpp"

#include <cmath>

#include "csipred/errors.hpp"

namespace csipred {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double tanh_act(double x) { return std::tanh(x); }

double relu(double x) { return x >= 0.0 ? x : 0.0; }

namespace {

double huber_element(double r, double beta) {
  const double a = std::abs(r);
  return a <= beta ? r * r / (2.0 * beta) : a - 0.5 * beta;
}

double huber_slope(double r, double beta) {
  if (std::abs(r) <= beta) {
    return r / beta;
  }
  return r > 0.0 ? 1.0 : -1.0;
}

void check_beta(double beta) {
  if (!(beta > 0.0)) {
    throw ContractError("huber threshold must be positive");
  }
}

}  // namespace

double huber_loss(std::span<const double> truth, std::span<const double> prediction,
                  double beta) {
  check_beta(beta);
  if (truth.size() != prediction.size()) {
    throw ContractError("huber_loss: length mismatch (" + std::to_string(truth.size()) +
                        " vs " + std::to_string(prediction.size()) + ")");
  }
  if (truth.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sum += huber_element(prediction[i] - truth[i], beta);
  }
  return sum / static_cast<double>(truth.size());
}

std::vector<double> huber_loss_grad(std::span<const double> truth,
                                    std::span<const double> prediction, double beta) {
  check_beta(beta);
  if (truth.size() != prediction.size()) {
    throw ContractError("huber_loss_grad: length mismatch");
  }
  std::vector<double> g(truth.size());
  const double inv_n = truth.empty() ? 0.0 : 1.0 / static_cast<double>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    g[i] = huber_slope(prediction[i] - truth[i], beta) * inv_n;
  }
  return g;
}

double huber_loss(const DenseMatrix& truth, const DenseMatrix& prediction, double beta,
                  DenseMatrix* grad) {
  if (truth.rows() != prediction.rows() || truth.cols() != prediction.cols()) {
    throw ContractError("huber_loss: shape mismatch");
  }
  std::span<const double> t(truth.data(), static_cast<std::size_t>(truth.size()));
  std::span<const double> p(prediction.data(), static_cast<std::size_t>(prediction.size()));
  if (grad != nullptr) {
    grad->resize(prediction.rows(), prediction.cols());
    const auto g = huber_loss_grad(t, p, beta);
    std::copy(g.begin(), g.end(), grad->data());
  }
  return huber_loss(t, p, beta);
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 double learning_rate) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ContractError("adam_update: shape mismatch");
  }
  if (!(learning_rate > 0.0)) {
    throw ContractError("adam_update: learning rate must be positive");
  }
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

void adam_update(DenseMatrix& params, const DenseMatrix& grads, AdamState& state,
                 double learning_rate) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols()) {
    throw ContractError("adam_update: shape mismatch");
  }
  adam_update(std::span<double>(params.data(), static_cast<std::size_t>(params.size())),
              std::span<const double>(grads.data(), static_cast<std::size_t>(grads.size())),
              state, learning_rate);
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) {
    sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grads) {
      g *= scale;
    }
  }
  return norm;
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ContractError("finite_diff_grad: step must lie in [1e-7, 1e-3]");
  }
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = f(probe);
    probe[i] = saved - eps;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw DataError("finite_diff_grad: non-finite function value at coordinate " +
                      std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

std::size_t ParamStore::add(std::string name, std::size_t rows, std::size_t cols) {
  Slot slot{std::move(name), rows, cols, data_.size()};
  data_.resize(data_.size() + slot.size(), 0.0);
  slots_.push_back(std::move(slot));
  return slots_.size() - 1;
}

MatrixMap ParamStore::tensor(std::size_t index) {
  const Slot& s = slots_.at(index);
  return MatrixMap(data_.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                   static_cast<Eigen::Index>(s.cols));
}

ConstMatrixMap ParamStore::tensor(std::size_t index) const {
  const Slot& s = slots_.at(index);
  return ConstMatrixMap(data_.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                        static_cast<Eigen::Index>(s.cols));
}

std::span<double> ParamStore::slice(std::size_t index) {
  const Slot& s = slots_.at(index);
  return {data_.data() + s.offset, s.size()};
}

std::span<const double> ParamStore::slice(std::size_t index) const {
  const Slot& s = slots_.at(index);
  return {data_.data() + s.offset, s.size()};
}

std::size_t ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) {
      return i;
    }
  }
  throw ContractError("no parameter tensor named '" + name + "'");
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out = *this;
  out.set_zero();
  return out;
}

void ParamStore::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool ParamStore::same_layout(const ParamStore& other) const {
  if (slots_.size() != other.slots_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& a = slots_[i];
    const auto& b = other.slots_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) {
      return false;
    }
  }
  return true;
}

void init_uniform_fan_in(std::span<double> values, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : values) {
    v = dist(rng);
  }
}

}  // namespace csipred
