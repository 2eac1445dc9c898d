#pragma once

// Analytic-vs-central-difference gradient comparison on random tiny models.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "csipred/nprophet.hpp"
#include "csipred/recurrent.hpp"
#include "oracles.hpp"

namespace gradcheck {

using namespace csipred;

struct Report {
  std::size_t instances = 0;
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_excess = 0.0;  // max |a-f| / allowed
  std::string first_failure;
};

inline constexpr double kEps = 1e-6;

inline void compare(Report& r, std::span<const double> analytic, std::span<const double> numeric,
                    const std::string& label) {
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double f = numeric[i];
    const double allowed = std::fmax(1e-7, 1e-4 * std::fmax(std::fabs(a), std::fabs(f)));
    r.worst_excess = std::fmax(r.worst_excess, std::fabs(a - f) / allowed);
    ++r.checked;
    if (!oracle::grad_close(a, f)) {
      if (r.failures == 0) {
        r.first_failure = label + " param " + std::to_string(i) + ": analytic " +
                          std::to_string(a) + " numeric " + std::to_string(f);
      }
      ++r.failures;
    }
  }
}

inline DenseMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  DenseMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Report recurrent(Architecture arch, BiCombine combine, std::size_t instances,
                        std::uint64_t seed, bool with_dropout = false) {
  Report rep;
  Rng rng(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    RecurrentConfig c;
    c.arch = arch;
    c.combine = combine;
    c.lags = 2 + rng() % 5;
    c.horizon = 1 + rng() % 3;
    c.hidden = 2 + rng() % 3;
    c.layers = 1 + rng() % 3;
    if (with_dropout && c.layers == 1) c.layers = 2;
    c.dropout = with_dropout ? 0.3 : 0.0;
    c.training.huber_beta = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    RecurrentModel model(c, rng());
    // Spread the weights so gates leave their linear regime.
    for (auto& v : model.params().values()) v *= 2.0;
    const auto batch = static_cast<Eigen::Index>(1 + rng() % 4);
    const DenseMatrix x = random_matrix(batch, static_cast<Eigen::Index>(c.lags), rng, 1.0);
    const DenseMatrix y = random_matrix(batch, static_cast<Eigen::Index>(c.horizon), rng, 1.0);
    const Rng mask_rng(rng());

    ParamStore grad = model.params().zeros_like();
    Rng r0 = mask_rng;
    model.loss_and_grad(x, y, &grad, with_dropout ? &r0 : nullptr);

    RecurrentModel probe = model;
    const std::vector<double> x0(model.params().values().begin(), model.params().values().end());
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> p) {
          std::copy(p.begin(), p.end(), probe.params().values().begin());
          Rng r = mask_rng;
          return probe.loss_and_grad(x, y, nullptr, with_dropout ? &r : nullptr);
        },
        x0, kEps);
    compare(rep, grad.values(), numeric, to_string(arch) + " instance " + std::to_string(k));
    ++rep.instances;
  }
  return rep;
}

// Random NP model with every component enabled (trend in either mode,
// seasonality, AR-Net, regressor head).
inline Report np_model(std::size_t instances, std::uint64_t seed, bool ar_only = false) {
  Report rep;
  Rng rng(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    NpConfig c;
    c.lags = 2 + rng() % 5;
    c.horizon = 1 + rng() % 3;
    c.trend = !ar_only;
    c.trend_mode = rng() % 2 == 0 ? TrendMode::discontinuous : TrendMode::continuous;
    c.changepoints = 1 + rng() % 4;
    c.seasonality = !ar_only;
    c.seasonalities = {{3.0, 2}, {0.7, 1}};
    c.samples_per_day = 10.0;
    c.autoregression = true;
    c.ar_layers = rng() % 3;
    c.ar_hidden = 2 + rng() % 3;
    c.ar_activation = rng() % 4 == 0 ? ArActivation::linear : ArActivation::relu;
    c.regressor = !ar_only;
    c.huber_beta = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    NpModel model(c, rng());
    model.set_time_frame(5.0, 40.0);
    std::normal_distribution<double> n(0.0, 0.7);
    for (auto& v : model.params().values()) v += n(rng);
    const auto batch = static_cast<Eigen::Index>(1 + rng() % 4);
    std::vector<std::int64_t> times(static_cast<std::size_t>(batch));
    for (auto& t : times) t = static_cast<std::int64_t>(rng() % 45);
    const DenseMatrix x = random_matrix(batch, static_cast<Eigen::Index>(c.lags), rng, 1.0);
    const DenseMatrix y = random_matrix(batch, static_cast<Eigen::Index>(c.horizon), rng, 1.0);
    const DenseMatrix reg = random_matrix(batch, static_cast<Eigen::Index>(c.horizon), rng, 1.0);
    const DenseMatrix* regp = c.regressor ? &reg : nullptr;

    ParamStore grad = model.params().zeros_like();
    model.loss_and_grad(times, x, y, regp, &grad);
    NpModel probe = model;
    const std::vector<double> x0(model.params().values().begin(), model.params().values().end());
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> p) {
          std::copy(p.begin(), p.end(), probe.params().values().begin());
          return probe.loss_and_grad(times, x, y, regp, nullptr);
        },
        x0, kEps);
    compare(rep, grad.values(), numeric, "np instance " + std::to_string(k));
    ++rep.instances;
  }
  return rep;
}

}  // namespace gradcheck
