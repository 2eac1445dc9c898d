#include "csipred/synthchan.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "csipred/errors.hpp"

namespace csipred {

void FadingConfig::validate() const {
  if (!(carrier_hz > 0.0) || !(speed_mps > 0.0) || !(sample_interval > 0.0) || paths == 0 ||
      antennas == 0 || samples == 0) {
    throw ContractError("fading config values must all be positive");
  }
  if ((!fixed_angles.empty() && fixed_angles.size() != paths) ||
      (!fixed_phases.empty() && fixed_phases.size() != paths)) {
    throw ContractError("fixed angles/phases must have one entry per path");
  }
}

CsiSeries generate_fading(const FadingConfig& config) {
  config.validate();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Rng rng(config.seed);
  std::uniform_real_distribution<double> uniform(0.0, two_pi);
  const double fd = config.max_doppler_hz();
  const double norm = 1.0 / std::sqrt(static_cast<double>(config.paths));

  CsiSeries s;
  s.sample_interval = config.sample_interval;
  s.track = "synthetic";
  s.first_index = 0;
  for (std::size_t a = 0; a < config.antennas; ++a) {
    std::vector<double> omega(config.paths);
    std::vector<double> phase(config.paths);
    for (std::size_t n = 0; n < config.paths; ++n) {
      const double alpha = config.fixed_angles.empty() ? uniform(rng) : config.fixed_angles[n];
      phase[n] = config.fixed_phases.empty() ? uniform(rng) : config.fixed_phases[n];
      omega[n] = two_pi * fd * std::cos(alpha) * config.sample_interval;
    }
    std::vector<Complex> h(config.samples);
    for (std::size_t t = 0; t < config.samples; ++t) {
      Complex acc = 0.0;
      for (std::size_t n = 0; n < config.paths; ++n) {
        acc += std::polar(1.0, omega[n] * static_cast<double>(t) + phase[n]);
      }
      h[t] = acc * norm;
    }
    s.antenna_ids.push_back(static_cast<int>(a));
    s.antennas.push_back(std::move(h));
  }
  return s;
}

double ar_spectral_radius(std::span<const double> theta) {
  const auto p = static_cast<Eigen::Index>(theta.size());
  if (p == 0) {
    return 0.0;
  }
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index e = 0; e < p; ++e) {
    companion(0, e) = theta[static_cast<std::size_t>(e)];
  }
  for (Eigen::Index i = 1; i < p; ++i) {
    companion(i, i - 1) = 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> generate_ar(const ArProcess& process, std::size_t n, std::uint64_t seed) {
  if (ar_spectral_radius(process.theta) >= 1.0) {
    throw ContractError("generate_ar: process is not stable (companion spectral radius >= 1)");
  }
  if (process.noise_sigma < 0.0) {
    throw ContractError("generate_ar: noise sigma must be non-negative");
  }
  const std::size_t p = process.theta.size();
  const std::size_t total = n + process.burn_in;
  std::vector<double> z(total, 0.0);
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, process.noise_sigma > 0.0 ? process.noise_sigma : 1.0);
  for (std::size_t t = 0; t < total; ++t) {
    if (t < p) {
      z[t] = t < process.initial.size() ? process.initial[t] : 0.0;
      continue;
    }
    double v = process.intercept;
    for (std::size_t e = 1; e <= p; ++e) {
      v += process.theta[e - 1] * z[t - e];
    }
    if (process.noise_sigma > 0.0) {
      v += noise(rng);
    }
    z[t] = v;
  }
  return {z.begin() + static_cast<std::ptrdiff_t>(process.burn_in), z.end()};
}

std::vector<double> generate_deterministic(const DeterministicSignal& signal, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    switch (signal.kind) {
      case SignalKind::line:
        out[i] = signal.slope * t + signal.offset;
        break;
      case SignalKind::sinusoid:
        if (!(signal.period > 0.0)) {
          throw ContractError("sinusoid period must be positive");
        }
        out[i] = signal.amplitude *
                     std::sin(2.0 * std::numbers::pi * t / signal.period + signal.phase) +
                 signal.offset;
        break;
      case SignalKind::piecewise_line: {
        const double tb = static_cast<double>(signal.break_index);
        out[i] = i < signal.break_index
                     ? signal.slope * t + signal.offset
                     : signal.slope * tb + signal.offset + signal.slope_after * (t - tb);
        break;
      }
    }
  }
  return out;
}

FeatureSeries as_feature(const std::vector<double>& values, int feature) {
  FeatureSeries f;
  f.feature = feature;
  f.values = values;
  return f;
}

}  // namespace csipred
