#pragma once

// Synthetic verification data: a sum-of-sinusoids Rayleigh fading generator
// and deterministic / autoregressive test signals.

#include <cstdint>
#include <span>
#include <vector>

#include "csipred/datapipe.hpp"

namespace csipred {

inline constexpr double kSpeedOfLight = 2.998e8;  // m/s

struct FadingConfig {
  double carrier_hz = 2.18e9;
  double speed_mps = 1.39;  // 5 km/h
  double sample_interval = 5e-4;
  std::size_t paths = 32;
  std::size_t antennas = 1;
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
  // Test hooks: when non-empty they replace the random draws (size == paths).
  std::vector<double> fixed_angles;
  std::vector<double> fixed_phases;

  double max_doppler_hz() const { return speed_mps * carrier_hz / kSpeedOfLight; }
  void validate() const;
};

// h_t = N^{-1/2} sum_n exp(j (2 pi f_d cos(alpha_n) t dt + phi_n)), independent
// angle/phase draws per antenna.
CsiSeries generate_fading(const FadingConfig& config);

struct ArProcess {
  std::vector<double> theta;
  double intercept = 0.0;
  double noise_sigma = 0.0;
  std::vector<double> initial;  // z_0 .. z_{p-1}; missing entries are 0
  std::size_t burn_in = 0;      // leading samples dropped from the output
};

// Largest eigenvalue modulus of the AR companion matrix.
double ar_spectral_radius(std::span<const double> theta);

// z_t = q + sum_e theta_e z_{t-e} + eps_t, eps_t ~ N(0, sigma^2).
// Throws ContractError when the process is not stable.
std::vector<double> generate_ar(const ArProcess& process, std::size_t n, std::uint64_t seed);

enum class SignalKind { line, sinusoid, piecewise_line };

struct DeterministicSignal {
  SignalKind kind = SignalKind::line;
  double slope = 1.0;
  double offset = 0.0;
  double amplitude = 1.0;
  double period = 50.0;  // samples
  double phase = 0.0;
  std::size_t break_index = 0;  // piecewise_line: slope changes here, value stays continuous
  double slope_after = 0.0;
};

std::vector<double> generate_deterministic(const DeterministicSignal& signal, std::size_t n);

// Wraps a real series as a single-feature stream starting at index 0.
FeatureSeries as_feature(const std::vector<double>& values, int feature = 0);

}  // namespace csipred
