#pragma once

// Ground-truth plants, excitation signals and measurement noise.
//
// Both plants are integrated with fixed-step RK4. Inputs are held constant
// over each sample interval and y_k is the state at the end of interval k.

#include <cstdint>
#include <optional>
#include <vector>

#include "bilipren/numeric.hpp"

namespace bilipren {

/// Piecewise-linear spring characteristic: 0.25 d inside (-1, 1), unit
/// slope outside, continuous at +-1.
double gamma(double d);

struct MsdConfig {
  int n_carts = 4;
  Vec masses = Vec::Constant(4, 1.0);
  Vec spring_consts = Vec::Constant(4, 1.0);
  Vec damping_consts = Vec::Constant(4, 0.5);
  /// Sample period.
  double dt = 0.02;
  double duration = 20.0;
  /// RK4 steps per sample period.
  int substeps = 1;

  void validate() const;
  Eigen::Index samples() const;
};

struct MsdResult {
  Mat y;  ///< T x 1, position of the last cart
  Mat x;  ///< (T+1) x 2 n_carts, [positions, velocities]
};

/// Cart 1 is tied to the wall, cart i to cart i-1. u_seq (T x 1) is the
/// force on cart 1.
MsdResult msd_simulate(const MsdConfig& cfg, const Mat& u_seq);

struct DelayPlantConfig {
  double gain = 0.9;
  double delay = 1.0;
  /// Integration step; the delay and the sample period are multiples of it.
  double dt = 0.01;
  double sample_period = 0.1;
  double duration = 10.0;
  double x0 = 0.0;

  void validate() const;
  Eigen::Index samples() const;
  Eigen::Index substeps() const;
  Eigen::Index delay_steps() const;
};

/// x' = gain tanh(x) + u(t - delay), y = x. u_seq is T x 1, held over each
/// sample period; the input before t = 0 is zero.
Mat delay_simulate(const DelayPlantConfig& cfg, const Mat& u_seq);

struct SignalConfig {
  double tau = 20.0;
  double sigma = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PiecewiseSignal {
  Mat u;                       ///< T x 1
  std::vector<double> holds;   ///< drawn hold lengths, seconds
  std::vector<double> levels;  ///< drawn levels
};

/// Levels ~ N(0, sigma^2), held for U(0, tau) seconds each.
PiecewiseSignal piecewise_signal(const SignalConfig& cfg, double duration, double dt);
Mat piecewise_input(const SignalConfig& cfg, double duration, double dt);

/// i.i.d. N(0, sigma^2) samples, T x m.
Mat gaussian_input(Eigen::Index T, Eigen::Index m, double sigma, std::uint64_t seed);

/// Adds white Gaussian noise at the given SNR relative to the measured
/// signal power. An empty snr_db returns y unchanged.
Mat add_noise_snr(const Mat& y, std::optional<double> snr_db, std::uint64_t seed);

}  // namespace bilipren
