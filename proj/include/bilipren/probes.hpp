#pragma once

// Empirical checks of certified models: bi-Lipschitz ratios, contraction
// rate, output-map Jacobian bounds, robust-inversion error curves and a
// projected-gradient worst-case search.
//
// The inversion bounds apply to a sandwich with a single REN block
// O_2 o G o O_1; the initial states a and b are states of G.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bilipren/composition.hpp"
#include "bilipren/parametric.hpp"

namespace bilipren {

using SequenceMap = std::function<Mat(const Mat&)>;

struct RatioInterval {
  double ratio_min = 0.0;
  double ratio_max = 0.0;
};

/// min/max of |F(u) - F(v)|_T / |u - v|_T over random pairs. Perturbation
/// sizes are log-uniform over [1e-2, 3].
RatioInterval empirical_bilip_probe(const SequenceMap& F, Eigen::Index m, int trials,
                                    Eigen::Index horizon, std::uint64_t seed);
RatioInterval empirical_bilip_probe(const Model& model, int trials, Eigen::Index horizon,
                                    std::uint64_t seed);

struct ContractionFit {
  /// exp(slope) of a least-squares fit of log|x^a_t - x^b_t| against t.
  double rate = 0.0;
  /// Samples used by the fit.
  int samples = 0;
  /// False when the trajectories coincide from the start.
  bool defined = false;
};

/// Samples whose difference has fallen below 1e-12 of the initial one are
/// dropped, since round-off dominates there.
ContractionFit contraction_probe(const RenModel& model, const Vec& a, const Vec& b,
                                 const Mat& u_seq);

struct OutputGains {
  double gamma_min = 0.0;
  double gamma_max = 0.0;
  /// True when the output does not depend on the state (n = 0 or the
  /// sampled Jacobians all vanish).
  bool x_independent = false;
};

/// Extreme singular values of d h(x, u) / dx over the given (state, input)
/// rows, by central differences with step fd_step.
OutputGains output_layer_bilip(const RenModel& model, const Mat& states, const Mat& inputs,
                               double fd_step = 1e-6);

/// Samples `samples` time indices of the trajectory driven by u_seq from a
/// zero state.
OutputGains output_layer_bilip(const RenModel& model, const Mat& u_seq, int samples,
                               std::uint64_t seed, double fd_step = 1e-6);

struct BoundConstants {
  double kappa1 = 1.0;
  double alpha1 = 0.9;
  double kappa2 = 1.0;
  double alpha2 = 0.9;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double mu = 1.0;
  double nu = 1.0;
  /// Where kappa comes from.
  std::string kappa_metric = "sqrt(cond(P))";

  /// kappa1 gamma2 / (mu sqrt(1 - alpha1^2)).
  double input_state_gain() const;
  /// kappa2 nu / (gamma1 sqrt(1 - alpha2^2)); infinite when gamma1 = 0.
  double output_state_gain() const;
};

/// Constants for a depth-1 bi-Lipschitz sandwich. The inverse shares P and
/// alpha_bar, so kappa2 = kappa1 and alpha2 = alpha1.
BoundConstants bound_constants(const SandwichModel& model, const OutputGains& gains);

struct BoundReport {
  std::vector<int> horizons;
  std::vector<double> measured;
  std::vector<double> theoretical;
  BoundConstants constants;
  double state_gap = 0.0;        ///< |a - b|
  double perturbation_norm = 0.0;  ///< |delta|_T over the whole sequence

  bool holds() const;
};

/// y~ = F_a(u + delta_u), u^ = F_b^{-1}(y~); reports (1/T)|u^ - u|_T and
/// (1/T)(c |a - b| + (nu/mu)|delta_u|_T) for T = 1..len.
BoundReport reconstruction_error_curve(const SandwichModel& model, const Mat& u,
                                       const Mat& delta_u, const Vec& a, const Vec& b,
                                       const BoundConstants& constants);

/// y^ = F_a(F_b^{-1}(y + delta_y)); reports (1/T)|y^ - y|_T against the
/// output-side bound.
BoundReport output_error_curve(const SandwichModel& model, const Mat& y, const Mat& delta_y,
                               const Vec& a, const Vec& b, const BoundConstants& constants);

struct PgdConfig {
  double init_radius = 0.1;
  double pert_radius = 1.0;
  int steps = 200;
  double step_size = 0.05;
  int restarts = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Rescales v onto the ball of the given radius when it lies outside.
Mat project_ball(const Mat& v, double radius);

struct PgdResult {
  Mat u;
  Mat delta_u;
  Vec b;
  /// |u^ - u|_T over the whole horizon at the worst point found.
  double error = 0.0;
  /// c |a - b| + (nu/mu)|delta_u|_T at that point.
  double theoretical = 0.0;
  std::vector<double> restart_errors;
};

/// Normalized gradient ascent on |F_b^{-1}(F_a(u + delta_u)) - u|_T over
/// (u, delta_u, b), projecting |b - a| <= init_radius and
/// |delta_u|_T <= pert_radius after every step. Restarts begin on the
/// boundary of both balls.
PgdResult pgd_worst_case(const SandwichModel& model, const PgdConfig& cfg, const Mat& u_nominal,
                         const Vec& a, const BoundConstants& constants);

/// Inversion error at a single (u, delta_u, b).
double inversion_error(const SandwichModel& model, const Mat& u, const Mat& delta_u,
                       const Vec& a, const Vec& b);

/// Largest inversion error over random boundary points with u = u_nominal.
double random_probe_max(const SandwichModel& model, const PgdConfig& cfg, const Mat& u_nominal,
                        const Vec& a, int probes);

/// Lag k in [-max_lag, max_lag] maximizing sum_t <a_t, b_{t+k}>; positive
/// when b trails a.
int cross_correlation_lag(const Mat& a, const Mat& b, int max_lag);

}  // namespace bilipren
