#pragma once

// Recurrent equilibrium network (REN) state-space model:
//
//   [x_{t+1}; v_t; y_t] = W [x_t; w_t; u_t] + b,   w_t = sigma(v_t)
//
// with W = [[A, B1, B2], [C1, D11, D12], [C2, D21, D22]] and
// b = [bx; bv; by]. Input and output share the width m.

#include "bilipren/activation.hpp"
#include "bilipren/numeric.hpp"

namespace bilipren {

struct RenDims {
  int n = 0;  ///< state size
  int q = 0;  ///< neuron count
  int m = 1;  ///< input/output width

  void validate() const;
  bool operator==(const RenDims&) const = default;
};

struct RenWeights {
  RenDims dims;
  /// D11 is required to be strictly lower triangular.
  bool acyclic = true;

  Mat A, B1, B2;
  Mat C1, D11, D12;
  Mat C2, D21, D22;
  Vec bx, bv, by;

  static RenWeights zeros(const RenDims& dims, bool acyclic = true);

  /// Shapes, finiteness and (if acyclic) strict lower triangularity of D11.
  void validate() const;
};

enum class EquilibriumMode { kAcyclicExact, kFixedPoint };

struct EquilibriumConfig {
  EquilibriumMode mode = EquilibriumMode::kAcyclicExact;
  int max_iters = 500;
  double tol = 1e-10;
  /// Relaxation weight g of the step w <- (1-g) w + g sigma(D11 w + bw).
  double damping = 0.5;
  /// When the damped iteration misses tol after max_iters, continue from
  /// its last iterate with up to max_iters Newton steps (backtracking line
  /// search, damped step when the search stalls).
  bool newton_fallback = true;

  void validate() const;
};

/// Fixed-point configuration used when simulating inverse models, whose
/// D11 block is generally full.
EquilibriumConfig fixed_point_config();

/// Max-norm residual |w - sigma(D11 w + bw)|_inf.
double equilibrium_residual(const Vec& w, const Mat& D11, const Vec& bw, Activation act);

/// Solves w = sigma(D11 w + bw).
///
/// Acyclic mode does one forward-substitution pass and is exact. Fixed-point
/// mode iterates the damped update (then Newton, see EquilibriumConfig) until
/// the max-norm residual is at most cfg.tol. Throws IterationFailure when
/// that does not happen within cfg.max_iters iterations.
Vec equilibrium_solve(const Vec& w0, const Mat& D11, const Vec& bw, Activation act,
                      const EquilibriumConfig& cfg);

struct RenStepResult {
  Vec x_next;
  Vec y;
  Vec w;
};

RenStepResult ren_step(const RenWeights& wts, const Vec& x, const Vec& u, Activation act,
                       const EquilibriumConfig& cfg);

/// ren_step with a warm start for the fixed-point solver (ignored in
/// acyclic mode). An empty w0 starts from zero.
RenStepResult ren_step_warm(const RenWeights& wts, const Vec& x, const Vec& u, const Vec& w0,
                            Activation act, const EquilibriumConfig& cfg);

struct RenTrajectory {
  Mat y;  ///< T x m, row t is y_t
  Mat x;  ///< (T+1) x n, row 0 is x0
};

/// Iterates ren_step over the rows of u_seq (T x m).
RenTrajectory ren_simulate(const RenWeights& wts, const Vec& x0, const Mat& u_seq,
                           Activation act, const EquilibriumConfig& cfg);

/// Weights bundled with the activation and solver settings needed to run them.
struct RenModel {
  RenWeights weights;
  Activation act = Activation::kRelu;
  EquilibriumConfig eq;

  RenTrajectory simulate(const Vec& x0, const Mat& u_seq) const {
    return ren_simulate(weights, x0, u_seq, act, eq);
  }
};

}  // namespace bilipren
