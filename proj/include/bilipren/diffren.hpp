#pragma once

// Differentiable counterparts of the REN recursion and the Cayley map,
// operating on batches stored column-wise (one column per trajectory).

#include "bilipren/autodiff.hpp"
#include "bilipren/ren.hpp"

namespace bilipren::ad {

struct RenWeightsVar {
  RenDims dims;
  bool acyclic = true;
  Var A, B1, B2;
  Var C1, D11, D12;
  Var C2, D21, D22;
  Var bx, bv, by;
};

RenWeightsVar constant_weights(Tape& tape, const RenWeights& w);

/// Current values of every block.
RenWeights values(const RenWeightsVar& w);

/// Column-wise solve of W = sigma(D11 W + Bw). The backward pass uses the
/// implicit function theorem: with J = diag(sigma'(v)), the adjoint
/// solves (I - J D11)^T lambda = g. warm, if given, seeds the fixed-point
/// solver column by column.
Var equilibrium(const Var& D11, const Var& Bw, Activation act, const EquilibriumConfig& cfg,
                const Mat* warm = nullptr);

struct RenStepVar {
  Var x_next;
  Var y;
  Var w;
};

/// One step for a batch: X is n x B, U is m x B.
RenStepVar ren_step(const RenWeightsVar& w, const Var& X, const Var& U, Activation act,
                    const EquilibriumConfig& cfg, const Mat* warm = nullptr);

/// (I + Z)(I - Z)^{-1}, Z = J^T - J.
Var cayley(const Var& J);

}  // namespace bilipren::ad
