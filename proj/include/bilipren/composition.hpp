#pragma once

// Sandwich models F = O_{K+1} o G_K o ... o G_1 o O_1 built from static
// orthogonal layers O_k and REN blocks G_k, and inner-outer factor models
// y = inner(outer(u)) with a dynamic orthogonal inner layer.

#include <utility>
#include <vector>

#include "bilipren/bilip.hpp"
#include "bilipren/orthogonal.hpp"
#include "bilipren/ren.hpp"

namespace bilipren {

struct RenBlock {
  RenModel model;
  Certificate cert;
  /// False for contraction-only blocks, which carry no (mu, nu) bounds.
  bool bilipschitz = true;
};

struct SandwichModel {
  std::vector<StaticOrtho> ortho;  ///< K + 1 layers
  std::vector<RenBlock> blocks;    ///< K blocks

  std::size_t depth() const { return blocks.size(); }
  Eigen::Index width() const;
  /// Alternation pattern and equal interface widths.
  void validate() const;
  /// One zero initial state per REN block.
  std::vector<Vec> zero_states() const;
};

struct FactorModel {
  DynOrtho inner;
  SandwichModel outer;

  void validate() const;
};

struct FactorStates {
  std::vector<Vec> outer;
  Vec inner;
};

FactorStates zero_states(const FactorModel& model);

struct SandwichTrace {
  Mat y;                             ///< T x m
  std::vector<RenTrajectory> blocks;  ///< per REN block
};

SandwichTrace sandwich_trace(const SandwichModel& model, const std::vector<Vec>& x0,
                             const Mat& u_seq);

Mat sandwich_forward(const SandwichModel& model, const std::vector<Vec>& x0, const Mat& u_seq);

/// Layer inverses in reverse order; REN blocks are inverted with invert_ren
/// and simulated from the given initial states.
Mat sandwich_inverse(const SandwichModel& model, const std::vector<Vec>& x0, const Mat& y_seq);

/// Simulates a single REN inverse from x0.
RenTrajectory ren_inverse_simulate(const RenModel& model, const Vec& x0, const Mat& y_seq);

struct Bounds {
  double mu = 1.0;
  double nu = 1.0;
};

/// Products of per-block bounds. Throws ArgumentError for contraction-only
/// blocks.
Bounds composed_bounds(const SandwichModel& model);

/// mu_k = mu^(1/K), nu_k = nu^(1/K).
Bounds geometric_allocation(double mu, double nu, int K);

struct FactorResponse {
  Mat outer;  ///< outer(u)
  Mat y;      ///< inner(outer(u))
  Mat h;      ///< inner state trajectory, (T+1) x p
};

FactorResponse factor_trace(const FactorModel& model, const FactorStates& states,
                            const Mat& u_seq);

Mat factor_forward(const FactorModel& model, const FactorStates& states, const Mat& u_seq);

}  // namespace bilipren
