#pragma once

// Flat-parameter architectures: a sandwich of REN blocks and static
// orthogonal layers, optionally followed by a dynamic orthogonal inner layer.
//
// theta layout: [O_1][G_1][O_2] ... [G_K][O_{K+1}][inner]
//   O_k:   J (m x m), q (m)              (absent when learn_ortho is false)
//   G_k:   ThetaLayout::bilipschitz or ThetaLayout::contracting
//   inner: J ((p+m) x (p+m)), d (p), w (m)

#include <cstdint>
#include <optional>
#include <vector>

#include "bilipren/composition.hpp"

namespace bilipren {

enum class BlockKind { kBiLipschitz, kContracting };

const char* to_string(BlockKind k);
BlockKind block_kind_from_string(const std::string& s);

struct Architecture {
  RenDims dims;
  int depth = 1;
  /// Composite bounds; each block gets the geometric share.
  double mu = 0.1;
  double nu = 5.0;
  double alpha_bar = 0.9;
  double eps = 1e-6;
  double d22_margin = 0.99;
  Activation act = Activation::kRelu;
  BlockKind kind = BlockKind::kBiLipschitz;
  bool learn_ortho = true;
  /// State size of the inner dynamic orthogonal layer; negative means none.
  int inner_states = -1;

  bool has_inner() const { return inner_states >= 0; }
  void validate() const;
  BiLipHyper block_hyper() const;
  ContractingHyper contracting_hyper() const;
  Eigen::Index block_theta_size() const;
  Eigen::Index theta_size() const;
};

/// A sandwich, optionally followed by a dynamic orthogonal layer. All
/// internal states start at zero.
struct Model {
  SandwichModel sandwich;
  std::optional<DynOrtho> inner;

  Eigen::Index width() const { return sandwich.width(); }
  Mat simulate(const Mat& u_seq) const;
  /// Throws ArgumentError when there is no inner layer.
  FactorModel factor() const;
};

Model build_model(const Architecture& arch, const Vec& theta);

/// theta ~ scale * N(0, 1), with orthogonal-layer blocks scaled by ortho_scale.
Vec init_theta(const Architecture& arch, std::uint64_t seed, double scale = 0.1,
               double ortho_scale = 0.1);

namespace ad {

struct RenBlockVar {
  RenWeightsVar weights;
};

struct ModelVar {
  std::vector<StaticOrthoVar> ortho;
  std::vector<RenBlockVar> blocks;
  std::optional<DynOrthoVar> inner;
  Activation act = Activation::kRelu;
};

ModelVar build_model(Tape& tape, const Architecture& arch, const Var& theta);

/// Rolls the model forward from zero states over a batch. u_steps[t] is
/// m x B; returns the m x B output at every step.
std::vector<Var> simulate(Tape& tape, const ModelVar& model, const std::vector<Var>& u_steps);

}  // namespace ad

}  // namespace bilipren
