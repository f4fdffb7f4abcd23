#include "bilipren/composition.hpp"

#include <cmath>

#include "bilipren/errors.hpp"

namespace bilipren {

Eigen::Index SandwichModel::width() const {
  if (ortho.empty()) throw ArgumentError("SandwichModel: no layers");
  return ortho.front().width();
}

void SandwichModel::validate() const {
  if (ortho.size() != blocks.size() + 1) {
    throw ArgumentError("SandwichModel: need exactly one more orthogonal layer than REN blocks");
  }
  const Eigen::Index m = width();
  for (const StaticOrtho& o : ortho) {
    o.validate();
    if (o.width() != m) throw ArgumentError("SandwichModel: orthogonal layer width mismatch");
  }
  for (const RenBlock& b : blocks) {
    b.model.weights.validate();
    if (b.model.weights.dims.m != m) throw ArgumentError("SandwichModel: REN width mismatch");
  }
}

std::vector<Vec> SandwichModel::zero_states() const {
  std::vector<Vec> x0;
  x0.reserve(blocks.size());
  for (const RenBlock& b : blocks) x0.push_back(Vec::Zero(b.model.weights.dims.n));
  return x0;
}

void FactorModel::validate() const {
  outer.validate();
  inner.validate();
  if (inner.width() != outer.width()) throw ArgumentError("FactorModel: width mismatch");
}

FactorStates zero_states(const FactorModel& model) {
  return {model.outer.zero_states(), Vec::Zero(model.inner.state_size())};
}

namespace {

void check_states(const SandwichModel& model, const std::vector<Vec>& x0) {
  if (x0.size() != model.blocks.size()) {
    throw ArgumentError("sandwich: expected one initial state per REN block");
  }
}

}  // namespace

SandwichTrace sandwich_trace(const SandwichModel& model, const std::vector<Vec>& x0,
                             const Mat& u_seq) {
  model.validate();
  check_states(model, x0);
  SandwichTrace tr;
  Mat s = static_forward_seq(model.ortho[0], u_seq);
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    RenTrajectory rt = model.blocks[k].model.simulate(x0[k], s);
    s = static_forward_seq(model.ortho[k + 1], rt.y);
    tr.blocks.push_back(std::move(rt));
  }
  tr.y = std::move(s);
  return tr;
}

Mat sandwich_forward(const SandwichModel& model, const std::vector<Vec>& x0, const Mat& u_seq) {
  return sandwich_trace(model, x0, u_seq).y;
}

RenTrajectory ren_inverse_simulate(const RenModel& model, const Vec& x0, const Mat& y_seq) {
  const RenWeights inv = invert_ren(model.weights);
  const EquilibriumConfig cfg = inv.acyclic ? model.eq : fixed_point_config();
  return ren_simulate(inv, x0, y_seq, model.act, cfg);
}

Mat sandwich_inverse(const SandwichModel& model, const std::vector<Vec>& x0, const Mat& y_seq) {
  model.validate();
  check_states(model, x0);
  const std::size_t K = model.blocks.size();
  Mat s = static_inverse_seq(model.ortho[K], y_seq);
  for (std::size_t k = K; k-- > 0;) {
    s = ren_inverse_simulate(model.blocks[k].model, x0[k], s).y;
    s = static_inverse_seq(model.ortho[k], s);
  }
  return s;
}

Bounds composed_bounds(const SandwichModel& model) {
  Bounds b;
  for (const RenBlock& blk : model.blocks) {
    if (!blk.bilipschitz) throw ArgumentError("composed_bounds: block has no bi-Lipschitz bounds");
    b.mu *= blk.cert.mu;
    b.nu *= blk.cert.nu;
  }
  return b;
}

Bounds geometric_allocation(double mu, double nu, int K) {
  if (K < 1) throw ArgumentError("geometric_allocation: K must be positive");
  if (!(mu > 0.0 && mu <= nu)) throw ArgumentError("geometric_allocation: need 0 < mu <= nu");
  return {std::pow(mu, 1.0 / K), std::pow(nu, 1.0 / K)};
}

FactorResponse factor_trace(const FactorModel& model, const FactorStates& states,
                            const Mat& u_seq) {
  model.validate();
  FactorResponse r;
  r.outer = sandwich_forward(model.outer, states.outer, u_seq);
  DynTrajectory inner = dyn_forward(model.inner, states.inner, r.outer);
  r.y = std::move(inner.y);
  r.h = std::move(inner.h);
  return r;
}

Mat factor_forward(const FactorModel& model, const FactorStates& states, const Mat& u_seq) {
  return factor_trace(model, states, u_seq).y;
}

}  // namespace bilipren
