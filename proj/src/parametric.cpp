#include "bilipren/parametric.hpp"

#include <random>

#include "bilipren/errors.hpp"

namespace bilipren {

const char* to_string(BlockKind k) {
  return k == BlockKind::kBiLipschitz ? "bilipschitz" : "contracting";
}

BlockKind block_kind_from_string(const std::string& s) {
  if (s == "bilipschitz") return BlockKind::kBiLipschitz;
  if (s == "contracting") return BlockKind::kContracting;
  throw ArgumentError("unknown block kind '" + s + "'");
}

void Architecture::validate() const {
  dims.validate();
  if (depth < 1) throw ArgumentError("Architecture: depth must be at least 1");
  if (kind == BlockKind::kBiLipschitz) {
    block_hyper().validate();
  } else {
    contracting_hyper().validate();
  }
}

BiLipHyper Architecture::block_hyper() const {
  const Bounds b = geometric_allocation(mu, nu, depth);
  BiLipHyper h;
  h.mu = b.mu;
  h.nu = b.nu;
  h.alpha_bar = alpha_bar;
  h.dims = dims;
  h.eps = eps;
  h.d22_margin = d22_margin;
  return h;
}

ContractingHyper Architecture::contracting_hyper() const {
  ContractingHyper h;
  h.alpha_bar = alpha_bar;
  h.dims = dims;
  h.eps = eps;
  return h;
}

Eigen::Index Architecture::block_theta_size() const {
  return kind == BlockKind::kBiLipschitz ? ThetaLayout::bilipschitz(dims).size()
                                         : ThetaLayout::contracting(dims).size();
}

namespace {

Eigen::Index ortho_size(const Architecture& a) {
  return a.learn_ortho ? a.dims.m * a.dims.m + a.dims.m : 0;
}

Eigen::Index inner_size(const Architecture& a) {
  if (!a.has_inner()) return 0;
  const Eigen::Index k = a.inner_states + a.dims.m;
  return k * k + a.inner_states + a.dims.m;
}

Mat row_major(const Vec& theta, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  Mat M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = theta(offset + i * cols + j);
  return M;
}

}  // namespace

Eigen::Index Architecture::theta_size() const {
  return depth * block_theta_size() + (depth + 1) * ortho_size(*this) + inner_size(*this);
}

Mat Model::simulate(const Mat& u_seq) const {
  const Mat s = sandwich_forward(sandwich, sandwich.zero_states(), u_seq);
  if (!inner) return s;
  return dyn_forward(*inner, Vec::Zero(inner->state_size()), s).y;
}

FactorModel Model::factor() const {
  if (!inner) throw ArgumentError("Model: no inner layer");
  return {*inner, sandwich};
}

Model build_model(const Architecture& arch, const Vec& theta) {
  arch.validate();
  if (theta.size() != arch.theta_size()) {
    throw ArgumentError("build_model: theta has " + std::to_string(theta.size()) +
                        " entries, architecture expects " + std::to_string(arch.theta_size()));
  }
  const Eigen::Index m = arch.dims.m;
  Eigen::Index off = 0;
  auto next_ortho = [&]() {
    if (!arch.learn_ortho) return identity_static(m);
    const Mat J = row_major(theta, off, m, m);
    const Vec q = theta.segment(off + m * m, m);
    off += m * m + m;
    return make_static(J, q);
  };

  Model model;
  model.sandwich.ortho.push_back(next_ortho());
  const Eigen::Index bs = arch.block_theta_size();
  for (int k = 0; k < arch.depth; ++k) {
    const Vec seg = theta.segment(off, bs);
    off += bs;
    RenBlock blk;
    blk.model.act = arch.act;
    if (arch.kind == BlockKind::kBiLipschitz) {
      ParameterizedRen pr = direct_parameterize(seg, arch.block_hyper());
      blk.model.weights = std::move(pr.weights);
      blk.cert = std::move(pr.certificate);
    } else {
      ParameterizedRen pr = contracting_parameterize(seg, arch.contracting_hyper());
      blk.model.weights = std::move(pr.weights);
      blk.cert = std::move(pr.certificate);
      blk.bilipschitz = false;
    }
    model.sandwich.blocks.push_back(std::move(blk));
    model.sandwich.ortho.push_back(next_ortho());
  }
  if (arch.has_inner()) {
    const Eigen::Index p = arch.inner_states;
    const Eigen::Index k = p + m;
    const Mat J = row_major(theta, off, k, k);
    const Vec d = theta.segment(off + k * k, p);
    const Vec w = theta.segment(off + k * k + p, m);
    off += k * k + p + m;
    model.inner = make_dynamic(J, p, d, w);
  }
  return model;
}

Vec init_theta(const Architecture& arch, std::uint64_t seed, double scale, double ortho_scale) {
  arch.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec theta(arch.theta_size());
  const Eigen::Index os = ortho_size(arch);
  const Eigen::Index bs = arch.block_theta_size();
  Eigen::Index off = 0;
  auto fill = [&](Eigen::Index count, double s) {
    for (Eigen::Index i = 0; i < count; ++i) theta(off + i) = s * normal(rng);
    off += count;
  };
  fill(os, ortho_scale);
  for (int k = 0; k < arch.depth; ++k) {
    fill(bs, scale);
    fill(os, ortho_scale);
  }
  fill(theta.size() - off, ortho_scale);
  return theta;
}

namespace ad {

ModelVar build_model(Tape& tape, const Architecture& arch, const Var& theta) {
  arch.validate();
  if (theta.rows() != arch.theta_size() || theta.cols() != 1) {
    throw ArgumentError("ad::build_model: theta size mismatch");
  }
  const Eigen::Index m = arch.dims.m;
  Eigen::Index off = 0;
  auto next_ortho = [&]() {
    if (!arch.learn_ortho) {
      return StaticOrthoVar{tape.constant(Mat::Identity(m, m)), tape.constant(Mat::Zero(m, 1))};
    }
    const Var J = reshape_segment(theta, off, m, m);
    const Var q = reshape_segment(theta, off + m * m, m, 1);
    off += m * m + m;
    return make_static(J, q);
  };

  ModelVar model;
  model.act = arch.act;
  model.ortho.push_back(next_ortho());
  const Eigen::Index bs = arch.block_theta_size();
  for (int k = 0; k < arch.depth; ++k) {
    const Var seg = reshape_segment(theta, off, bs, 1);
    off += bs;
    ParameterizedRenVar pr = arch.kind == BlockKind::kBiLipschitz
                                 ? direct_parameterize(tape, seg, arch.block_hyper())
                                 : contracting_parameterize(tape, seg, arch.contracting_hyper());
    model.blocks.push_back({std::move(pr.weights)});
    model.ortho.push_back(next_ortho());
  }
  if (arch.has_inner()) {
    const Eigen::Index p = arch.inner_states;
    const Eigen::Index k = p + m;
    const Var J = reshape_segment(theta, off, k, k);
    const Var d = reshape_segment(theta, off + k * k, p, 1);
    const Var w = reshape_segment(theta, off + k * k + p, m, 1);
    model.inner = make_dynamic(J, p, d, w);
  }
  return model;
}

std::vector<Var> simulate(Tape& tape, const ModelVar& model, const std::vector<Var>& u_steps) {
  std::vector<Var> out;
  if (u_steps.empty()) return out;
  const Eigen::Index B = u_steps.front().cols();
  std::vector<Var> X;
  for (const RenBlockVar& b : model.blocks) X.push_back(tape.constant(Mat::Zero(b.weights.dims.n, B)));
  Var H;
  if (model.inner) H = tape.constant(Mat::Zero(model.inner->A.rows(), B));
  const EquilibriumConfig cfg;
  out.reserve(u_steps.size());
  for (const Var& U : u_steps) {
    Var s = static_forward(model.ortho[0], U);
    for (std::size_t k = 0; k < model.blocks.size(); ++k) {
      RenStepVar st = ren_step(model.blocks[k].weights, X[k], s, model.act, cfg);
      X[k] = st.x_next;
      s = static_forward(model.ortho[k + 1], st.y);
    }
    if (model.inner) {
      DynStepVar st = dyn_step(*model.inner, H, s);
      H = st.h_next;
      s = st.y;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace ad

}  // namespace bilipren
