#include "bilipren/ren.hpp"

#include <cmath>
#include <string>

#include "bilipren/errors.hpp"

namespace bilipren {

// ---------------------------------------------------------------------------
// Activations

double activate(Activation act, double v) {
  switch (act) {
    case Activation::kRelu:
      return v > 0.0 ? v : 0.0;
    case Activation::kTanh:
      return std::tanh(v);
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

double activate_slope(Activation act, double v) {
  switch (act) {
    case Activation::kRelu:
      return v > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    case Activation::kSigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "relu";
}

Activation activation_from_string(const std::string& tag) {
  if (tag == "relu") return Activation::kRelu;
  if (tag == "tanh") return Activation::kTanh;
  if (tag == "sigmoid") return Activation::kSigmoid;
  throw ArgumentError("unknown activation '" + tag + "'");
}

// ---------------------------------------------------------------------------
// Shapes

void RenDims::validate() const {
  if (n < 0 || q < 0) throw ArgumentError("RenDims: n and q must be non-negative");
  if (m < 1) throw ArgumentError("RenDims: m must be at least 1");
}

RenWeights RenWeights::zeros(const RenDims& d, bool acyclic) {
  d.validate();
  RenWeights w;
  w.dims = d;
  w.acyclic = acyclic;
  w.A = Mat::Zero(d.n, d.n);
  w.B1 = Mat::Zero(d.n, d.q);
  w.B2 = Mat::Zero(d.n, d.m);
  w.C1 = Mat::Zero(d.q, d.n);
  w.D11 = Mat::Zero(d.q, d.q);
  w.D12 = Mat::Zero(d.q, d.m);
  w.C2 = Mat::Zero(d.m, d.n);
  w.D21 = Mat::Zero(d.m, d.q);
  w.D22 = Mat::Zero(d.m, d.m);
  w.bx = Vec::Zero(d.n);
  w.bv = Vec::Zero(d.q);
  w.by = Vec::Zero(d.m);
  return w;
}

namespace {

void check_block(const Mat& M, Eigen::Index r, Eigen::Index c, const char* name) {
  if (M.rows() != r || M.cols() != c) {
    throw ArgumentError(std::string("RenWeights: ") + name + " has shape " +
                        std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                        ", expected " + std::to_string(r) + "x" + std::to_string(c));
  }
  if (!M.allFinite()) throw ArgumentError(std::string("RenWeights: ") + name + " not finite");
}

}  // namespace

void RenWeights::validate() const {
  dims.validate();
  const auto n = dims.n, q = dims.q, m = dims.m;
  check_block(A, n, n, "A");
  check_block(B1, n, q, "B1");
  check_block(B2, n, m, "B2");
  check_block(C1, q, n, "C1");
  check_block(D11, q, q, "D11");
  check_block(D12, q, m, "D12");
  check_block(C2, m, n, "C2");
  check_block(D21, m, q, "D21");
  check_block(D22, m, m, "D22");
  check_block(bx, n, 1, "bx");
  check_block(bv, q, 1, "bv");
  check_block(by, m, 1, "by");
  if (acyclic) {
    for (int i = 0; i < q; ++i)
      for (int j = i; j < q; ++j)
        if (D11(i, j) != 0.0) {
          throw ArgumentError("RenWeights: acyclic flag set but D11 is not strictly lower");
        }
  }
}

void EquilibriumConfig::validate() const {
  if (!(tol > 0.0)) throw ArgumentError("EquilibriumConfig: tol must be positive");
  if (max_iters < 1) throw ArgumentError("EquilibriumConfig: max_iters must be positive");
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw ArgumentError("EquilibriumConfig: damping must lie in (0, 1]");
  }
}

EquilibriumConfig fixed_point_config() {
  EquilibriumConfig cfg;
  cfg.mode = EquilibriumMode::kFixedPoint;
  return cfg;
}

// ---------------------------------------------------------------------------
// Equilibrium layer

double equilibrium_residual(const Vec& w, const Mat& D11, const Vec& bw, Activation act) {
  if (w.size() == 0) return 0.0;
  const Vec v = D11 * w + bw;
  double r = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) r = std::max(r, std::abs(w(i) - activate(act, v(i))));
  return r;
}

namespace {

Vec apply(Activation act, const Vec& v) {
  return v.unaryExpr([act](double x) { return activate(act, x); });
}

Vec solve_acyclic(const Mat& D11, const Vec& bw, Activation act) {
  const Eigen::Index q = bw.size();
  Vec w(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const double vi = D11.row(i).head(i).dot(w.head(i)) + bw(i);
    w(i) = activate(act, vi);
  }
  return w;
}

Vec solve_fixed_point(const Vec& w0, const Mat& D11, const Vec& bw, Activation act,
                      const EquilibriumConfig& cfg) {
  const Eigen::Index q = bw.size();
  Vec w = (w0.size() == q) ? w0 : Vec::Zero(q);
  const Mat I = Mat::Identity(q, q);
  double res = equilibrium_residual(w, D11, bw, act);
  for (int it = 0; it < cfg.max_iters && res > cfg.tol; ++it) {
    w = (1.0 - cfg.damping) * w + cfg.damping * apply(act, D11 * w + bw);
    res = equilibrium_residual(w, D11, bw, act);
  }
  if (res <= cfg.tol || !cfg.newton_fallback) {
    if (res <= cfg.tol) return w;
    throw IterationFailure("equilibrium_solve: no convergence, residual " + std::to_string(res),
                           res, cfg.max_iters);
  }
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (res <= cfg.tol) return w;
    const Vec v = D11 * w + bw;
    const Vec r = w - apply(act, v);
    Vec slope(q);
    for (Eigen::Index i = 0; i < q; ++i) slope(i) = activate_slope(act, v(i));
    const Mat K = I - slope.asDiagonal() * D11;
    const Vec dw = K.partialPivLu().solve(r);

    bool accepted = false;
    if (dw.allFinite()) {
      for (double step = 1.0; step > 1e-6; step *= 0.5) {
        const Vec trial = w - step * dw;
        const double trial_res = equilibrium_residual(trial, D11, bw, act);
        if (trial_res < (1.0 - 1e-4 * step) * res) {
          w = trial;
          res = trial_res;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      w = (1.0 - cfg.damping) * w + cfg.damping * apply(act, v);
      res = equilibrium_residual(w, D11, bw, act);
    }
  }
  if (res <= cfg.tol) return w;
  throw IterationFailure("equilibrium_solve: no convergence, residual " + std::to_string(res),
                         res, 2 * cfg.max_iters);
}

}  // namespace

Vec equilibrium_solve(const Vec& w0, const Mat& D11, const Vec& bw, Activation act,
                      const EquilibriumConfig& cfg) {
  if (D11.rows() != D11.cols() || D11.rows() != bw.size()) {
    throw ArgumentError("equilibrium_solve: D11 must be q x q with q = bw.size()");
  }
  if (bw.size() == 0) return Vec(0);
  if (cfg.mode == EquilibriumMode::kAcyclicExact) return solve_acyclic(D11, bw, act);
  return solve_fixed_point(w0, D11, bw, act, cfg);
}

// ---------------------------------------------------------------------------
// State-space recursion

RenStepResult ren_step(const RenWeights& wts, const Vec& x, const Vec& u, Activation act,
                       const EquilibriumConfig& cfg) {
  return ren_step_warm(wts, x, u, Vec(), act, cfg);
}

RenStepResult ren_step_warm(const RenWeights& wts, const Vec& x, const Vec& u, const Vec& w0,
                            Activation act, const EquilibriumConfig& cfg) {
  if (x.size() != wts.dims.n || u.size() != wts.dims.m) {
    throw ArgumentError("ren_step: state or input size does not match the weights");
  }
  const Vec bw = wts.C1 * x + wts.D12 * u + wts.bv;
  RenStepResult out;
  out.w = equilibrium_solve(w0, wts.D11, bw, act, cfg);
  out.x_next = wts.A * x + wts.B1 * out.w + wts.B2 * u + wts.bx;
  out.y = wts.C2 * x + wts.D21 * out.w + wts.D22 * u + wts.by;
  return out;
}

RenTrajectory ren_simulate(const RenWeights& wts, const Vec& x0, const Mat& u_seq,
                           Activation act, const EquilibriumConfig& cfg) {
  if (u_seq.rows() == 0) throw ArgumentError("ren_simulate: empty input sequence");
  if (u_seq.cols() != wts.dims.m) throw ArgumentError("ren_simulate: input width mismatch");
  if (x0.size() != wts.dims.n) throw ArgumentError("ren_simulate: initial state size mismatch");
  const Eigen::Index T = u_seq.rows();
  RenTrajectory traj;
  traj.y.resize(T, wts.dims.m);
  traj.x.resize(T + 1, wts.dims.n);
  traj.x.row(0) = x0.transpose();
  Vec x = x0;
  Vec w;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vec u = u_seq.row(t).transpose();
    RenStepResult s = ren_step_warm(wts, x, u, w, act, cfg);
    traj.y.row(t) = s.y.transpose();
    traj.x.row(t + 1) = s.x_next.transpose();
    x = std::move(s.x_next);
    w = std::move(s.w);
  }
  return traj;
}

}  // namespace bilipren
