#include "bilipren/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bilipren/diffren.hpp"
#include "bilipren/errors.hpp"

namespace bilipren {

namespace {

Mat normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = normal(rng);
  return M;
}

/// Uniform direction scaled to the given radius.
Mat on_sphere(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double radius) {
  if (rows * cols == 0) return Mat(rows, cols);
  Mat M = normal_matrix(rng, rows, cols);
  double n = M.norm();
  while (!(n > 0.0)) {
    M = normal_matrix(rng, rows, cols);
    n = M.norm();
  }
  return (radius / n) * M;
}

/// sqrt of the running sum of squared rows.
std::vector<double> running_norms(const Mat& e) {
  std::vector<double> out(static_cast<std::size_t>(e.rows()));
  double acc = 0.0;
  for (Eigen::Index t = 0; t < e.rows(); ++t) {
    acc += e.row(t).squaredNorm();
    out[static_cast<std::size_t>(t)] = std::sqrt(acc);
  }
  return out;
}

const RenBlock& single_block(const SandwichModel& model) {
  model.validate();
  if (model.blocks.size() != 1) {
    throw ArgumentError("inversion bounds need a sandwich with exactly one REN block");
  }
  return model.blocks.front();
}

BoundReport make_report(const Mat& err, const Mat& delta, double c, double gap,
                        const BoundConstants& k) {
  BoundReport r;
  r.constants = k;
  r.state_gap = gap;
  const std::vector<double> e = running_norms(err);
  const std::vector<double> d = running_norms(delta);
  r.perturbation_norm = d.empty() ? 0.0 : d.back();
  for (std::size_t t = 0; t < e.size(); ++t) {
    const double T = static_cast<double>(t + 1);
    r.horizons.push_back(static_cast<int>(t + 1));
    r.measured.push_back(e[t] / T);
    r.theoretical.push_back((c * gap + (k.nu / k.mu) * d[t]) / T);
  }
  return r;
}

}  // namespace

RatioInterval empirical_bilip_probe(const SequenceMap& F, Eigen::Index m, int trials,
                                    Eigen::Index horizon, std::uint64_t seed) {
  if (trials < 1 || horizon < 1 || m < 1) throw ArgumentError("empirical_bilip_probe: bad sizes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_scale(std::log(1e-2), std::log(3.0));
  RatioInterval r{std::numeric_limits<double>::infinity(), 0.0};
  for (int k = 0; k < trials; ++k) {
    const Mat u = normal_matrix(rng, horizon, m);
    Mat du = normal_matrix(rng, horizon, m);
    while (!(du.norm() > 1e-12)) du = normal_matrix(rng, horizon, m);
    du *= std::exp(log_scale(rng)) / du.norm() * std::sqrt(static_cast<double>(horizon * m));
    const Mat v = u + du;
    const double ratio = (F(u) - F(v)).norm() / (u - v).norm();
    r.ratio_min = std::min(r.ratio_min, ratio);
    r.ratio_max = std::max(r.ratio_max, ratio);
  }
  return r;
}

RatioInterval empirical_bilip_probe(const Model& model, int trials, Eigen::Index horizon,
                                    std::uint64_t seed) {
  return empirical_bilip_probe([&model](const Mat& u) { return model.simulate(u); },
                               model.width(), trials, horizon, seed);
}

ContractionFit contraction_probe(const RenModel& model, const Vec& a, const Vec& b,
                                 const Mat& u_seq) {
  const RenTrajectory ta = model.simulate(a, u_seq);
  const RenTrajectory tb = model.simulate(b, u_seq);
  ContractionFit fit;
  const double d0 = (a - b).norm();
  if (!(d0 > 0.0)) return fit;
  std::vector<double> ts, ls;
  for (Eigen::Index t = 0; t < ta.x.rows(); ++t) {
    const double d = (ta.x.row(t) - tb.x.row(t)).norm();
    if (!(d > 1e-12 * d0)) break;
    ts.push_back(static_cast<double>(t));
    ls.push_back(std::log(d));
  }
  fit.samples = static_cast<int>(ts.size());
  if (ts.size() < 2) {
    fit.rate = 0.0;
    fit.defined = true;
    return fit;
  }
  const double n = static_cast<double>(ts.size());
  double st = 0, sl = 0, stt = 0, stl = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sl += ls[i];
    stt += ts[i] * ts[i];
    stl += ts[i] * ls[i];
  }
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  fit.rate = std::exp(slope);
  fit.defined = true;
  return fit;
}

OutputGains output_layer_bilip(const RenModel& model, const Mat& states, const Mat& inputs,
                               double fd_step) {
  const RenWeights& w = model.weights;
  const auto n = w.dims.n, m = w.dims.m;
  if (states.rows() != inputs.rows() || states.rows() < 1 || states.cols() != n ||
      inputs.cols() != m) {
    throw ArgumentError("output_layer_bilip: need matching state and input rows");
  }
  if (!(fd_step > 0.0)) throw ArgumentError("output_layer_bilip: fd_step must be positive");
  OutputGains g{std::numeric_limits<double>::infinity(), 0.0, false};
  if (n == 0) return {0.0, 0.0, true};
  for (Eigen::Index s = 0; s < states.rows(); ++s) {
    const Vec x = states.row(s).transpose();
    const Vec u = inputs.row(s).transpose();
    Mat J(m, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Vec xp = x, xm = x;
      xp(i) += fd_step;
      xm(i) -= fd_step;
      J.col(i) = (ren_step(w, xp, u, model.act, model.eq).y -
                  ren_step(w, xm, u, model.act, model.eq).y) / (2.0 * fd_step);
    }
    const SingularExtremes sv = sv_extremes(J);
    g.gamma_min = std::min(g.gamma_min, sv.min);
    g.gamma_max = std::max(g.gamma_max, sv.max);
  }
  if (g.gamma_max == 0.0) {
    g.gamma_min = 0.0;
    g.x_independent = true;
  }
  return g;
}

OutputGains output_layer_bilip(const RenModel& model, const Mat& u_seq, int samples,
                               std::uint64_t seed, double fd_step) {
  if (samples < 1 || u_seq.rows() < 1) throw ArgumentError("output_layer_bilip: need samples");
  const RenTrajectory tr = model.simulate(Vec::Zero(model.weights.dims.n), u_seq);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, u_seq.rows() - 1);
  Mat xs(samples, model.weights.dims.n), us(samples, u_seq.cols());
  for (int s = 0; s < samples; ++s) {
    const Eigen::Index t = pick(rng);
    xs.row(s) = tr.x.row(t);
    us.row(s) = u_seq.row(t);
  }
  return output_layer_bilip(model, xs, us, fd_step);
}

double BoundConstants::input_state_gain() const {
  return kappa1 * gamma2 / (mu * std::sqrt(1.0 - alpha1 * alpha1));
}

double BoundConstants::output_state_gain() const {
  if (!(gamma1 > 0.0)) return std::numeric_limits<double>::infinity();
  return kappa2 * nu / (gamma1 * std::sqrt(1.0 - alpha2 * alpha2));
}

BoundConstants bound_constants(const SandwichModel& model, const OutputGains& gains) {
  const RenBlock& blk = single_block(model);
  if (!blk.bilipschitz) throw ArgumentError("bound_constants: block is not bi-Lipschitz");
  BoundConstants k;
  k.kappa1 = overshoot_from_metric(blk.cert.P);
  k.kappa2 = k.kappa1;
  k.alpha1 = blk.cert.alpha_bar;
  k.alpha2 = blk.cert.alpha_bar;
  k.gamma1 = gains.gamma_min;
  k.gamma2 = gains.gamma_max;
  k.mu = blk.cert.mu;
  k.nu = blk.cert.nu;
  return k;
}

bool BoundReport::holds() const {
  for (std::size_t i = 0; i < measured.size(); ++i)
    if (!(measured[i] <= theoretical[i])) return false;
  return true;
}

BoundReport reconstruction_error_curve(const SandwichModel& model, const Mat& u,
                                       const Mat& delta_u, const Vec& a, const Vec& b,
                                       const BoundConstants& constants) {
  single_block(model);
  if (u.rows() != delta_u.rows() || u.cols() != delta_u.cols()) {
    throw ArgumentError("reconstruction_error_curve: u and delta_u shapes differ");
  }
  const Mat y_tilde = sandwich_forward(model, {a}, u + delta_u);
  const Mat u_hat = sandwich_inverse(model, {b}, y_tilde);
  return make_report(u_hat - u, delta_u, constants.input_state_gain(), (a - b).norm(),
                     constants);
}

BoundReport output_error_curve(const SandwichModel& model, const Mat& y, const Mat& delta_y,
                               const Vec& a, const Vec& b, const BoundConstants& constants) {
  single_block(model);
  if (y.rows() != delta_y.rows() || y.cols() != delta_y.cols()) {
    throw ArgumentError("output_error_curve: y and delta_y shapes differ");
  }
  const Mat u_hat = sandwich_inverse(model, {b}, y + delta_y);
  const Mat y_hat = sandwich_forward(model, {a}, u_hat);
  return make_report(y_hat - y, delta_y, constants.output_state_gain(), (a - b).norm(),
                     constants);
}

void PgdConfig::validate() const {
  if (!(init_radius > 0.0 && pert_radius > 0.0)) throw ArgumentError("PgdConfig: radii > 0");
  if (steps < 0 || restarts < 1 || !(step_size > 0.0)) {
    throw ArgumentError("PgdConfig: need steps >= 0, restarts >= 1, step_size > 0");
  }
}

Mat project_ball(const Mat& v, double radius) {
  const double n = v.norm();
  return n > radius ? Mat((radius / n) * v) : v;
}

double inversion_error(const SandwichModel& model, const Mat& u, const Mat& delta_u,
                       const Vec& a, const Vec& b) {
  const Mat y_tilde = sandwich_forward(model, {a}, u + delta_u);
  return (sandwich_inverse(model, {b}, y_tilde) - u).norm();
}

namespace {

struct PgdEval {
  double error = 0.0;
  Mat g_u;
  Mat g_delta;
  Vec g_b;
};

/// Forward pass F_a, inverse pass F_b^{-1}, and the gradient of the squared
/// error with respect to (u, delta_u, b).
PgdEval pgd_eval(const SandwichModel& model, const RenWeights& inv, const Mat& u,
                 const Mat& delta, const Vec& a, const Vec& b) {
  const RenBlock& blk = model.blocks.front();
  const StaticOrtho& O1 = model.ortho[0];
  const StaticOrtho& O2 = model.ortho[1];
  const Eigen::Index T = u.rows();
  const Activation act = blk.model.act;
  const EquilibriumConfig inv_cfg = inv.acyclic ? blk.model.eq : fixed_point_config();

  ad::Tape tape;
  const ad::RenWeightsVar fw = ad::constant_weights(tape, blk.model.weights);
  const ad::RenWeightsVar iw = ad::constant_weights(tape, inv);
  const ad::Var P1 = tape.constant(O1.P), q1 = tape.constant(O1.q);
  const ad::Var P2 = tape.constant(O2.P), q2 = tape.constant(O2.q);
  const ad::Var P1t = ad::transpose(P1), P2t = ad::transpose(P2);

  std::vector<ad::Var> us, ds, errs;
  us.reserve(static_cast<std::size_t>(T));
  ds.reserve(static_cast<std::size_t>(T));
  errs.reserve(static_cast<std::size_t>(T));
  ad::Var X = tape.constant(a);
  const ad::Var bv = tape.variable(b);
  ad::Var Xi = bv;
  Mat warm;
  for (Eigen::Index t = 0; t < T; ++t) {
    us.push_back(tape.variable(u.row(t).transpose()));
    ds.push_back(tape.variable(delta.row(t).transpose()));
    const ad::Var s = ad::add_cols(P1 * (us.back() + ds.back()), q1);
    const ad::RenStepVar st = ad::ren_step(fw, X, s, act, blk.model.eq);
    X = st.x_next;
    const ad::Var y = ad::add_cols(P2 * st.y, q2);
    const ad::Var s2 = P2t * (y - q2);
    const ad::RenStepVar it =
        ad::ren_step(iw, Xi, s2, act, inv_cfg, warm.size() > 0 ? &warm : nullptr);
    warm = it.w.value();
    Xi = it.x_next;
    const ad::Var u_hat = P1t * (it.y - q1);
    errs.push_back(u_hat - us.back());
  }
  const ad::Var loss = ad::sum_squares(ad::vcat(errs));
  tape.backward(loss);

  PgdEval ev;
  ev.error = std::sqrt(loss.value()(0, 0));
  ev.g_u.resize(T, u.cols());
  ev.g_delta.resize(T, u.cols());
  for (Eigen::Index t = 0; t < T; ++t) {
    ev.g_u.row(t) = tape.grad(us[static_cast<std::size_t>(t)]).transpose();
    ev.g_delta.row(t) = tape.grad(ds[static_cast<std::size_t>(t)]).transpose();
  }
  ev.g_b = tape.grad(bv);
  if (!std::isfinite(ev.error) || !ev.g_u.allFinite() || !ev.g_delta.allFinite() ||
      !ev.g_b.allFinite()) {
    throw NumericalError("pgd_worst_case: non-finite objective or gradient");
  }
  return ev;
}

template <class M>
M normalized(const M& g) {
  const double n = g.norm();
  return n > 0.0 ? M(g / n) : M(g);
}

}  // namespace

PgdResult pgd_worst_case(const SandwichModel& model, const PgdConfig& cfg, const Mat& u_nominal,
                         const Vec& a, const BoundConstants& constants) {
  cfg.validate();
  const RenBlock& blk = single_block(model);
  if (u_nominal.cols() != model.width() || u_nominal.rows() < 1) {
    throw ArgumentError("pgd_worst_case: u_nominal shape");
  }
  if (a.size() != blk.model.weights.dims.n) throw ArgumentError("pgd_worst_case: state size");
  const RenWeights inv = invert_ren(blk.model.weights);
  const Eigen::Index T = u_nominal.rows(), m = u_nominal.cols();
  std::mt19937_64 rng(cfg.seed);

  PgdResult best;
  best.error = -1.0;
  for (int r = 0; r < cfg.restarts; ++r) {
    Mat u = u_nominal;
    Mat delta = on_sphere(rng, T, m, cfg.pert_radius);
    Vec b = a + Vec(on_sphere(rng, a.size(), 1, cfg.init_radius));
    double restart_best = -1.0;
    for (int k = 0; k <= cfg.steps; ++k) {
      const PgdEval ev = pgd_eval(model, inv, u, delta, a, b);
      if (ev.error > restart_best) restart_best = ev.error;
      if (ev.error > best.error) {
        best.error = ev.error;
        best.u = u;
        best.delta_u = delta;
        best.b = b;
      }
      if (k == cfg.steps) break;
      u += cfg.step_size * normalized(ev.g_u);
      delta = project_ball(delta + cfg.step_size * normalized(ev.g_delta), cfg.pert_radius);
      if (a.size() > 0) {
        b = a + Vec(project_ball(b - a + cfg.step_size * normalized(ev.g_b), cfg.init_radius));
      }
    }
    best.restart_errors.push_back(restart_best);
  }
  best.theoretical = constants.input_state_gain() * (best.b - a).norm() +
                     (constants.nu / constants.mu) * best.delta_u.norm();
  return best;
}

double random_probe_max(const SandwichModel& model, const PgdConfig& cfg, const Mat& u_nominal,
                        const Vec& a, int probes) {
  cfg.validate();
  single_block(model);
  if (probes < 1) throw ArgumentError("random_probe_max: need probes >= 1");
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    const Mat delta = on_sphere(rng, u_nominal.rows(), u_nominal.cols(), cfg.pert_radius);
    const Vec b = a + Vec(on_sphere(rng, a.size(), 1, cfg.init_radius));
    worst = std::max(worst, inversion_error(model, u_nominal, delta, a, b));
  }
  return worst;
}

int cross_correlation_lag(const Mat& a, const Mat& b, int max_lag) {
  if (a.cols() != b.cols()) throw ArgumentError("cross_correlation_lag: width mismatch");
  if (max_lag < 0) throw ArgumentError("cross_correlation_lag: max_lag must be >= 0");
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int k = -max_lag; k <= max_lag; ++k) {
    double s = 0.0;
    for (Eigen::Index t = 0; t < a.rows(); ++t) {
      const Eigen::Index j = t + k;
      if (j >= 0 && j < b.rows()) s += a.row(t).dot(b.row(j));
    }
    if (s > best_val) {
      best_val = s;
      best = k;
    }
  }
  return best;
}

}  // namespace bilipren
