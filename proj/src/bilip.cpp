#include "bilipren/bilip.hpp"

#include <cmath>

#include "bilipren/errors.hpp"

namespace bilipren {

void BiLipHyper::validate() const {
  dims.validate();
  if (!(mu > 0.0 && mu < nu)) throw ArgumentError("BiLipHyper: need 0 < mu < nu");
  if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) {
    throw ArgumentError("BiLipHyper: alpha_bar must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw ArgumentError("BiLipHyper: eps must be positive");
  if (!(d22_margin > 0.0 && d22_margin < 1.0)) {
    throw ArgumentError("BiLipHyper: d22_margin must lie in (0, 1)");
  }
  if (!(alpha_bar * alpha_bar > 2.0 * eps)) {
    throw ArgumentError("BiLipHyper: alpha_bar^2 must exceed the LMI margin");
  }
  // Smallest eigenvalue of the feedthrough block is r^2 (1 - margin^2) / rho.
  const SupplyConstants sc = supply_constants(mu, nu);
  const double r = (nu - mu) / (mu + nu);
  if (!(r * r * (1.0 - d22_margin * d22_margin) / sc.rho > 4.0 * eps)) {
    throw ArgumentError("BiLipHyper: (mu, nu) interval too narrow for the requested eps");
  }
}

void ContractingHyper::validate() const {
  dims.validate();
  if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) {
    throw ArgumentError("ContractingHyper: alpha_bar must lie in (0, 1)");
  }
  if (!(eps > 0.0 && alpha_bar * alpha_bar > 2.0 * eps)) {
    throw ArgumentError("ContractingHyper: eps must be positive and below alpha_bar^2 / 2");
  }
}

SupplyConstants supply_constants(double mu, double nu) {
  if (!(mu > 0.0 && mu <= nu) || !std::isfinite(nu)) {
    throw ArgumentError("supply_constants: need 0 < mu <= nu");
  }
  return {2.0 * mu * nu / (mu + nu), 2.0 / (mu + nu)};
}

Mat d22_from_ball(const Mat& N_free, double mu, double nu, double margin) {
  if (N_free.rows() != N_free.cols()) throw ArgumentError("d22_from_ball: N must be square");
  if (!(mu > 0.0 && mu <= nu)) throw ArgumentError("d22_from_ball: need 0 < mu <= nu");
  if (!(margin > 0.0 && margin < 1.0)) throw ArgumentError("d22_from_ball: margin in (0, 1)");
  const auto m = N_free.rows();
  const double r = (nu - mu) / (mu + nu);
  const double norm = m == 0 ? 0.0 : sv_extremes(N_free).max;
  const Mat Nhat = N_free / (norm + 1.0);
  return 0.5 * (mu + nu) * (Mat::Identity(m, m) + r * margin * Nhat);
}

// ---------------------------------------------------------------------------
// Parameter layouts

void ThetaLayout::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  blocks_.push_back({name, size_, rows, cols});
  size_ += rows * cols;
}

const ThetaBlock& ThetaLayout::at(const std::string& name) const {
  for (const ThetaBlock& b : blocks_)
    if (b.name == name) return b;
  throw ArgumentError("ThetaLayout: no block named '" + name + "'");
}

ThetaLayout ThetaLayout::bilipschitz(const RenDims& d) {
  d.validate();
  ThetaLayout l;
  l.add("L", d.n, d.n);
  l.add("N", d.m, d.m);
  l.add("Cf", d.m, d.n);
  l.add("D21", d.m, d.q);
  l.add("Vx", d.n, d.q);
  l.add("Vu", d.m, d.q);
  l.add("X", d.q, d.q);
  l.add("Z", d.n, d.n + d.q + d.m);
  l.add("bx", d.n, 1);
  l.add("bv", d.q, 1);
  l.add("by", d.m, 1);
  return l;
}

ThetaLayout ThetaLayout::contracting(const RenDims& d) {
  d.validate();
  ThetaLayout l;
  l.add("L", d.n, d.n);
  l.add("Vx", d.n, d.q);
  l.add("X", d.q, d.q);
  l.add("Z", d.n, d.n + d.q);
  l.add("B2", d.n, d.m);
  l.add("C2", d.m, d.n);
  l.add("D12", d.q, d.m);
  l.add("D21", d.m, d.q);
  l.add("D22", d.m, d.m);
  l.add("bx", d.n, 1);
  l.add("bv", d.q, 1);
  l.add("by", d.m, 1);
  return l;
}

// ---------------------------------------------------------------------------
// Differentiable construction

namespace ad {

namespace {

Var identity(Tape& t, Eigen::Index k) { return t.constant(Mat::Identity(k, k)); }

/// 1 / sqrt(1 + |M|_F^2) as a 1x1 node; scaling M by it gives |M|_2 < 1.
Var unit_ball_factor(const Var& M) {
  Tape& t = *M.tape();
  const Var one = t.constant(Mat::Ones(1, 1));
  return cwise_inverse(cwise_sqrt(one + sum_squares(M)));
}

struct Segmenter {
  const Var& theta;
  const ThetaLayout& layout;
  Var operator()(const char* name) const {
    const ThetaBlock& b = layout.at(name);
    return reshape_segment(theta, b.offset, b.rows, b.cols);
  }
};

/// Metric P = L^T L + I and its upper Cholesky factor R (P = R^T R).
std::pair<Var, Var> metric(const Var& L) {
  const Var P = add_identity(transpose(L) * L, 1.0);
  return {P, cholesky_upper(P)};
}

void check_theta(const Var& theta, const ThetaLayout& layout) {
  if (theta.cols() != 1 || theta.rows() != layout.size()) {
    throw ArgumentError("direct_parameterize: theta has " + std::to_string(theta.rows()) +
                        " entries, layout expects " + std::to_string(layout.size()));
  }
  if (!theta.value().allFinite()) throw ArgumentError("direct_parameterize: theta not finite");
}

}  // namespace

Var d22_from_ball(const Var& N_free, double mu, double nu, double margin) {
  Tape& t = *N_free.tape();
  const double r = (nu - mu) / (mu + nu);
  const Var one = t.constant(Mat::Ones(1, 1));
  const Var inv = cwise_inverse(spectral_norm(N_free) + one);
  const Var Nhat = scale(inv, N_free);
  return 0.5 * (mu + nu) * add_identity(r * margin * Nhat, 1.0);
}

ParameterizedRenVar direct_parameterize(Tape& t, const Var& theta, const BiLipHyper& h) {
  h.validate();
  const ThetaLayout layout = ThetaLayout::bilipschitz(h.dims);
  check_theta(theta, layout);
  const Segmenter seg{theta, layout};
  const Eigen::Index n = h.dims.n, q = h.dims.q, m = h.dims.m;
  const double delta = 2.0 * h.eps;
  const SupplyConstants sc = supply_constants(h.mu, h.nu);
  const double xi = sc.xi, rho = sc.rho;
  const double a2 = h.alpha_bar * h.alpha_bar;

  // Everything below is built in coordinates where P = I and mapped back
  // through the Cholesky factor of P at the end.
  const auto [P, R] = metric(seg("L"));

  // Feedthrough and the (x, u) block of the LMI.
  const Var D22 = d22_from_ball(seg("N"), h.mu, h.nu, h.d22_margin);
  const Var E = identity(t, m) - rho * D22;
  const Var Rt = add_identity(D22 + transpose(D22) - rho * (transpose(D22) * D22), -xi);
  const Var Rt_m = add_identity(Rt, -delta);
  const Var S = add_identity(E * solve(Rt_m, transpose(E)), rho);
  const Var Us = cholesky_upper(S);
  const Var Cf = seg("Cf");
  const Var C2t = std::sqrt(a2 - delta) * solve(Us, scale(unit_ball_factor(Cf), Cf));

  const Var N11 = add_identity(-rho * (transpose(C2t) * C2t), a2);
  const Var N13 = transpose(C2t) * E;
  const Var Nxu_m = add_identity(vcat({hcat({N11, N13}), hcat({transpose(N13), Rt})}), -delta);

  // Neuron block: W = rho D21^T D21 + V^T Nxu^{-1} V + X^T X + 2 delta I,
  // from which Lambda = diag(W) / 2 and D11 = -Lambda^{-1} tril(W).
  const Var D21 = seg("D21");
  const Var Vx = seg("Vx");
  const Var Vu = seg("Vu");
  const Var X = seg("X");
  const Var V = vcat({Vx, Vu});
  const Var W = add_identity(rho * (transpose(D21) * D21) + transpose(V) * solve(Nxu_m, V) +
                                 transpose(X) * X,
                             2.0 * delta);
  const Var lambda = 0.5 * diag_vec(W);
  const Var lambda_inv = cwise_inverse(lambda);
  const Var D11 = -scale_rows(lambda_inv, strict_lower(W));
  const Var C1t = -scale_rows(lambda_inv, transpose(Vx) + rho * (transpose(D21) * C2t));
  const Var D12 = scale_rows(lambda_inv, transpose(D21) * E - transpose(Vu));

  const Var N22 = W - rho * (transpose(D21) * D21);
  const Var N23 = transpose(Vu);
  const Var N = vcat({hcat({N11, Vx, N13}), hcat({transpose(Vx), N22, N23}),
                      hcat({transpose(N13), transpose(N23), Rt})});
  const Var RN = cholesky_upper(add_identity(N, -delta));

  // [A B1 B2] = Z RN with |Z|_2 < 1 leaves M = delta I + RN^T (I - Z^T Z) RN.
  const Var Zf = seg("Z");
  const Var G = scale(unit_ball_factor(Zf), Zf) * RN;

  ParameterizedRenVar out;
  RenWeightsVar& w = out.weights;
  w.dims = h.dims;
  w.acyclic = true;
  w.A = solve(R, block(G, 0, 0, n, n) * R);
  w.B1 = solve(R, block(G, 0, n, n, q));
  w.B2 = solve(R, block(G, 0, n + q, n, m));
  w.C1 = C1t * R;
  w.D11 = D11;
  w.D12 = D12;
  w.C2 = C2t * R;
  w.D21 = D21;
  w.D22 = D22;
  w.bx = seg("bx");
  w.bv = seg("bv");
  w.by = seg("by");
  out.P = P;
  out.lambda = lambda;
  return out;
}

ParameterizedRenVar contracting_parameterize(Tape& t, const Var& theta,
                                             const ContractingHyper& h) {
  (void)t;
  h.validate();
  const ThetaLayout layout = ThetaLayout::contracting(h.dims);
  check_theta(theta, layout);
  const Segmenter seg{theta, layout};
  const Eigen::Index n = h.dims.n, q = h.dims.q;
  const double delta = 2.0 * h.eps;
  const double a2 = h.alpha_bar * h.alpha_bar;

  const auto [P, R] = metric(seg("L"));
  const Var Vx = seg("Vx");
  const Var X = seg("X");
  const Var W = add_identity((1.0 / (a2 - delta)) * (transpose(Vx) * Vx) + transpose(X) * X,
                             2.0 * delta);
  const Var lambda = 0.5 * diag_vec(W);
  const Var lambda_inv = cwise_inverse(lambda);
  const Var D11 = -scale_rows(lambda_inv, strict_lower(W));
  const Var C1t = -scale_rows(lambda_inv, transpose(Vx));

  const Var N = vcat({hcat({identity(t, n) * a2, Vx}), hcat({transpose(Vx), W})});
  const Var RN = cholesky_upper(add_identity(N, -delta));
  const Var Zf = seg("Z");
  const Var G = scale(unit_ball_factor(Zf), Zf) * RN;

  ParameterizedRenVar out;
  RenWeightsVar& w = out.weights;
  w.dims = h.dims;
  w.acyclic = true;
  w.A = solve(R, block(G, 0, 0, n, n) * R);
  w.B1 = solve(R, block(G, 0, n, n, q));
  w.B2 = seg("B2");
  w.C1 = C1t * R;
  w.D11 = D11;
  w.D12 = seg("D12");
  w.C2 = seg("C2");
  w.D21 = seg("D21");
  w.D22 = seg("D22");
  w.bx = seg("bx");
  w.bv = seg("bv");
  w.by = seg("by");
  out.P = P;
  out.lambda = lambda;
  return out;
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Plain-value wrappers

namespace {

/// Round-off in the forward-substitution formulas can leave nonzeros on or
/// above the diagonal only through -Lambda^{-1} tril(W); tril is exact, so
/// this only guards against -0.0 style artefacts.
void clean_strict_lower(Mat& D11) {
  D11 = Mat(D11.triangularView<Eigen::StrictlyLower>());
}

}  // namespace

ParameterizedRen direct_parameterize(const Vec& theta, const BiLipHyper& hyper) {
  ad::Tape tape;
  const ad::Var th = tape.constant(theta);
  const ad::ParameterizedRenVar pv = ad::direct_parameterize(tape, th, hyper);
  ParameterizedRen out;
  out.weights = ad::values(pv.weights);
  clean_strict_lower(out.weights.D11);
  Certificate& c = out.certificate;
  c.P = pv.P.value();
  c.lambda = pv.lambda.value();
  c.alpha_bar = hyper.alpha_bar;
  c.mu = hyper.mu;
  c.nu = hyper.nu;
  c = recertify(out.weights, c);
  return out;
}

ParameterizedRen contracting_parameterize(const Vec& theta, const ContractingHyper& hyper) {
  ad::Tape tape;
  const ad::Var th = tape.constant(theta);
  const ad::ParameterizedRenVar pv = ad::contracting_parameterize(tape, th, hyper);
  ParameterizedRen out;
  out.weights = ad::values(pv.weights);
  clean_strict_lower(out.weights.D11);
  Certificate& c = out.certificate;
  c.P = pv.P.value();
  c.lambda = pv.lambda.value();
  c.alpha_bar = hyper.alpha_bar;
  c.kappa = overshoot_from_metric(c.P.size() == 0 ? Mat::Identity(1, 1) : c.P);
  c.lmi_min_eig = verify_contraction_lmi(out.weights, c.P, c.Lambda(), hyper.alpha_bar);
  return out;
}

// ---------------------------------------------------------------------------
// Verification

namespace {

void check_certificate_inputs(const RenWeights& w, const Mat& P, const Mat& Lambda) {
  w.validate();
  const auto n = w.dims.n, q = w.dims.q;
  if (P.rows() != n || P.cols() != n) throw ArgumentError("verify_lmi: P must be n x n");
  if (Lambda.rows() != q || Lambda.cols() != q) {
    throw ArgumentError("verify_lmi: Lambda must be q x q");
  }
  if (asymmetry(P) > kSymmetryTol) throw ArgumentError("verify_lmi: P is not symmetric");
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < q; ++j) {
      if (i == j && !(Lambda(i, i) > 0.0)) {
        throw ArgumentError("verify_lmi: Lambda must have a positive diagonal");
      }
      if (i != j && Lambda(i, j) != 0.0) throw ArgumentError("verify_lmi: Lambda not diagonal");
    }
}

}  // namespace

Mat lmi_matrix(const RenWeights& w, const Mat& P, const Mat& Lambda, double mu, double nu,
               double alpha_bar) {
  check_certificate_inputs(w, P, Lambda);
  const SupplyConstants sc = supply_constants(mu, nu);
  const auto n = w.dims.n, q = w.dims.q, m = w.dims.m;
  const Eigen::Index k = n + q + m;

  Mat T = Mat::Zero(k, k);
  T.block(0, 0, n, n) = alpha_bar * alpha_bar * P;
  T.block(0, n, n, q) = -w.C1.transpose() * Lambda;
  T.block(0, n + q, n, m) = w.C2.transpose();
  T.block(n, 0, q, n) = -Lambda * w.C1;
  T.block(n, n, q, q) = 2.0 * Lambda - Lambda * w.D11 - w.D11.transpose() * Lambda;
  T.block(n, n + q, q, m) = w.D21.transpose() - Lambda * w.D12;
  T.block(n + q, 0, m, n) = w.C2;
  T.block(n + q, n, m, q) = w.D21 - w.D12.transpose() * Lambda;
  T.block(n + q, n + q, m, m) =
      -sc.xi * Mat::Identity(m, m) + w.D22 + w.D22.transpose();

  Mat ABB(n, k);
  ABB << w.A, w.B1, w.B2;
  Mat CDD(m, k);
  CDD << w.C2, w.D21, w.D22;
  const Mat M = T - ABB.transpose() * P * ABB - sc.rho * CDD.transpose() * CDD;
  return 0.5 * (M + M.transpose());
}

double verify_lmi(const RenWeights& wts, const Mat& P, const Mat& Lambda, double mu, double nu,
                  double alpha_bar) {
  return min_eig_sym(lmi_matrix(wts, P, Lambda, mu, nu, alpha_bar));
}

double verify_contraction_lmi(const RenWeights& w, const Mat& P, const Mat& Lambda,
                              double alpha_bar) {
  check_certificate_inputs(w, P, Lambda);
  const auto n = w.dims.n, q = w.dims.q;
  const Eigen::Index k = n + q;
  if (k == 0) throw ArgumentError("verify_contraction_lmi: empty state and neuron blocks");
  Mat T = Mat::Zero(k, k);
  T.block(0, 0, n, n) = alpha_bar * alpha_bar * P;
  T.block(0, n, n, q) = -w.C1.transpose() * Lambda;
  T.block(n, 0, q, n) = -Lambda * w.C1;
  T.block(n, n, q, q) = 2.0 * Lambda - Lambda * w.D11 - w.D11.transpose() * Lambda;
  Mat AB(n, k);
  AB << w.A, w.B1;
  const Mat M = T - AB.transpose() * P * AB;
  return min_eig_sym(0.5 * (M + M.transpose()));
}

double verify_inverse_lmi(const RenWeights& wts, const Certificate& cert) {
  const RenWeights inv = invert_ren(wts);
  return verify_lmi(inv, cert.P, cert.Lambda(), 1.0 / cert.nu, 1.0 / cert.mu, cert.alpha_bar);
}

Certificate recertify(const RenWeights& wts, Certificate cert) {
  cert.lmi_min_eig = verify_lmi(wts, cert.P, cert.Lambda(), cert.mu, cert.nu, cert.alpha_bar);
  cert.kappa = cert.P.size() == 0 ? 1.0 : overshoot_from_metric(cert.P);
  return cert;
}

// ---------------------------------------------------------------------------
// Inverse

RenWeights invert_ren(const RenWeights& w) {
  w.validate();
  const SingularExtremes sv = sv_extremes(w.D22);
  const double cond = sv.min > 0.0 ? sv.max / sv.min : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxFeedthroughCondition)) {
    throw InversionError("invert_ren: D22 is numerically singular (condition " +
                             std::to_string(cond) + ")",
                         cond);
  }
  const auto lu = w.D22.partialPivLu();
  const Mat Dinv = lu.inverse();
  const Mat DinvC2 = lu.solve(w.C2);
  const Mat DinvD21 = lu.solve(w.D21);
  const Vec Dinvby = lu.solve(w.by);

  RenWeights h;
  h.dims = w.dims;
  h.A = w.A - w.B2 * DinvC2;
  h.B1 = w.B1 - w.B2 * DinvD21;
  h.B2 = w.B2 * Dinv;
  h.C1 = w.C1 - w.D12 * DinvC2;
  h.C2 = -DinvC2;
  h.D11 = w.D11 - w.D12 * DinvD21;
  h.D12 = w.D12 * Dinv;
  h.D21 = -DinvD21;
  h.D22 = Dinv;
  h.bx = w.bx - w.B2 * Dinvby;
  h.bv = w.bv - w.D12 * Dinvby;
  h.by = -Dinvby;

  bool strictly_lower = true;
  for (Eigen::Index i = 0; i < h.D11.rows() && strictly_lower; ++i)
    for (Eigen::Index j = i; j < h.D11.cols(); ++j)
      if (h.D11(i, j) != 0.0) {
        strictly_lower = false;
        break;
      }
  h.acyclic = strictly_lower;
  return h;
}

double overshoot_from_metric(const Mat& P) {
  if (P.size() == 0) throw ArgumentError("overshoot_from_metric: empty metric");
  if (!is_posdef(P, 0.0)) throw ArgumentError("overshoot_from_metric: P is not positive definite");
  const SingularExtremes sv = sv_extremes(P);
  return std::sqrt(sv.max / sv.min);
}

}  // namespace bilipren
