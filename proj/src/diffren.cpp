#include "bilipren/diffren.hpp"

#include "bilipren/errors.hpp"

namespace bilipren::ad {

RenWeightsVar constant_weights(Tape& tape, const RenWeights& w) {
  RenWeightsVar v;
  v.dims = w.dims;
  v.acyclic = w.acyclic;
  v.A = tape.constant(w.A);
  v.B1 = tape.constant(w.B1);
  v.B2 = tape.constant(w.B2);
  v.C1 = tape.constant(w.C1);
  v.D11 = tape.constant(w.D11);
  v.D12 = tape.constant(w.D12);
  v.C2 = tape.constant(w.C2);
  v.D21 = tape.constant(w.D21);
  v.D22 = tape.constant(w.D22);
  v.bx = tape.constant(w.bx);
  v.bv = tape.constant(w.bv);
  v.by = tape.constant(w.by);
  return v;
}

RenWeights values(const RenWeightsVar& v) {
  RenWeights w;
  w.dims = v.dims;
  w.acyclic = v.acyclic;
  w.A = v.A.value();
  w.B1 = v.B1.value();
  w.B2 = v.B2.value();
  w.C1 = v.C1.value();
  w.D11 = v.D11.value();
  w.D12 = v.D12.value();
  w.C2 = v.C2.value();
  w.D21 = v.D21.value();
  w.D22 = v.D22.value();
  w.bx = v.bx.value();
  w.bv = v.bv.value();
  w.by = v.by.value();
  return w;
}

Var equilibrium(const Var& D11, const Var& Bw, Activation act, const EquilibriumConfig& cfg,
                const Mat* warm) {
  const Eigen::Index q = Bw.rows();
  const Eigen::Index B = Bw.cols();
  if (D11.rows() != q || D11.cols() != q) throw ArgumentError("ad::equilibrium: D11 shape");
  const Mat& D = D11.value();
  Mat W(q, B);
  Mat S(q, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    Vec w0;
    if (warm != nullptr && warm->rows() == q && warm->cols() == B) w0 = warm->col(j);
    const Vec b = Bw.value().col(j);
    const Vec w = equilibrium_solve(w0, D, b, act, cfg);
    const Vec v = D * w + b;
    W.col(j) = w;
    for (Eigen::Index i = 0; i < q; ++i) S(i, j) = activate_slope(act, v(i));
  }
  const bool triangular = cfg.mode == EquilibriumMode::kAcyclicExact;
  Mat Wc = W;
  return D11.tape()->record(std::move(W), {D11, Bw},
                            [D11, Bw, Wc, S, triangular, q, B](const Mat& g, Tape& t) {
    const Mat& D = D11.value();
    Mat gb(q, B);
    for (Eigen::Index j = 0; j < B; ++j) {
      const Mat K = Mat::Identity(q, q) - S.col(j).asDiagonal() * D;
      Vec lambda;
      if (triangular) {
        lambda = K.triangularView<Eigen::UnitLower>().transpose().solve(g.col(j));
      } else {
        lambda = K.transpose().partialPivLu().solve(g.col(j));
      }
      gb.col(j) = S.col(j).cwiseProduct(lambda);
    }
    if (Bw.needs_grad()) t.accumulate(Bw, gb);
    if (D11.needs_grad()) t.accumulate(D11, gb * Wc.transpose());
  });
}

RenStepVar ren_step(const RenWeightsVar& w, const Var& X, const Var& U, Activation act,
                    const EquilibriumConfig& cfg, const Mat* warm) {
  RenStepVar out;
  const Var bw = add_cols(w.C1 * X + w.D12 * U, w.bv);
  out.w = equilibrium(w.D11, bw, act, cfg, warm);
  out.x_next = add_cols(w.A * X + w.B1 * out.w + w.B2 * U, w.bx);
  out.y = add_cols(w.C2 * X + w.D21 * out.w + w.D22 * U, w.by);
  return out;
}

Var cayley(const Var& J) {
  if (J.rows() != J.cols()) throw ArgumentError("ad::cayley: J must be square");
  Tape& t = *J.tape();
  const Var Z = transpose(J) - J;
  const Var I = t.constant(Mat::Identity(J.rows(), J.cols()));
  return solve(I - Z, I + Z);
}

}  // namespace bilipren::ad
