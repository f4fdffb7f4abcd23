#include "bilipren/orthogonal.hpp"

#include "bilipren/diffren.hpp"
#include "bilipren/errors.hpp"

namespace bilipren {

void StaticOrtho::validate() const {
  if (P.rows() != P.cols() || P.rows() == 0) throw ArgumentError("StaticOrtho: P must be square");
  if (q.size() != P.rows()) throw ArgumentError("StaticOrtho: bias width mismatch");
}

Mat DynOrtho::Q() const {
  Mat Qm(A.rows() + C.rows(), A.cols() + B.cols());
  Qm << A, B, C, D;
  return Qm;
}

void DynOrtho::validate() const {
  const auto p = A.rows(), m = D.rows();
  if (m == 0) throw ArgumentError("DynOrtho: width must be positive");
  if (A.cols() != p || B.rows() != p || B.cols() != m || C.rows() != m || C.cols() != p ||
      D.cols() != m) {
    throw ArgumentError("DynOrtho: inconsistent block shapes");
  }
  if (d.size() != p || w.size() != m) throw ArgumentError("DynOrtho: bias shapes");
}

StaticOrtho make_static(const Mat& J, const Vec& q) {
  if (J.rows() != J.cols()) throw ArgumentError("make_static: J must be square");
  StaticOrtho s{cayley(J), q};
  s.validate();
  return s;
}

DynOrtho make_dynamic(const Mat& J, Eigen::Index p, const Vec& d, const Vec& w) {
  if (J.rows() != J.cols() || p < 0 || J.rows() <= p) {
    throw ArgumentError("make_dynamic: J must be (p+m) x (p+m) with m >= 1");
  }
  const Mat Q = cayley(J);
  const auto m = J.rows() - p;
  DynOrtho l{Q.topLeftCorner(p, p), Q.topRightCorner(p, m), Q.bottomLeftCorner(m, p),
             Q.bottomRightCorner(m, m), d, w};
  l.validate();
  return l;
}

StaticOrtho identity_static(Eigen::Index m) {
  return {Mat::Identity(m, m), Vec::Zero(m)};
}

Vec static_forward(const StaticOrtho& layer, const Vec& u) { return layer.P * u + layer.q; }

Vec static_inverse(const StaticOrtho& layer, const Vec& y) {
  return layer.P.transpose() * (y - layer.q);
}

Mat static_forward_seq(const StaticOrtho& layer, const Mat& u_seq) {
  if (u_seq.cols() != layer.width()) throw ArgumentError("static_forward: width mismatch");
  return (u_seq * layer.P.transpose()).rowwise() + layer.q.transpose();
}

Mat static_inverse_seq(const StaticOrtho& layer, const Mat& y_seq) {
  if (y_seq.cols() != layer.width()) throw ArgumentError("static_inverse: width mismatch");
  return (y_seq.rowwise() - layer.q.transpose()) * layer.P;
}

DynTrajectory dyn_forward(const DynOrtho& l, const Vec& h0, const Mat& u_seq) {
  l.validate();
  const auto p = l.state_size(), m = l.width();
  if (h0.size() != p) throw ArgumentError("dyn_forward: h0 size mismatch");
  if (u_seq.cols() != m) throw ArgumentError("dyn_forward: input width mismatch");
  const auto T = u_seq.rows();
  DynTrajectory out{Mat(T, m), Mat(T + 1, p)};
  Vec h = h0;
  out.h.row(0) = h.transpose();
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vec u = u_seq.row(t).transpose();
    out.y.row(t) = (l.C * h + l.D * u + l.w).transpose();
    h = l.A * h + l.B * u + l.d;
    out.h.row(t + 1) = h.transpose();
  }
  return out;
}

Mat dyn_inverse_anticausal(const DynOrtho& l, const Mat& y_seq, const Vec& h_terminal) {
  l.validate();
  const auto p = l.state_size(), m = l.width();
  if (y_seq.rows() == 0) throw ArgumentError("dyn_inverse_anticausal: empty sequence");
  if (y_seq.cols() != m) throw ArgumentError("dyn_inverse_anticausal: width mismatch");
  if (h_terminal.size() != p) throw ArgumentError("dyn_inverse_anticausal: terminal state size");
  Mat u_seq(y_seq.rows(), m);
  Vec h = h_terminal;
  for (Eigen::Index t = y_seq.rows() - 1; t >= 0; --t) {
    const Vec eh = h - l.d;
    const Vec ey = y_seq.row(t).transpose() - l.w;
    u_seq.row(t) = (l.B.transpose() * eh + l.D.transpose() * ey).transpose();
    h = l.A.transpose() * eh + l.C.transpose() * ey;
  }
  return u_seq;
}

namespace ad {

StaticOrthoVar make_static(const Var& J, const Var& q) { return {cayley(J), q}; }

DynOrthoVar make_dynamic(const Var& J, Eigen::Index p, const Var& d, const Var& w) {
  if (J.rows() != J.cols() || p < 0 || J.rows() <= p) {
    throw ArgumentError("ad::make_dynamic: J must be (p+m) x (p+m) with m >= 1");
  }
  const Var Q = cayley(J);
  const auto m = J.rows() - p;
  return {block(Q, 0, 0, p, p), block(Q, 0, p, p, m), block(Q, p, 0, m, p),
          block(Q, p, p, m, m), d, w};
}

StaticOrtho values(const StaticOrthoVar& v) { return {v.P.value(), v.q.value()}; }

DynOrtho values(const DynOrthoVar& v) {
  return {v.A.value(), v.B.value(), v.C.value(), v.D.value(), v.d.value(), v.w.value()};
}

Var static_forward(const StaticOrthoVar& l, const Var& U) { return add_cols(l.P * U, l.q); }

DynStepVar dyn_step(const DynOrthoVar& l, const Var& H, const Var& U) {
  DynStepVar s;
  s.y = add_cols(l.C * H + l.D * U, l.w);
  s.h_next = add_cols(l.A * H + l.B * U, l.d);
  return s;
}

}  // namespace ad

}  // namespace bilipren
