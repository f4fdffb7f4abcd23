#pragma once

// Static and dynamic orthogonal layers.
//
//   static:   y = P u + q,                     P^T P = I
//   dynamic:  [h+; y] = Q [h; u] + [d; w],     Q = [[A, B], [C, D]], Q^T Q = I
//
// The dynamic inverse runs backwards in time:
//   [h; u] = Q^T ([h+; y] - [d; w]).

#include "bilipren/autodiff.hpp"
#include "bilipren/numeric.hpp"

namespace bilipren {

struct StaticOrtho {
  Mat P;
  Vec q;

  Eigen::Index width() const { return P.rows(); }
  void validate() const;
};

struct DynOrtho {
  Mat A, B, C, D;
  Vec d, w;

  Eigen::Index state_size() const { return A.rows(); }
  Eigen::Index width() const { return D.rows(); }
  Mat Q() const;
  void validate() const;
};

StaticOrtho make_static(const Mat& J, const Vec& q);

/// Q = cayley(J) with J of size (p+m) x (p+m), split as [[A, B], [C, D]].
DynOrtho make_dynamic(const Mat& J, Eigen::Index p, const Vec& d, const Vec& w);

/// Identity layer of width m (P = I, q = 0).
StaticOrtho identity_static(Eigen::Index m);

Vec static_forward(const StaticOrtho& layer, const Vec& u);
Vec static_inverse(const StaticOrtho& layer, const Vec& y);

/// Row-wise application to a T x m sequence.
Mat static_forward_seq(const StaticOrtho& layer, const Mat& u_seq);
Mat static_inverse_seq(const StaticOrtho& layer, const Mat& y_seq);

struct DynTrajectory {
  Mat y;  ///< T x m
  Mat h;  ///< (T+1) x p, row 0 is h0
};

DynTrajectory dyn_forward(const DynOrtho& layer, const Vec& h0, const Mat& u_seq);

/// Backward recursion from the state at index T (h_terminal).
Mat dyn_inverse_anticausal(const DynOrtho& layer, const Mat& y_seq, const Vec& h_terminal);

namespace ad {

struct StaticOrthoVar {
  Var P;
  Var q;
};

struct DynOrthoVar {
  Var A, B, C, D;
  Var d, w;
};

StaticOrthoVar make_static(const Var& J, const Var& q);
DynOrthoVar make_dynamic(const Var& J, Eigen::Index p, const Var& d, const Var& w);

StaticOrtho values(const StaticOrthoVar& v);
DynOrtho values(const DynOrthoVar& v);

/// Batch forms: U is m x B.
Var static_forward(const StaticOrthoVar& layer, const Var& U);

struct DynStepVar {
  Var h_next;
  Var y;
};

DynStepVar dyn_step(const DynOrthoVar& layer, const Var& H, const Var& U);

}  // namespace ad

}  // namespace bilipren
