#pragma once

// Matrix-granular reverse-mode automatic differentiation.
//
// A Tape records every operation in creation order, so creation order is a
// topological order and backward() is a single reverse sweep. Values live
// in a std::deque so references handed out by Var::value() stay valid
// while more nodes are appended. A Tape is not thread-safe; use one per
// thread.

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "bilipren/numeric.hpp"

namespace bilipren::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  /// True when some leaf variable upstream requires a gradient.
  bool needs_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Receives the gradient of the node's output and pushes contributions
  /// into its parents with accumulate().
  using Pullback = std::function<void(const Mat& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  Var variable(Mat value);

  /// Append an op node. The pullback is dropped when no parent needs a
  /// gradient.
  Var record(Mat value, std::initializer_list<Var> parents, Pullback pullback);
  Var record(Mat value, const std::vector<Var>& parents, Pullback pullback);

  /// Reverse sweep from a 1x1 root.
  void backward(const Var& root);

  /// Gradient of the last backward() root with respect to v (zeros if v
  /// was not reached).
  Mat grad(const Var& v) const;

  void accumulate(const Var& v, const Mat& g);

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    bool has_grad = false;
    Pullback pullback;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

// Arithmetic.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(double s, const Var& a);
inline Var operator*(const Var& a, double s) { return s * a; }
/// Matrix product.
Var operator*(const Var& a, const Var& b);
/// (1x1 scalar) * matrix.
Var scale(const Var& s, const Var& m);
Var add_identity(const Var& a, double c);
Var hadamard(const Var& a, const Var& b);
/// m + b * 1^T, where b is a column with m.rows() entries.
Var add_cols(const Var& m, const Var& b);

// Shape.
Var transpose(const Var& a);
Var block(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols);
Var hcat(const std::vector<Var>& parts);
Var vcat(const std::vector<Var>& parts);
/// rows x cols matrix read row-major from a column vector starting at offset.
Var reshape_segment(const Var& flat, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols);

// Elementwise maps.
using ScalarFn = double (*)(double);
Var cwise(const Var& a, ScalarFn f, ScalarFn df);
Var cwise_exp(const Var& a);
Var cwise_sqrt(const Var& a);
Var cwise_inverse(const Var& a);

// Reductions.
Var sum(const Var& a);
Var sum_squares(const Var& a);

// Diagonal and triangular structure.
Var diag_vec(const Var& a);
Var diag_mat(const Var& v);
/// diag(v) * m
Var scale_rows(const Var& v, const Var& m);
Var strict_lower(const Var& a);

// Linear algebra.
/// Upper-triangular R with R^T R = S. Throws NumericalError if S is not
/// numerically positive definite.
Var cholesky_upper(const Var& s);
/// A^{-1} B via partial-pivot LU.
Var solve(const Var& a, const Var& b);
/// Largest singular value as a 1x1 node.
Var spectral_norm(const Var& a);

}  // namespace bilipren::ad
