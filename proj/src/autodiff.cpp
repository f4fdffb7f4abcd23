#include "bilipren/autodiff.hpp"

#include <cmath>
#include <string>

#include "bilipren/errors.hpp"

namespace bilipren::ad {

const Mat& Var::value() const { return tape_->value(id_); }

bool Var::needs_grad() const { return tape_->needs_grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Mat value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::record(Mat value, const std::vector<Var>& parents, Pullback pullback) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape_ != this) throw ArgumentError("ad: mixing variables from different tapes");
    n.needs_grad = n.needs_grad || needs_grad(p.id_);
  }
  if (n.needs_grad) n.pullback = std::move(pullback);
  return push(std::move(n));
}

Var Tape::record(Mat value, std::initializer_list<Var> parents, Pullback pullback) {
  return record(std::move(value), std::vector<Var>(parents), std::move(pullback));
}

void Tape::accumulate(const Var& v, const Mat& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id_)];
  if (!n.needs_grad) return;
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Tape::backward(const Var& root) {
  if (root.tape_ != this) throw ArgumentError("ad: root belongs to another tape");
  if (root.rows() != 1 || root.cols() != 1) throw ArgumentError("ad: backward root must be 1x1");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(root, Mat::Ones(1, 1));
  for (int i = root.id_; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad || !n.pullback) continue;
    const Mat g = n.grad;
    n.pullback(g, *this);
  }
}

Mat Tape::grad(const Var& v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id_)];
  if (!n.has_grad) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string("ad::") + op + ": shape mismatch " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw ArgumentError("ad: uninitialized variable");
  return *a.tape();
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](const Mat& g, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var operator-(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](const Mat& g, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var operator-(const Var& a) {
  return tape_of(a).record(-a.value(), {a}, [a](const Mat& g, Tape& t) { t.accumulate(a, -g); });
}

Var operator*(double s, const Var& a) {
  return tape_of(a).record(s * a.value(), {a},
                           [a, s](const Mat& g, Tape& t) { t.accumulate(a, s * g); });
}

Var operator*(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ArgumentError("ad::matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()));
  }
  return tape_of(a).record(a.value() * b.value(), {a, b}, [a, b](const Mat& g, Tape& t) {
    if (a.needs_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.needs_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var scale(const Var& s, const Var& m) {
  if (s.rows() != 1 || s.cols() != 1) throw ArgumentError("ad::scale: scalar must be 1x1");
  const double sv = s.value()(0, 0);
  return tape_of(m).record(sv * m.value(), {s, m}, [s, m, sv](const Mat& g, Tape& t) {
    if (s.needs_grad()) t.accumulate(s, Mat::Constant(1, 1, g.cwiseProduct(m.value()).sum()));
    if (m.needs_grad()) t.accumulate(m, sv * g);
  });
}

Var add_identity(const Var& a, double c) {
  if (a.rows() != a.cols()) throw ArgumentError("ad::add_identity: matrix must be square");
  Mat v = a.value();
  v.diagonal().array() += c;
  return tape_of(a).record(std::move(v), {a}, [a](const Mat& g, Tape& t) { t.accumulate(a, g); });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b},
                           [a, b](const Mat& g, Tape& t) {
                             if (a.needs_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
                             if (b.needs_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
                           });
}

Var add_cols(const Var& m, const Var& b) {
  if (b.cols() != 1 || b.rows() != m.rows()) throw ArgumentError("ad::add_cols: bias shape");
  Mat v = m.value();
  v.colwise() += b.value().col(0);
  return tape_of(m).record(std::move(v), {m, b}, [m, b](const Mat& g, Tape& t) {
    t.accumulate(m, g);
    if (b.needs_grad()) t.accumulate(b, g.rowwise().sum());
  });
}

Var transpose(const Var& a) {
  return tape_of(a).record(a.value().transpose(), {a},
                           [a](const Mat& g, Tape& t) { t.accumulate(a, g.transpose()); });
}

Var block(const Var& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
          Eigen::Index cols) {
  if (row < 0 || col < 0 || row + rows > a.rows() || col + cols > a.cols()) {
    throw ArgumentError("ad::block: out of range");
  }
  const Eigen::Index ar = a.rows();
  const Eigen::Index ac = a.cols();
  return tape_of(a).record(a.value().block(row, col, rows, cols), {a},
                           [a, row, col, rows, cols, ar, ac](const Mat& g, Tape& t) {
                             Mat full = Mat::Zero(ar, ac);
                             full.block(row, col, rows, cols) = g;
                             t.accumulate(a, full);
                           });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("ad::hcat: no parts");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ArgumentError("ad::hcat: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return tape_of(parts.front()).record(std::move(v), parts, [parts](const Mat& g, Tape& t) {
    Eigen::Index off = 0;
    for (const Var& p : parts) {
      if (p.needs_grad()) t.accumulate(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("ad::vcat: no parts");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ArgumentError("ad::vcat: column mismatch");
    rows += p.rows();
  }
  Mat v(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return tape_of(parts.front()).record(std::move(v), parts, [parts](const Mat& g, Tape& t) {
    Eigen::Index off = 0;
    for (const Var& p : parts) {
      if (p.needs_grad()) t.accumulate(p, g.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

Var reshape_segment(const Var& flat, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  if (flat.cols() != 1) throw ArgumentError("ad::reshape_segment: source must be a column");
  if (offset < 0 || offset + rows * cols > flat.rows()) {
    throw ArgumentError("ad::reshape_segment: segment out of range");
  }
  Mat v(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) v(i, j) = flat.value()(offset + i * cols + j, 0);
  const Eigen::Index n = flat.rows();
  return tape_of(flat).record(std::move(v), {flat},
                              [flat, offset, rows, cols, n](const Mat& g, Tape& t) {
                                Mat full = Mat::Zero(n, 1);
                                for (Eigen::Index i = 0; i < rows; ++i)
                                  for (Eigen::Index j = 0; j < cols; ++j)
                                    full(offset + i * cols + j, 0) = g(i, j);
                                t.accumulate(flat, full);
                              });
}

Var cwise(const Var& a, ScalarFn f, ScalarFn df) {
  return tape_of(a).record(a.value().unaryExpr(f), {a}, [a, df](const Mat& g, Tape& t) {
    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(df)));
  });
}

Var cwise_exp(const Var& a) {
  Mat v = a.value().array().exp().matrix();
  Mat vc = v;
  return tape_of(a).record(std::move(v), {a}, [a, vc](const Mat& g, Tape& t) {
    t.accumulate(a, g.cwiseProduct(vc));
  });
}

Var cwise_sqrt(const Var& a) {
  Mat v = a.value().array().sqrt().matrix();
  Mat vc = v;
  return tape_of(a).record(std::move(v), {a}, [a, vc](const Mat& g, Tape& t) {
    t.accumulate(a, (0.5 * g.array() / vc.array()).matrix());
  });
}

Var cwise_inverse(const Var& a) {
  Mat v = a.value().array().inverse().matrix();
  Mat vc = v;
  return tape_of(a).record(std::move(v), {a}, [a, vc](const Mat& g, Tape& t) {
    t.accumulate(a, (-g.array() * vc.array().square()).matrix());
  });
}

Var sum(const Var& a) {
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  return tape_of(a).record(Mat::Constant(1, 1, a.value().sum()), {a},
                           [a, r, c](const Mat& g, Tape& t) {
                             t.accumulate(a, Mat::Constant(r, c, g(0, 0)));
                           });
}

Var sum_squares(const Var& a) {
  return tape_of(a).record(Mat::Constant(1, 1, a.value().squaredNorm()), {a},
                           [a](const Mat& g, Tape& t) {
                             t.accumulate(a, 2.0 * g(0, 0) * a.value());
                           });
}

Var diag_vec(const Var& a) {
  if (a.rows() != a.cols()) throw ArgumentError("ad::diag_vec: matrix must be square");
  return tape_of(a).record(a.value().diagonal(), {a}, [a](const Mat& g, Tape& t) {
    Mat full = Mat::Zero(a.rows(), a.cols());
    full.diagonal() = g.col(0);
    t.accumulate(a, full);
  });
}

Var diag_mat(const Var& v) {
  if (v.cols() != 1) throw ArgumentError("ad::diag_mat: expects a column");
  Mat d = v.value().col(0).asDiagonal();
  return tape_of(v).record(std::move(d), {v},
                           [v](const Mat& g, Tape& t) { t.accumulate(v, g.diagonal()); });
}

Var scale_rows(const Var& v, const Var& m) {
  if (v.cols() != 1 || v.rows() != m.rows()) throw ArgumentError("ad::scale_rows: shape");
  Mat out = v.value().col(0).asDiagonal() * m.value();
  return tape_of(m).record(std::move(out), {v, m}, [v, m](const Mat& g, Tape& t) {
    if (v.needs_grad()) t.accumulate(v, g.cwiseProduct(m.value()).rowwise().sum());
    if (m.needs_grad()) t.accumulate(m, v.value().col(0).asDiagonal() * g);
  });
}

Var strict_lower(const Var& a) {
  Mat v = a.value().triangularView<Eigen::StrictlyLower>();
  return tape_of(a).record(std::move(v), {a}, [a](const Mat& g, Tape& t) {
    t.accumulate(a, Mat(g.triangularView<Eigen::StrictlyLower>()));
  });
}

Var cholesky_upper(const Var& s) {
  if (s.rows() != s.cols()) throw ArgumentError("ad::cholesky_upper: matrix must be square");
  const Eigen::Index k = s.rows();
  if (k == 0) return tape_of(s).record(Mat(0, 0), {s}, [](const Mat&, Tape&) {});
  const Mat sym = 0.5 * (s.value() + s.value().transpose());
  Eigen::LLT<Mat> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("ad::cholesky_upper: matrix is not positive definite");
  }
  Mat L = llt.matrixL();
  Mat R = L.transpose();
  return tape_of(s).record(std::move(R), {s}, [s, L](const Mat& g, Tape& t) {
    // S = L L^T, Lbar = Rbar^T; Sbar = L^{-T} Phi(L^T Lbar) L^{-1}, then symmetrized.
    const Mat Lbar = g.transpose();
    Mat phi = (L.transpose() * Lbar).triangularView<Eigen::Lower>();
    phi.diagonal() *= 0.5;
    const auto Lt = L.triangularView<Eigen::Lower>();
    Mat tmp = Lt.transpose().solve(phi);                              // L^{-T} phi
    Mat sbar = Lt.transpose().solve(tmp.transpose()).transpose();     // (...) L^{-1}
    t.accumulate(s, 0.5 * (sbar + sbar.transpose()));
  });
}

Var solve(const Var& a, const Var& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) throw ArgumentError("ad::solve: shape");
  if (a.rows() == 0) {
    return tape_of(a).record(Mat(0, b.cols()), {a, b}, [](const Mat&, Tape&) {});
  }
  Eigen::PartialPivLU<Mat> lu(a.value());
  Mat x = lu.solve(b.value());
  if (!x.allFinite()) throw NumericalError("ad::solve: singular system");
  Mat xc = x;
  return tape_of(a).record(std::move(x), {a, b}, [a, b, lu, xc](const Mat& g, Tape& t) {
    const Mat bbar = lu.transpose().solve(g);
    if (b.needs_grad()) t.accumulate(b, bbar);
    if (a.needs_grad()) t.accumulate(a, -bbar * xc.transpose());
  });
}

Var spectral_norm(const Var& a) {
  if (a.rows() == 0 || a.cols() == 0) {
    return tape_of(a).record(Mat::Zero(1, 1), {a}, [](const Mat&, Tape&) {});
  }
  Eigen::JacobiSVD<Mat> svd(a.value(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double s = svd.singularValues()(0);
  Mat outer = svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
  return tape_of(a).record(Mat::Constant(1, 1, s), {a}, [a, outer](const Mat& g, Tape& t) {
    t.accumulate(a, g(0, 0) * outer);
  });
}

}  // namespace bilipren::ad
