#pragma once

#include <Eigen/Dense>

namespace bilipren {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Maximum absolute asymmetry tolerated by the symmetric routines.
inline constexpr double kSymmetryTol = 1e-10;

/// Orthogonal matrix from an unconstrained square block:
/// Q = (I + Z)(I - Z)^{-1} with Z = J^T - J.
Mat cayley(const Mat& J);

/// Smallest eigenvalue of a symmetric matrix. Throws ArgumentError if the
/// largest entry of |S - S^T| exceeds kSymmetryTol. The symmetrized matrix
/// is what gets decomposed.
double min_eig_sym(const Mat& S);

/// Largest eigenvalue, same contract as min_eig_sym.
double max_eig_sym(const Mat& S);

struct SingularExtremes {
  double min = 0.0;
  double max = 0.0;
};

/// Extreme singular values over the min(rows, cols) singular values of M.
/// An empty matrix yields {0, 0}.
SingularExtremes sv_extremes(const Mat& M);

/// True iff min_eig_sym(S) > tol.
bool is_posdef(const Mat& S, double tol);

/// Largest element of |S - S^T|.
double asymmetry(const Mat& S);

bool all_finite(const Mat& M);

}  // namespace bilipren
