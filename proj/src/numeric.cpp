#include "bilipren/numeric.hpp"

#include <string>

#include "bilipren/errors.hpp"

namespace bilipren {

Mat cayley(const Mat& J) {
  if (J.rows() != J.cols()) {
    throw ArgumentError("cayley: J must be square, got " + std::to_string(J.rows()) + "x" +
                        std::to_string(J.cols()));
  }
  const auto k = J.rows();
  const Mat Z = J.transpose() - J;
  const Mat I = Mat::Identity(k, k);
  // (I + Z) and (I - Z)^{-1} commute, so a left solve gives the same Q.
  return (I - Z).partialPivLu().solve(I + Z);
}

double asymmetry(const Mat& S) {
  if (S.size() == 0) return 0.0;
  return (S - S.transpose()).cwiseAbs().maxCoeff();
}

namespace {

Vec sym_eigenvalues(const Mat& S, const char* who) {
  if (S.rows() != S.cols()) {
    throw ArgumentError(std::string(who) + ": matrix must be square");
  }
  if (S.size() == 0) {
    throw ArgumentError(std::string(who) + ": empty matrix has no eigenvalues");
  }
  const double asym = asymmetry(S);
  if (!(asym <= kSymmetryTol)) {
    throw ArgumentError(std::string(who) + ": matrix not symmetric (max mismatch " +
                        std::to_string(asym) + ")");
  }
  const Mat sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

double min_eig_sym(const Mat& S) { return sym_eigenvalues(S, "min_eig_sym").minCoeff(); }

double max_eig_sym(const Mat& S) { return sym_eigenvalues(S, "max_eig_sym").maxCoeff(); }

SingularExtremes sv_extremes(const Mat& M) {
  if (M.size() == 0) return {};
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  return {s.minCoeff(), s.maxCoeff()};
}

bool is_posdef(const Mat& S, double tol) { return min_eig_sym(S) > tol; }

bool all_finite(const Mat& M) { return M.allFinite(); }

}  // namespace bilipren
