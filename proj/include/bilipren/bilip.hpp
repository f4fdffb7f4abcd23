#pragma once

// Bi-Lipschitz RENs: direct parameterization, LMI certificate, closed-form
// inverse.
//
// A REN is (mu, nu)-bi-Lipschitz and contracting with rate alpha_bar when
// there are P = P^T > 0 and a positive diagonal Lambda such that
//
//   M = T - [A B1 B2]^T P [A B1 B2] - rho [C2 D21 D22]^T [C2 D21 D22] > 0,
//
//   T = [[ abar^2 P,   -C1^T Lam,                 C2^T               ],
//        [ -Lam C1,    2 Lam - Lam D11 - D11^T Lam, D21^T - Lam D12    ],
//        [ C2,         D21 - D12^T Lam,            -xi I + D22 + D22^T ]]
//
// with xi = 2 mu nu / (mu + nu) and rho = 2 / (mu + nu). This is the
// incremental dissipation inequality for the supply rate
// 2<dy, du> - xi |du|^2 - rho |dy|^2 together with the slope-[0,1] IQC on
// the neurons.

#include <string>
#include <vector>

#include "bilipren/diffren.hpp"
#include "bilipren/ren.hpp"

namespace bilipren {

struct BiLipHyper {
  double mu = 0.5;
  double nu = 2.0;
  double alpha_bar = 0.9;
  RenDims dims;
  /// Required LMI margin; the construction guarantees min-eig >= 2 eps.
  double eps = 1e-6;
  /// Fraction of the feasible D22 ball that is used (d22_from_ball).
  double d22_margin = 0.99;

  void validate() const;
};

/// Hyperparameters for the contracting (not input-output constrained) REN
/// used as an identification baseline.
struct ContractingHyper {
  double alpha_bar = 0.9;
  RenDims dims;
  double eps = 1e-6;

  void validate() const;
};

struct SupplyConstants {
  double xi = 1.0;
  double rho = 1.0;
};

/// xi = 2 mu nu / (mu + nu), rho = 2 / (mu + nu). Requires 0 < mu <= nu.
SupplyConstants supply_constants(double mu, double nu);

/// D22 = ((mu + nu) / 2) (I + r margin N / (|N|_2 + 1)), r = (nu - mu) / (mu + nu).
/// Guarantees |rho D22 - I|_2 <= margin r.
Mat d22_from_ball(const Mat& N_free, double mu, double nu, double margin);

struct Certificate {
  Mat P;
  Vec lambda;  ///< diagonal of Lambda
  double lmi_min_eig = 0.0;
  double kappa = 1.0;
  double alpha_bar = 0.9;
  double mu = 0.0;
  double nu = 0.0;

  Mat Lambda() const { return lambda.asDiagonal(); }
};

/// Named slice of the flat parameter vector. Matrices are stored row-major.
struct ThetaBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

class ThetaLayout {
 public:
  /// Blocks in order: L (n x n), N (m x m), Cf (m x n), D21 (m x q),
  /// Vx (n x q), Vu (m x q), X (q x q), Z (n x (n+q+m)), bx, bv, by.
  static ThetaLayout bilipschitz(const RenDims& dims);

  /// Blocks in order: L (n x n), Vx (n x q), X (q x q), Z (n x (n+q)),
  /// B2 (n x m), C2 (m x n), D12 (q x m), D21 (m x q), D22 (m x m),
  /// bx, bv, by.
  static ThetaLayout contracting(const RenDims& dims);

  Eigen::Index size() const { return size_; }
  const std::vector<ThetaBlock>& blocks() const { return blocks_; }
  const ThetaBlock& at(const std::string& name) const;

 private:
  void add(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  std::vector<ThetaBlock> blocks_;
  Eigen::Index size_ = 0;
};

struct ParameterizedRen {
  RenWeights weights;
  Certificate certificate;
};

/// Maps any finite theta to acyclic weights satisfying the bi-Lipschitz LMI
/// with min-eig >= 2 eps, together with the (P, Lambda) certificate.
ParameterizedRen direct_parameterize(const Vec& theta, const BiLipHyper& hyper);

/// Maps any finite theta to acyclic weights that satisfy the contraction LMI.
/// The certificate's lmi_min_eig refers to verify_contraction_lmi; mu and nu
/// are left at zero.
ParameterizedRen contracting_parameterize(const Vec& theta, const ContractingHyper& hyper);

/// The block matrix M above (symmetrized).
Mat lmi_matrix(const RenWeights& wts, const Mat& P, const Mat& Lambda, double mu, double nu,
               double alpha_bar);

/// min_eig_sym(lmi_matrix(...)); positive means certified.
double verify_lmi(const RenWeights& wts, const Mat& P, const Mat& Lambda, double mu, double nu,
                  double alpha_bar);

/// Contraction-only LMI over (x, w):
/// [[abar^2 P, -C1^T Lam], [-Lam C1, 2 Lam - Lam D11 - D11^T Lam]] - [A B1]^T P [A B1].
double verify_contraction_lmi(const RenWeights& wts, const Mat& P, const Mat& Lambda,
                              double alpha_bar);

/// Same P and Lambda, inverse weights, bounds (1/nu, 1/mu).
double verify_inverse_lmi(const RenWeights& wts, const Certificate& cert);

/// Recomputes lmi_min_eig and kappa for the given weights.
Certificate recertify(const RenWeights& wts, Certificate cert);

/// Maximum condition number of D22 accepted by invert_ren.
inline constexpr double kMaxFeedthroughCondition = 1e12;

/// REN realization of the inverse map y -> u. Throws InversionError when
/// cond(D22) > kMaxFeedthroughCondition.
RenWeights invert_ren(const RenWeights& wts);

/// sqrt(sigma_max(P) / sigma_min(P)). Throws ArgumentError unless P > 0.
double overshoot_from_metric(const Mat& P);

namespace ad {

struct ParameterizedRenVar {
  RenWeightsVar weights;
  Var P;
  Var lambda;
};

Var d22_from_ball(const Var& N_free, double mu, double nu, double margin);

ParameterizedRenVar direct_parameterize(Tape& tape, const Var& theta, const BiLipHyper& hyper);

ParameterizedRenVar contracting_parameterize(Tape& tape, const Var& theta,
                                             const ContractingHyper& hyper);

}  // namespace ad

}  // namespace bilipren
