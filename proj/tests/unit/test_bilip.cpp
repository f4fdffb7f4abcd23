#include <random>

#include "doctest.h"

#include "bilipren/bilip.hpp"
#include "bilipren/errors.hpp"

using namespace bilipren;

namespace {

Vec random_vec(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

// Incremental dissipation evaluated from the state-space equations, for the
// increment (x, w, u) with v = C1 x + D11 w + D12 u.
double dissipation(const RenWeights& W, const Mat& P, const Vec& lam, double mu, double nu,
                   double abar, const Vec& x, const Vec& w, const Vec& u) {
  const double xi = 2 * mu * nu / (mu + nu);
  const double rho = 2 / (mu + nu);
  const Vec xn = W.A * x + W.B1 * w + W.B2 * u;
  const Vec v = W.C1 * x + W.D11 * w + W.D12 * u;
  const Vec y = W.C2 * x + W.D21 * w + W.D22 * u;
  return abar * abar * x.dot(P * x) - xn.dot(P * xn) + 2 * w.dot(lam.cwiseProduct(w - v)) +
         2 * u.dot(y) - xi * u.squaredNorm() - rho * y.squaredNorm();
}

RenWeights scalar_feedthrough(double d) {
  RenWeights w = RenWeights::zeros({0, 0, 1});
  w.D22(0, 0) = d;
  return w;
}

}  // namespace

TEST_CASE("supply constants") {
  const SupplyConstants a = supply_constants(0.1, 5.0);
  CHECK(a.xi == doctest::Approx(0.196078).epsilon(1e-6));
  CHECK(a.rho == doctest::Approx(0.392157).epsilon(1e-6));
  const SupplyConstants b = supply_constants(1.0, 1.0);
  CHECK(b.xi == 1.0);
  CHECK(b.rho == 1.0);
  const SupplyConstants c = supply_constants(0.5, 2.0);
  CHECK(c.xi == doctest::Approx(0.8));
  CHECK(c.rho == doctest::Approx(0.8));
  CHECK(c.xi * c.rho < 1.0);
  CHECK_THROWS_AS(supply_constants(2.0, 1.0), ArgumentError);
}

TEST_CASE("d22 from the ball") {
  CHECK((d22_from_ball(Mat::Zero(2, 2), 0.1, 5.0, 0.99) - 2.55 * Mat::Identity(2, 2)).norm() <
        1e-14);
  const double hi = d22_from_ball(Mat::Constant(1, 1, 1e12), 0.1, 5.0, 1.0 - 1e-12)(0, 0);
  const double lo = d22_from_ball(Mat::Constant(1, 1, -1e12), 0.1, 5.0, 1.0 - 1e-12)(0, 0);
  CHECK(hi == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(lo == doctest::Approx(0.1).epsilon(1e-9));
  std::mt19937_64 rng(3);
  const Mat N = random_vec(9, rng, 5.0).reshaped(3, 3);
  CHECK((d22_from_ball(N, 1.0, 1.0, 0.99) - Mat::Identity(3, 3)).norm() < 1e-15);
}

TEST_CASE("lmi matrix agrees with the dissipation form") {
  BiLipHyper h;
  h.dims = {4, 8, 2};
  h.mu = 0.5;
  h.nu = 2.0;
  std::mt19937_64 rng(7);
  const Eigen::Index k = h.dims.n + h.dims.q + h.dims.m;
  for (int trial = 0; trial < 5; ++trial) {
    const Vec theta = random_vec(ThetaLayout::bilipschitz(h.dims).size(), rng);
    const ParameterizedRen p = direct_parameterize(theta, h);
    const Certificate& c = p.certificate;
    const Mat M = lmi_matrix(p.weights, c.P, c.Lambda(), h.mu, h.nu, h.alpha_bar);
    for (int s = 0; s < 20; ++s) {
      const Vec z = random_vec(k, rng);
      const double oracle = dissipation(p.weights, c.P, c.lambda, h.mu, h.nu, h.alpha_bar,
                                        z.head(4), z.segment(4, 8), z.tail(2));
      CHECK(z.dot(M * z) == doctest::Approx(oracle).epsilon(1e-10));
      CHECK(oracle >= c.lmi_min_eig * z.squaredNorm() * (1 - 1e-9));
    }
  }
}

TEST_CASE("direct parameterization is total") {
  BiLipHyper h;
  h.dims = {4, 8, 2};
  h.mu = 0.5;
  h.nu = 2.0;
  const Eigen::Index size = ThetaLayout::bilipschitz(h.dims).size();
  std::mt19937_64 rng(1);
  for (double scale : {0.0, 0.1, 1.0, 10.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      const ParameterizedRen p = direct_parameterize(random_vec(size, rng, scale), h);
      const Certificate& c = p.certificate;
      CHECK(p.weights.acyclic);
      CHECK(verify_lmi(p.weights, c.P, c.Lambda(), h.mu, h.nu, h.alpha_bar) > 0.0);
      CHECK(c.lmi_min_eig >= 2 * h.eps * (1 - 1e-6));
      CHECK(c.kappa >= 1.0);
      CHECK(c.lambda.minCoeff() > 0.0);
    }
  }
  CHECK_THROWS_AS(direct_parameterize(Vec::Zero(size + 1), h), ArgumentError);
}

TEST_CASE("scalar feedthrough lies strictly inside the interval") {
  BiLipHyper h;
  h.dims = {0, 0, 1};
  h.mu = 0.1;
  h.nu = 5.0;
  for (double t : {-100.0, -1.0, 0.0, 1.0, 100.0}) {
    const double d = direct_parameterize(Vec(Eigen::Vector2d(t, 0.0)), h).weights.D22(0, 0);
    CHECK(d > h.mu);
    CHECK(d < h.nu);
  }
}

TEST_CASE("verify_lmi scalar cases") {
  const Mat none(0, 0);
  CHECK(verify_lmi(scalar_feedthrough(6.0), none, none, 0.1, 5.0, 0.9) < 0.0);
  CHECK(verify_lmi(scalar_feedthrough(1.0), none, none, 0.1, 5.0, 0.9) > 0.0);
  CHECK(verify_lmi(scalar_feedthrough(1.0), none, none, 1.0, 1.0, 0.9) <= 0.0);
  for (double d = -1.0; d < 3.0; d += 0.01) {
    const double e = verify_lmi(scalar_feedthrough(d), none, none, 0.5, 2.0, 0.9);
    CHECK(e == doctest::Approx(-0.8 + 2 * d - 0.8 * d * d).epsilon(1e-12));
  }
}

TEST_CASE("contracting parameterization satisfies its LMI") {
  ContractingHyper h;
  h.dims = {5, 7, 2};
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec theta = random_vec(ThetaLayout::contracting(h.dims).size(), rng, trial < 5 ? 0.3 : 3.0);
    const ParameterizedRen p = contracting_parameterize(theta, h);
    CHECK(verify_contraction_lmi(p.weights, p.certificate.P, p.certificate.Lambda(), h.alpha_bar) >
          0.0);
  }
}

TEST_CASE("invert_ren hand example") {
  RenWeights w = RenWeights::zeros({2, 2, 1});
  w.A << 0.5, 0.1, 0.0, 0.3;
  w.B1 << 1.0, 0.0, 0.5, 2.0;
  w.B2 << 1.0, -1.0;
  w.D22(0, 0) = 2.0;
  w.by(0) = 1.0;
  const RenWeights h = invert_ren(w);
  CHECK(h.D22(0, 0) == doctest::Approx(0.5));
  CHECK(h.by(0) == doctest::Approx(-0.5));
  CHECK((h.A - w.A).norm() == 0.0);
  CHECK((h.B1 - w.B1).norm() == 0.0);
  CHECK(h.acyclic);
}

TEST_CASE("invert_ren is an involution") {
  BiLipHyper h;
  h.dims = {3, 6, 2};
  std::mt19937_64 rng(9);
  const ParameterizedRen p =
      direct_parameterize(random_vec(ThetaLayout::bilipschitz(h.dims).size(), rng), h);
  const RenWeights twice = invert_ren(invert_ren(p.weights));
  const RenWeights& w = p.weights;
  double err = 0.0;
  for (const auto& [a, b] : {std::pair{&twice.A, &w.A}, {&twice.B1, &w.B1}, {&twice.B2, &w.B2},
                             {&twice.C1, &w.C1}, {&twice.D11, &w.D11}, {&twice.D12, &w.D12},
                             {&twice.C2, &w.C2}, {&twice.D21, &w.D21}, {&twice.D22, &w.D22}}) {
    err = std::max(err, (*a - *b).cwiseAbs().maxCoeff());
  }
  err = std::max({err, (twice.bx - w.bx).cwiseAbs().maxCoeff(),
                  (twice.bv - w.bv).cwiseAbs().maxCoeff(), (twice.by - w.by).cwiseAbs().maxCoeff()});
  CHECK(err < 1e-10);
}

TEST_CASE("inverse D11 stays strictly lower when D21 = 0") {
  BiLipHyper h;
  h.dims = {2, 4, 2};
  std::mt19937_64 rng(2);
  RenWeights w = direct_parameterize(random_vec(ThetaLayout::bilipschitz(h.dims).size(), rng), h).weights;
  w.D21.setZero();
  const RenWeights inv = invert_ren(w);
  CHECK(inv.acyclic);
  CHECK(inv.D11.triangularView<Eigen::Upper>().toDenseMatrix().norm() == 0.0);
}

TEST_CASE("invert_ren rejects singular feedthrough") {
  RenWeights w = RenWeights::zeros({1, 1, 2});
  w.D22 << 1.0, 2.0, 2.0, 4.0;
  CHECK_THROWS_AS(invert_ren(w), InversionError);
}

TEST_CASE("inverse certificate holds with the swapped bounds") {
  BiLipHyper h;
  h.dims = {4, 8, 2};
  h.mu = 0.1;
  h.nu = 5.0;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const ParameterizedRen p =
        direct_parameterize(random_vec(ThetaLayout::bilipschitz(h.dims).size(), rng), h);
    CHECK(verify_inverse_lmi(p.weights, p.certificate) > 0.0);
  }
}

TEST_CASE("overshoot from the metric") {
  CHECK(overshoot_from_metric(Mat::Identity(3, 3)) == doctest::Approx(1.0));
  CHECK(overshoot_from_metric(Eigen::Vector2d(9.0, 1.0).asDiagonal().toDenseMatrix()) ==
        doctest::Approx(3.0));
  CHECK(overshoot_from_metric(Eigen::Vector2d(9.2, 1.0).asDiagonal().toDenseMatrix()) ==
        doctest::Approx(3.03).epsilon(1e-3));
  CHECK_THROWS_AS(overshoot_from_metric(-Mat::Identity(2, 2)), ArgumentError);
}

TEST_CASE("hyperparameter validation") {
  BiLipHyper h;
  h.dims = {2, 2, 1};
  h.mu = 3.0;
  h.nu = 2.0;
  CHECK_THROWS_AS(h.validate(), ArgumentError);
  h.mu = 0.5;
  h.alpha_bar = 1.0;
  CHECK_THROWS_AS(h.validate(), ArgumentError);
}
