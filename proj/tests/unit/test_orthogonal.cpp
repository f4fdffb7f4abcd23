#include "doctest.h"

#include "bilipren/errors.hpp"
#include "bilipren/orthogonal.hpp"
#include "support.hpp"

using namespace bilipren;
using testing_support::random_mat;
using testing_support::random_vec;

namespace {

DynOrtho random_dyn(Eigen::Index p, Eigen::Index m, std::uint64_t seed) {
  return make_dynamic(random_mat(p + m, p + m, seed), p, random_vec(p, seed + 1),
                      random_vec(m, seed + 2));
}

}  // namespace

TEST_CASE("static layer construction") {
  const StaticOrtho id = make_static(Mat::Zero(3, 3), Vec::Zero(3));
  CHECK((id.P - Mat::Identity(3, 3)).norm() == 0.0);
  const StaticOrtho s = make_static(random_mat(4, 4, 1), random_vec(4, 2));
  CHECK((s.P.transpose() * s.P - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(make_static(Mat::Zero(2, 3), Vec::Zero(2)), ArgumentError);
}

TEST_CASE("static layer forward and inverse") {
  const StaticOrtho s = make_static(random_mat(4, 4, 3), random_vec(4, 4));
  CHECK(static_forward(make_static(random_mat(4, 4, 5), Vec::Zero(4)), Vec::Zero(4)).norm() == 0.0);
  for (std::uint64_t k = 0; k < 10; ++k) {
    const Vec u = random_vec(4, 10 + k), v = random_vec(4, 100 + k);
    CHECK((static_inverse(s, static_forward(s, u)) - u).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((static_forward(s, u) - static_forward(s, v)).norm() ==
          doctest::Approx((u - v).norm()).epsilon(1e-12));
  }
  const Mat U = random_mat(7, 4, 6);
  CHECK((static_inverse_seq(s, static_forward_seq(s, U)) - U).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dynamic layer is orthogonal") {
  const DynOrtho d = random_dyn(5, 2, 7);
  const Mat Q = d.Q();
  CHECK((Q.transpose() * Q - Mat::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("dynamic layer basics") {
  DynOrtho z = make_dynamic(Mat::Zero(3, 3), 2, Vec::Zero(2), Vec::Zero(1));
  z.A.setZero();
  z.B.setZero();
  z.C.setZero();
  z.D.setZero();
  CHECK(dyn_forward(z, Vec::Zero(2), random_mat(5, 1, 1)).y.norm() == 0.0);

  const DynOrtho s = make_dynamic(random_mat(3, 3, 2), 0, Vec(), random_vec(3, 3));
  const Mat U = random_mat(6, 3, 4);
  const Mat Y = dyn_forward(s, Vec(), U).y;
  for (Eigen::Index t = 0; t < U.rows(); ++t) {
    CHECK((Y.row(t).transpose() - (s.D * U.row(t).transpose() + s.w)).norm() < 1e-14);
  }
}

TEST_CASE("per-step incremental energy identity") {
  const DynOrtho d = random_dyn(4, 2, 11);
  const int T = 500;
  const Mat u1 = random_mat(T, 2, 12), u2 = random_mat(T, 2, 13);
  const DynTrajectory a = dyn_forward(d, random_vec(4, 14), u1);
  const DynTrajectory b = dyn_forward(d, random_vec(4, 15), u2);
  for (int t = 0; t < T; ++t) {
    const double out = (a.h.row(t + 1) - b.h.row(t + 1)).squaredNorm() +
                       (a.y.row(t) - b.y.row(t)).squaredNorm();
    const double in = (a.h.row(t) - b.h.row(t)).squaredNorm() + (u1.row(t) - u2.row(t)).squaredNorm();
    CHECK(std::abs(out - in) <= 1e-12 * std::max(1.0, in));
  }
}

TEST_CASE("anti-causal inverse") {
  const DynOrtho d = random_dyn(6, 2, 21);
  const Mat u = random_mat(200, 2, 22);
  const DynTrajectory f = dyn_forward(d, random_vec(6, 23), u);
  const Vec hT = f.h.row(200).transpose();
  CHECK((dyn_inverse_anticausal(d, f.y, hT) - u).cwiseAbs().maxCoeff() < 1e-10);

  SUBCASE("zero input with matching biases") {
    const DynOrtho z = make_dynamic(random_mat(8, 8, 24), 6, Vec::Zero(6), random_vec(2, 25));
    Mat y(10, 2);
    for (Eigen::Index t = 0; t < 10; ++t) y.row(t) = z.w.transpose();
    CHECK(dyn_inverse_anticausal(z, y, Vec::Zero(6)).norm() < 1e-14);
  }
  SUBCASE("terminal state error is not amplified") {
    const Vec delta = random_vec(6, 26, 0.3);
    const Mat rec = dyn_inverse_anticausal(d, f.y, hT + delta);
    CHECK((rec - u).norm() <= delta.norm() * (1 + 1e-12));
  }
}
