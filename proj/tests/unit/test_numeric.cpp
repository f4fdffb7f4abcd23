#include <random>

#include "doctest.h"

#include "bilipren/errors.hpp"
#include "bilipren/numeric.hpp"

using namespace bilipren;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = n(rng);
  return M;
}

}  // namespace

TEST_CASE("cayley of zero is the identity") {
  CHECK((cayley(Mat::Zero(2, 2)) - Mat::Identity(2, 2)).norm() == doctest::Approx(0.0));
}

TEST_CASE("cayley 2x2 hand value") {
  Mat J(2, 2);
  J << 0, 1, -1, 0;
  Mat expected(2, 2);
  expected << -3, -4, 4, -3;
  expected /= 5.0;
  CHECK((cayley(J) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cayley output is orthogonal") {
  for (unsigned s = 0; s < 10; ++s) {
    const Mat Q = cayley(random_mat(5, 5, s));
    CHECK((Q.transpose() * Q - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("cayley rejects non-square input") {
  CHECK_THROWS_AS(cayley(Mat::Zero(2, 3)), ArgumentError);
}

TEST_CASE("min_eig_sym examples") {
  CHECK(min_eig_sym(Mat::Identity(3, 3)) == doctest::Approx(1.0));
  Mat S(2, 2);
  S << 1, 2, 2, 1;
  CHECK(min_eig_sym(S) == doctest::Approx(-1.0));
  CHECK(max_eig_sym(S) == doctest::Approx(3.0));
  CHECK(min_eig_sym(Vec(Eigen::Vector2d(0.5, 4.0)).asDiagonal().toDenseMatrix()) ==
        doctest::Approx(0.5));
}

TEST_CASE("min_eig_sym rejects asymmetric input") {
  Mat S(2, 2);
  S << 1, 2, 2.001, 1;
  CHECK_THROWS_AS(min_eig_sym(S), ArgumentError);
  CHECK(asymmetry(S) == doctest::Approx(0.001));
}

TEST_CASE("sv_extremes examples") {
  const SingularExtremes d = sv_extremes(Eigen::Vector2d(2.0, 0.5).asDiagonal().toDenseMatrix());
  CHECK(d.min == doctest::Approx(0.5));
  CHECK(d.max == doctest::Approx(2.0));
  const SingularExtremes q = sv_extremes(cayley(random_mat(4, 4, 3)));
  CHECK(q.min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.max == doctest::Approx(1.0).epsilon(1e-12));
  const SingularExtremes z = sv_extremes(Mat::Zero(2, 2));
  CHECK(z.min == 0.0);
  CHECK(z.max == 0.0);
}

TEST_CASE("is_posdef uses a strict margin") {
  CHECK(is_posdef(Mat::Identity(3, 3), 0.0));
  Mat S(2, 2);
  S << 1, 2, 2, 1;
  CHECK_FALSE(is_posdef(S, 0.0));
  CHECK_FALSE(is_posdef(1e-8 * Mat::Identity(2, 2), 1e-6));
}

TEST_CASE("all_finite") {
  Mat M = Mat::Ones(2, 2);
  CHECK(all_finite(M));
  M(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(M));
}
