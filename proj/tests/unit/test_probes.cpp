#include <cmath>

#include "doctest.h"

#include "bilipren/errors.hpp"
#include "bilipren/probes.hpp"
#include "support.hpp"

using namespace bilipren;
using testing_support::random_mat;
using testing_support::random_sandwich;
using testing_support::random_vec;

TEST_CASE("static orthogonal map has unit ratios") {
  const StaticOrtho s = make_static(random_mat(3, 3, 1), random_vec(3, 2));
  const RatioInterval r =
      empirical_bilip_probe([&](const Mat& u) { return static_forward_seq(s, u); }, 3, 50, 20, 3);
  CHECK(r.ratio_min == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.ratio_max == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("scalar gain map") {
  const RatioInterval r = empirical_bilip_probe([](const Mat& u) { return Mat(2.5 * u); }, 1, 20, 10, 4);
  CHECK(r.ratio_min == doctest::Approx(2.5));
  CHECK(r.ratio_max == doctest::Approx(2.5));
}

TEST_CASE("certified model ratios lie within its bounds") {
  const SandwichModel s = random_sandwich(1, {4, 8, 2}, 0.5, 2.0, Activation::kRelu, 5, 2.0);
  const RatioInterval r = empirical_bilip_probe(
      [&](const Mat& u) { return sandwich_forward(s, s.zero_states(), u); }, 2, 50, 40, 6);
  CHECK(r.ratio_min >= 0.5 - 1e-6);
  CHECK(r.ratio_max <= 2.0 + 1e-6);
}

TEST_CASE("contraction probe") {
  RenModel lin;
  lin.weights = RenWeights::zeros({1, 0, 1});
  lin.weights.A(0, 0) = 0.5;
  const Mat u = random_mat(30, 1, 7);
  const ContractionFit f = contraction_probe(lin, Vec::Constant(1, 1.0), Vec::Constant(1, -2.0), u);
  CHECK(f.defined);
  CHECK(f.rate == doctest::Approx(0.5).epsilon(1e-10));
  CHECK_FALSE(contraction_probe(lin, Vec::Constant(1, 1.0), Vec::Constant(1, 1.0), u).defined);

  const SandwichModel s = random_sandwich(1, {5, 8, 1}, 0.5, 2.0, Activation::kTanh, 8);
  const ContractionFit g =
      contraction_probe(s.blocks[0].model, random_vec(5, 9, 3.0), random_vec(5, 10, 3.0),
                        random_mat(100, 1, 11));
  CHECK(g.rate <= 0.9 + 0.02);
}

TEST_CASE("output gains of a linear output map") {
  RenModel m;
  m.weights = RenWeights::zeros({3, 0, 2});
  m.weights.C2 << 1.0, 2.0, 0.0, 0.0, 1.0, -1.0;
  const OutputGains g = output_layer_bilip(m, random_mat(5, 3, 12), random_mat(5, 2, 13));
  const SingularExtremes sv = sv_extremes(m.weights.C2);
  CHECK(g.gamma_min == doctest::Approx(sv.min).epsilon(1e-8));
  CHECK(g.gamma_max == doctest::Approx(sv.max).epsilon(1e-8));
  CHECK_FALSE(g.x_independent);

  RenModel f;
  f.weights = RenWeights::zeros({3, 2, 2});
  f.weights.D22 = Mat::Identity(2, 2);
  const OutputGains z = output_layer_bilip(f, random_mat(5, 3, 14), random_mat(5, 2, 15));
  CHECK(z.gamma_max == 0.0);
  CHECK(z.x_independent);
}

TEST_CASE("denser sampling widens the output gain interval") {
  const SandwichModel s = random_sandwich(1, {4, 6, 2}, 0.5, 2.0, Activation::kTanh, 16, 2.0);
  const Mat X = random_mat(40, 4, 17), U = random_mat(40, 2, 18);
  const OutputGains sparse = output_layer_bilip(s.blocks[0].model, X.topRows(10), U.topRows(10));
  const OutputGains dense = output_layer_bilip(s.blocks[0].model, X, U);
  CHECK(dense.gamma_min <= sparse.gamma_min);
  CHECK(dense.gamma_max >= sparse.gamma_max);
}

TEST_CASE("bound constant arithmetic with the reported constants") {
  BoundConstants c;
  c.kappa1 = 3.03;
  c.gamma2 = 6.54;
  c.mu = 0.1;
  c.alpha1 = 0.9;
  CHECK(c.input_state_gain() == doctest::Approx(454.6).epsilon(1e-4));
  CHECK(0.1 * c.input_state_gain() == doctest::Approx(45.46).epsilon(1e-4));
}

TEST_CASE("exact inversion gives a near-zero curve") {
  const SandwichModel s = random_sandwich(1, {3, 6, 1}, 0.5, 2.0, Activation::kTanh, 19);
  const Mat u = random_mat(50, 1, 20);
  const OutputGains g = output_layer_bilip(s.blocks[0].model, u, 20, 21);
  const BoundConstants bc = bound_constants(s, g);
  const Vec a = random_vec(3, 22);
  const BoundReport rep = reconstruction_error_curve(s, u, Mat::Zero(50, 1), a, a, bc);
  REQUIRE(rep.measured.size() == 50);
  for (double e : rep.measured) CHECK(e <= 1e-8);
}

TEST_CASE("projection onto the ball") {
  const Mat v = Eigen::Vector2d(2.0, 0.0);
  CHECK(project_ball(v, 1.0).norm() == doctest::Approx(1.0));
  CHECK(project_ball(v, 3.0) == v);
}

TEST_CASE("pgd") {
  const SandwichModel s = random_sandwich(1, {3, 6, 1}, 0.5, 2.0, Activation::kTanh, 23);
  const Mat u = random_mat(30, 1, 24);
  const Vec a = Vec::Zero(3);
  const BoundConstants bc = bound_constants(s, output_layer_bilip(s.blocks[0].model, u, 20, 25));
  PgdConfig cfg;
  cfg.steps = 0;
  cfg.restarts = 1;
  const PgdResult none = pgd_worst_case(s, cfg, u, a, bc);
  CHECK(none.error == doctest::Approx(inversion_error(s, none.u, none.delta_u, a, none.b)));
  CHECK((none.u - u).norm() == 0.0);

  cfg.steps = 40;
  cfg.restarts = 3;
  const PgdResult best = pgd_worst_case(s, cfg, u, a, bc);
  CHECK(best.delta_u.norm() <= cfg.pert_radius * (1 + 1e-12));
  CHECK((best.b - a).norm() <= cfg.init_radius * (1 + 1e-12));
  CHECK(best.error >= random_probe_max(s, cfg, u, a, 100));
  CHECK(best.error <= best.theoretical);
}

TEST_CASE("cross-correlation lag") {
  const Mat a = random_mat(200, 1, 31);
  Mat b = Mat::Zero(200, 1);
  b.bottomRows(193) = a.topRows(193);
  CHECK(cross_correlation_lag(a, b, 20) == 7);
  CHECK(cross_correlation_lag(b, a, 20) == -7);
  CHECK(cross_correlation_lag(a, a, 0) == 0);
  CHECK_THROWS_AS(cross_correlation_lag(a, Mat::Zero(200, 2), 3), ArgumentError);
}
