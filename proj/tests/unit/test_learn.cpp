#include <cmath>

#include "doctest.h"

#include "bilipren/errors.hpp"
#include "bilipren/learn.hpp"
#include "support.hpp"

using namespace bilipren;
using testing_support::random_mat;
using testing_support::random_vec;

namespace {

Dataset dataset_from(const Model& model, int batches, Eigen::Index T, std::uint64_t seed) {
  Dataset d;
  for (int b = 0; b < batches; ++b) {
    Batch bt;
    bt.u = random_mat(T, model.width(), seed + static_cast<std::uint64_t>(b));
    bt.y = model.simulate(bt.u);
    d.batches.push_back(bt);
  }
  return d;
}

Architecture small_arch(Activation act) {
  Architecture a;
  a.dims = {2, 3, 1};
  a.depth = 2;
  a.mu = 0.5;
  a.nu = 2.0;
  a.act = act;
  return a;
}

}  // namespace

TEST_CASE("l2 loss and nse on exact and offset predictions") {
  const Architecture a = small_arch(Activation::kTanh);
  const Model model = build_model(a, init_theta(a, 1, 0.5));
  Dataset d = dataset_from(model, 3, 20, 2);
  CHECK(l2_loss(model, d.batches) == 0.0);
  CHECK(nse(model, d.batches) == 0.0);

  for (Batch& b : d.batches) b.y.array() += 0.25;
  CHECK(l2_loss(model, d.batches) == doctest::Approx(0.0625 * 3 * 20).epsilon(1e-10));

  std::vector<Mat> zero, scaled;
  for (const Batch& b : d.batches) {
    zero.push_back(Mat::Zero(b.y.rows(), b.y.cols()));
    scaled.push_back(1.1 * b.y);
  }
  CHECK(nse(zero, d.batches) == doctest::Approx(1.0));
  CHECK(nse(scaled, d.batches) == doctest::Approx(0.1));
  CHECK_THROWS_AS(nse(std::vector<Mat>{}, d.batches), ArgumentError);
}

TEST_CASE("l2 loss golden value") {
  const Architecture a = small_arch(Activation::kRelu);
  const Model model = build_model(a, init_theta(a, 3, 0.5));
  Dataset d;
  d.batches.push_back({random_mat(30, 1, 4), random_mat(30, 1, 5)});
  CHECK(l2_loss(model, d.batches) == doctest::Approx(81.70296241156214).epsilon(1e-12));
}

TEST_CASE("zero residual gives zero gradient") {
  const Architecture a = small_arch(Activation::kTanh);
  const Vec theta = init_theta(a, 6, 0.5);
  const Dataset d = dataset_from(build_model(a, theta), 2, 15, 7);
  const LossAndGradient lg = loss_and_gradient(a, theta, d.batches);
  CHECK(lg.loss == 0.0);
  CHECK(lg.grad.norm() == 0.0);
}

TEST_CASE("static scalar model matches the analytic gradient") {
  // n = q = 0, m = 1, fixed orthogonal layers: y = D22(N) u + by with
  // D22 = c (1 + r k N / (|N| + 1)).
  Architecture a;
  a.dims = {0, 0, 1};
  a.mu = 0.5;
  a.nu = 2.0;
  a.learn_ortho = false;
  REQUIRE(a.theta_size() == 2);
  const Vec theta = Eigen::Vector2d(0.7, -0.2);
  Dataset d;
  d.batches.push_back({random_mat(25, 1, 8), random_mat(25, 1, 9)});
  const double c = 0.5 * (a.mu + a.nu), r = (a.nu - a.mu) / (a.mu + a.nu), k = a.d22_margin;
  const double N = theta(0), by = theta(1);
  const double D22 = c * (1 + r * k * N / (N + 1));
  const Mat res = D22 * d.batches[0].u.array() + by - d.batches[0].y.array();
  const double g_by = 2 * res.sum();
  const double g_N = 2 * (res.array() * d.batches[0].u.array()).sum() * c * r * k / ((N + 1) * (N + 1));
  const LossAndGradient lg = loss_and_gradient(a, theta, d.batches);
  CHECK(lg.loss == doctest::Approx(res.squaredNorm()).epsilon(1e-12));
  CHECK(lg.grad(0) == doctest::Approx(g_N).epsilon(1e-10));
  CHECK(lg.grad(1) == doctest::Approx(g_by).epsilon(1e-10));
}

TEST_CASE("reverse mode agrees with central differences") {
  for (BlockKind kind : {BlockKind::kBiLipschitz, BlockKind::kContracting}) {
    Architecture a = small_arch(Activation::kTanh);
    a.kind = kind;
    a.inner_states = 2;
    const Vec theta = init_theta(a, 10, 0.5, 0.5);
    Dataset d;
    d.batches.push_back({random_mat(12, 1, 11), random_mat(12, 1, 12)});
    const Vec g = loss_and_gradient(a, theta, d.batches).grad;
    std::vector<Eigen::Index> coords;
    for (Eigen::Index i = 0; i < theta.size(); i += 5) coords.push_back(i);
    const Vec fd = fd_gradient(a, theta, d.batches, 1e-6, coords);
    for (Eigen::Index i : coords) {
      CHECK(std::abs(g(i) - fd(i)) <= 1e-4 * std::max(1.0, std::abs(fd(i))));
    }
  }
}

TEST_CASE("training reduces the loss on an identifiable linear plant") {
  Architecture a = small_arch(Activation::kTanh);
  a.depth = 1;
  Dataset d;
  for (std::uint64_t b = 0; b < 4; ++b) {
    Batch bt;
    bt.u = random_mat(40, 1, 20 + b);
    bt.y = Mat::Zero(40, 1);
    double y = 0.0;
    for (Eigen::Index t = 0; t < 40; ++t) {
      y = 0.5 * y + bt.u(t, 0);
      bt.y(t, 0) = y;
    }
    d.batches.push_back(bt);
  }
  TrainConfig cfg;
  cfg.optimizer = Optimizer::kAdam;
  cfg.learning_rate = 0.02;
  cfg.steps = 300;
  const TrainResult r = train(a, init_theta(a, 1), d, cfg);
  CHECK(r.history.back() <= 0.1 * r.history.front());
  for (const Checkpoint& c : r.checkpoints) CHECK(c.min_lmi_eig > 0.0);
  CHECK(min_block_certificate(r.model) > 0.0);
}

TEST_CASE("gradient descent with step halving never increases the loss") {
  const Architecture a = small_arch(Activation::kRelu);
  const Model target = build_model(a, init_theta(a, 30, 0.8));
  const Dataset d = dataset_from(target, 3, 20, 31);
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.learning_rate = 0.5;
  const TrainResult r = train(a, init_theta(a, 32), d, cfg);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] + 1e-12);
}

TEST_CASE("minibatch training is deterministic per seed") {
  const Architecture a = small_arch(Activation::kTanh);
  const Model target = build_model(a, init_theta(a, 40, 0.8));
  const Dataset d = dataset_from(target, 5, 10, 41);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::kAdam;
  cfg.steps = 15;
  cfg.batch_size = 2;
  cfg.seed = 9;
  const TrainResult r1 = train(a, init_theta(a, 42), d, cfg);
  const TrainResult r2 = train(a, init_theta(a, 42), d, cfg);
  CHECK(r1.history == r2.history);
  cfg.seed = 10;
  CHECK(train(a, init_theta(a, 42), d, cfg).history != r1.history);
}

TEST_CASE("training config validation") {
  TrainConfig cfg;
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  CHECK(optimizer_from_string(to_string(Optimizer::kAdam)) == Optimizer::kAdam);
  CHECK(gradient_mode_from_string(to_string(GradientMode::kCentralDifference)) ==
        GradientMode::kCentralDifference);
}
