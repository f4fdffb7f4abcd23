#include "bilipren/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bilipren/errors.hpp"

namespace bilipren {

namespace {

void check_batches(const std::vector<Batch>& batches, Eigen::Index m) {
  if (batches.empty()) throw ArgumentError("no batches");
  for (const Batch& b : batches) {
    if (b.u.rows() != b.y.rows() || b.u.cols() != m || b.y.cols() != m) {
      throw ArgumentError("batch shape does not match the model width");
    }
  }
}

}  // namespace

double l2_loss(const Model& model, const std::vector<Batch>& batches) {
  check_batches(batches, model.width());
  double s = 0.0;
  for (const Batch& b : batches) s += (model.simulate(b.u) - b.y).squaredNorm();
  return s;
}

double nse(const std::vector<Mat>& predictions, const std::vector<Batch>& batches) {
  if (predictions.size() != batches.size() || batches.empty()) {
    throw ArgumentError("nse: prediction count does not match batch count");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const double ny = batches[i].y.norm();
    if (!(ny > 0.0)) throw ArgumentError("nse: target has zero norm");
    if (predictions[i].rows() != batches[i].y.rows() || predictions[i].cols() != batches[i].y.cols()) {
      throw ArgumentError("nse: prediction shape mismatch");
    }
    s += (predictions[i] - batches[i].y).norm() / ny;
  }
  return s / static_cast<double>(batches.size());
}

double nse(const Model& model, const std::vector<Batch>& batches) {
  check_batches(batches, model.width());
  std::vector<Mat> pred;
  pred.reserve(batches.size());
  for (const Batch& b : batches) pred.push_back(model.simulate(b.u));
  return nse(pred, batches);
}

const char* to_string(GradientMode m) {
  return m == GradientMode::kReverse ? "reverse" : "central_difference";
}

const char* to_string(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "gd"; }

GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "reverse") return GradientMode::kReverse;
  if (s == "central_difference") return GradientMode::kCentralDifference;
  throw ArgumentError("unknown gradient mode '" + s + "'");
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "gd") return Optimizer::kGradientDescent;
  if (s == "adam") return Optimizer::kAdam;
  throw ArgumentError("unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("TrainConfig: learning_rate must be positive");
  if (!(fd_step > 0.0)) throw ArgumentError("TrainConfig: fd_step must be positive");
  if (steps < 0 || batch_size < 0) throw ArgumentError("TrainConfig: negative count");
  if (max_halvings < 0 || checkpoint_every < 1) throw ArgumentError("TrainConfig: bad schedule");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("TrainConfig: Adam decay rates must lie in [0, 1)");
  }
}

LossAndGradient loss_and_gradient(const Architecture& arch, const Vec& theta,
                                  const std::vector<Batch>& batches) {
  check_batches(batches, arch.dims.m);
  const Eigen::Index T = batches.front().u.rows();
  for (const Batch& b : batches) {
    if (b.u.rows() != T) throw ArgumentError("loss_and_gradient: batches differ in length");
  }
  const Eigen::Index m = arch.dims.m;
  const auto B = static_cast<Eigen::Index>(batches.size());

  ad::Tape tape;
  const ad::Var th = tape.variable(theta);
  const ad::ModelVar model = ad::build_model(tape, arch, th);
  std::vector<ad::Var> u_steps;
  Mat targets(m, B * T);
  u_steps.reserve(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    Mat U(m, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      U.col(b) = batches[static_cast<std::size_t>(b)].u.row(t).transpose();
      targets.col(t * B + b) = batches[static_cast<std::size_t>(b)].y.row(t).transpose();
    }
    u_steps.push_back(tape.constant(std::move(U)));
  }
  const std::vector<ad::Var> ys = ad::simulate(tape, model, u_steps);
  const ad::Var Y = ad::hcat(ys);
  const ad::Var loss = ad::sum_squares(Y - tape.constant(std::move(targets)));
  tape.backward(loss);

  LossAndGradient out;
  out.loss = loss.value()(0, 0);
  out.grad = tape.grad(th);
  if (!std::isfinite(out.loss)) throw DivergenceError("loss is not finite");
  for (Eigen::Index i = 0; i < out.grad.size(); ++i) {
    if (!std::isfinite(out.grad(i))) {
      throw DivergenceError("gradient coordinate " + std::to_string(i) + " is not finite");
    }
  }
  return out;
}

Vec fd_gradient(const Architecture& arch, const Vec& theta, const std::vector<Batch>& batches,
                double h, const std::vector<Eigen::Index>& coords) {
  if (!(h > 0.0)) throw ArgumentError("fd_gradient: step must be positive");
  std::vector<Eigen::Index> idx = coords;
  if (idx.empty()) {
    idx.resize(static_cast<std::size_t>(theta.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  }
  Vec g = Vec::Zero(theta.size());
  for (Eigen::Index i : idx) {
    if (i < 0 || i >= theta.size()) throw ArgumentError("fd_gradient: coordinate out of range");
    Vec tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    g(i) = (l2_loss(build_model(arch, tp), batches) - l2_loss(build_model(arch, tm), batches)) /
           (2.0 * h);
    if (!std::isfinite(g(i))) {
      throw DivergenceError("gradient coordinate " + std::to_string(i) + " is not finite");
    }
  }
  return g;
}

Vec gradient(const Architecture& arch, const Vec& theta, const std::vector<Batch>& batches,
             const TrainConfig& cfg) {
  if (cfg.gradient_mode == GradientMode::kReverse) {
    return loss_and_gradient(arch, theta, batches).grad;
  }
  return fd_gradient(arch, theta, batches, cfg.fd_step);
}

double min_block_certificate(const Model& model) {
  double worst = std::numeric_limits<double>::infinity();
  for (const RenBlock& b : model.sandwich.blocks) {
    const RenWeights& w = b.model.weights;
    const double e =
        b.bilipschitz
            ? verify_lmi(w, b.cert.P, b.cert.Lambda(), b.cert.mu, b.cert.nu, b.cert.alpha_bar)
            : verify_contraction_lmi(w, b.cert.P, b.cert.Lambda(), b.cert.alpha_bar);
    worst = std::min(worst, e);
  }
  return worst;
}

namespace {

struct Evaluated {
  double loss = 0.0;
  Vec grad;
};

Evaluated evaluate(const Architecture& arch, const Vec& theta, const std::vector<Batch>& batches,
                   const TrainConfig& cfg) {
  if (cfg.gradient_mode == GradientMode::kReverse) {
    LossAndGradient lg = loss_and_gradient(arch, theta, batches);
    return {lg.loss, std::move(lg.grad)};
  }
  const double loss = l2_loss(build_model(arch, theta), batches);
  if (!std::isfinite(loss)) throw DivergenceError("loss is not finite");
  return {loss, fd_gradient(arch, theta, batches, cfg.fd_step)};
}

double safe_loss(const Architecture& arch, const Vec& theta, const std::vector<Batch>& batches) {
  try {
    const double l = l2_loss(build_model(arch, theta), batches);
    return std::isfinite(l) ? l : std::numeric_limits<double>::infinity();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

Checkpoint make_checkpoint(const Architecture& arch, int step, double loss, const Vec& theta) {
  const Model model = build_model(arch, theta);
  return {step, loss, min_block_certificate(model), theta};
}

}  // namespace

TrainResult train(const Architecture& arch, const Vec& theta0, const Dataset& data,
                  const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  arch.validate();
  data.validate();
  if (theta0.size() != arch.theta_size()) throw ArgumentError("train: theta size mismatch");

  const std::size_t N = data.batches.size();
  const std::size_t bs = cfg.batch_size == 0 ? N : std::min<std::size_t>(cfg.batch_size, N);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = N;

  auto next_batch = [&]() {
    if (bs == N) return data.batches;
    std::vector<Batch> out;
    out.reserve(bs);
    while (out.size() < bs) {
      if (cursor == N) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      out.push_back(data.batches[order[cursor++]]);
    }
    return out;
  };

  TrainResult res;
  Vec theta = theta0;
  double lr = cfg.learning_rate;
  Vec m1 = Vec::Zero(theta.size());
  Vec m2 = Vec::Zero(theta.size());
  const double adam_eps = 1e-8;

  for (int step = 0; step < cfg.steps; ++step) {
    const std::vector<Batch> batch = next_batch();
    Evaluated ev;
    try {
      ev = evaluate(arch, theta, batch, cfg);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(step),
                            res.history);
    }
    res.history.push_back(ev.loss);
    if (on_step) on_step(step, ev.loss);
    if (step % cfg.checkpoint_every == 0) {
      res.checkpoints.push_back(make_checkpoint(arch, step, ev.loss, theta));
    }

    if (cfg.optimizer == Optimizer::kGradientDescent) {
      Vec trial = theta - lr * ev.grad;
      double trial_loss = safe_loss(arch, trial, batch);
      int halvings = 0;
      while (!(trial_loss <= ev.loss) && halvings < cfg.max_halvings) {
        lr *= 0.5;
        ++halvings;
        trial = theta - lr * ev.grad;
        trial_loss = safe_loss(arch, trial, batch);
      }
      if (std::isfinite(trial_loss)) theta = std::move(trial);
    } else {
      const double t = static_cast<double>(step + 1);
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * ev.grad;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * ev.grad.cwiseAbs2();
      const Vec mh = m1 / (1.0 - std::pow(cfg.beta1, t));
      const Vec vh = m2 / (1.0 - std::pow(cfg.beta2, t));
      theta -= lr * (mh.array() / (vh.array().sqrt() + adam_eps)).matrix();
    }
  }

  const double final_loss = safe_loss(arch, theta, data.batches);
  if (!std::isfinite(final_loss)) throw DivergenceError("final loss is not finite", res.history);
  res.history.push_back(final_loss);
  res.checkpoints.push_back(make_checkpoint(arch, cfg.steps, final_loss, theta));
  res.theta = theta;
  res.model = build_model(arch, theta);
  return res;
}

}  // namespace bilipren
