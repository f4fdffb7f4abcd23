#pragma once

// Losses, gradients and the training loop for flat-parameter models.

#include <cstdint>
#include <functional>
#include <vector>

#include "bilipren/dataset.hpp"
#include "bilipren/parametric.hpp"

namespace bilipren {

/// Sum of squared output errors over every batch, step and channel.
double l2_loss(const Model& model, const std::vector<Batch>& batches);

/// Mean over batches of |F(u) - y| / |y|.
double nse(const Model& model, const std::vector<Batch>& batches);

/// NSE for precomputed predictions.
double nse(const std::vector<Mat>& predictions, const std::vector<Batch>& batches);

enum class GradientMode { kReverse, kCentralDifference };
enum class Optimizer { kGradientDescent, kAdam };

const char* to_string(GradientMode m);
const char* to_string(Optimizer o);
GradientMode gradient_mode_from_string(const std::string& s);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 1e-2;
  int steps = 100;
  /// Batches per step; 0 uses all batches.
  int batch_size = 0;
  GradientMode gradient_mode = GradientMode::kReverse;
  double fd_step = 1e-6;
  Optimizer optimizer = Optimizer::kGradientDescent;
  /// Gradient descent: halvings tried before a step is taken anyway.
  int max_halvings = 20;
  /// Adam moment decay rates.
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Certificates are re-verified every this many steps and at the end.
  int checkpoint_every = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossAndGradient {
  double loss = 0.0;
  Vec grad;
};

/// Loss and reverse-mode gradient with respect to theta. All batches must
/// share their length. Throws DivergenceError naming the first non-finite
/// coordinate.
LossAndGradient loss_and_gradient(const Architecture& arch, const Vec& theta,
                                  const std::vector<Batch>& batches);

/// Central-difference gradient on the listed coordinates (all when empty).
Vec fd_gradient(const Architecture& arch, const Vec& theta, const std::vector<Batch>& batches,
                double h, const std::vector<Eigen::Index>& coords = {});

/// Gradient in the requested mode.
Vec gradient(const Architecture& arch, const Vec& theta, const std::vector<Batch>& batches,
             const TrainConfig& cfg);

struct Checkpoint {
  int step = 0;
  double loss = 0.0;
  /// Smallest LMI eigenvalue over all REN blocks, recomputed from the weights.
  double min_lmi_eig = 0.0;
  Vec theta;
};

struct TrainResult {
  Vec theta;
  Model model;
  /// Loss of the parameters at the start of each step, then the final loss.
  std::vector<double> history;
  std::vector<Checkpoint> checkpoints;
};

/// Smallest recomputed LMI eigenvalue over the REN blocks of a model.
double min_block_certificate(const Model& model);

using StepCallback = std::function<void(int step, double loss)>;

TrainResult train(const Architecture& arch, const Vec& theta0, const Dataset& data,
                  const TrainConfig& cfg, const StepCallback& on_step = {});

}  // namespace bilipren
