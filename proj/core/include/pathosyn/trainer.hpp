#pragma once

// Joint training of f_sub and eps_theta: one total loss, one
// AdamW step for both networks, cosine-annealed learning rate and global
// gradient clipping.

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pathosyn/dataset.hpp"
#include "pathosyn/diffusion.hpp"
#include "pathosyn/networks.hpp"
#include "pathosyn/objectives.hpp"
#include "pathosyn/substrate.hpp"

namespace pathosyn {

enum class Precision { f32, f64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& s);

struct TrainConfig {
  int epochs = 300;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double weight_decay = 1e-5;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  /// Draw one t per batch instead of one per element.
  bool per_batch_t = false;
  double blend_sigma = kDefaultBlendSigma;
  double saturation_delta = kDefaultSaturationDelta;
  /// Steps between last.ckpt refreshes (0: end of training only).
  int checkpoint_every = 0;
  /// Epochs between validation passes (0: never).
  int validate_every = 1;
  /// Validation subjects used per pass (0: all).
  int validation_subjects = 8;
  int validation_ddim_steps = 8;
  LossWeights loss_weights;
  SubstrateLossWeights substrate_weights;
  ScheduleParams schedule;
  SubstrateNetConfig substrate_net;
  NoisePredictorConfig noise_net;

  void validate() const;
  [[nodiscard]] torch::Dtype dtype() const {
    return precision == Precision::f64 ? torch::kFloat64 : torch::kFloat32;
  }
};

/// Learning rate at a step of a cosine annealing run: eta at step 0 and
/// 0 at step total_steps - 1.
[[nodiscard]] double cosine_lr(double eta, std::int64_t step, std::int64_t total_steps);

struct TrainingState {
  TrainConfig config;
  NoiseSchedule schedule;
  SubstrateNet f_sub{nullptr};
  EpsNet eps{nullptr};
  std::unique_ptr<torch::optim::AdamW> optimizer;
  std::int64_t step = 0;
  std::int64_t skipped_subjects = 0;
  double best_validation = std::numeric_limits<double>::infinity();

  [[nodiscard]] std::vector<torch::Tensor> parameters() const;
};

/// Freshly initialised networks and optimizer; network resolutions are
/// taken from config.
[[nodiscard]] TrainingState make_training_state(const TrainConfig& config);

/// The randomness consumed by one train step: a timestep and a dense
/// Gaussian draw per batch element, keyed by (seed, step, subject id).
struct StepDraws {
  std::vector<std::int64_t> t;
  torch::Tensor eps;
};
[[nodiscard]] StepDraws draw_step(const TrainConfig& config, std::int64_t step,
                                  std::span<const SubjectRecord* const> batch);

/// Batch tensors (N, 1, H, W) in the training dtype.
struct BatchTensors {
  torch::Tensor x, m, x_ph, s, w_ring;
};
[[nodiscard]] BatchTensors make_batch(const TrainConfig& config, std::span<const SubjectRecord* const> batch);

/// Intermediates of one joint forward pass.
struct JointForward {
  torch::Tensor x_sub, r0, r_t, eps_hat, r0_hat, x_hat;
  torch::Tensor l_sub, l_diff, l_dev, l_syn, total;
  [[nodiscard]] LossBreakdown breakdown() const;
};
[[nodiscard]] JointForward joint_forward(TrainingState& state, const BatchTensors& batch, const StepDraws& draws);

/// One optimisation step on the lesioned subjects of batch (subjects with
/// an empty mask are skipped and counted). Throws NumericalError naming the
/// first non-finite term.
LossBreakdown train_step(TrainingState& state, std::span<const SubjectRecord* const> batch, int total_steps);

/// Losses at the current parameters for a fixed draw, without updating.
[[nodiscard]] LossBreakdown evaluate_losses(TrainingState& state, std::span<const SubjectRecord* const> batch,
                                            const StepDraws& draws);

struct MetricsRow {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown losses;
};
[[nodiscard]] std::string metrics_header();
[[nodiscard]] std::string format_metrics_row(const MetricsRow& row);

struct TrainOptions {
  /// Output directory for metrics.csv, validation.csv, best.ckpt and last.ckpt.
  std::filesystem::path out_dir;
  /// Continue from this checkpoint instead of initialising.
  std::filesystem::path resume;
  /// Stop after this many steps in this invocation (-1: run to the end).
  std::int64_t max_steps = -1;
  std::function<void(const MetricsRow&)> on_step;
};

struct TrainResult {
  TrainingState state;
  std::vector<MetricsRow> metrics;
};

/// Runs epochs x ceil(N_train / batch) steps over the train split.
[[nodiscard]] TrainResult train(const TrainConfig& config, const Dataset& dataset, const TrainOptions& options);

/// Masked L1 between deviations sampled with a short DDIM chain and the
/// r0 targets of the given subjects.
[[nodiscard]] double validation_l1(TrainingState& state, std::span<const SubjectRecord* const> subjects);

}  // namespace pathosyn
