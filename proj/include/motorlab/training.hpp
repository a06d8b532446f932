#pragma once

// Adam training over closed-loop rollouts, with optional per-hemisphere
// gradient routing and early stopping on a fixed validation set.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "motorlab/losses.hpp"
#include "motorlab/network.hpp"
#include "motorlab/plant.hpp"
#include "motorlab/tasks.hpp"

namespace motorlab::training {

/// Everything a rollout needs besides the controller.
struct Environment {
  plant::Plant plant{plant::PlantConfig{}};
  tasks::TaskConfig task;
  losses::LossConfig loss;
};

enum class LossMode {
  Single,       // one loss profile drives every tensor
  Specialised,  // dominant and non-dominant losses routed by group
};

struct TrainConfig {
  double lr = 0.001;
  int max_epochs = 100;
  int patience = 3;
  int batch_size = 8;
  int batches_per_epoch = 256;
  int val_trials = 256;
  LossMode mode = LossMode::Single;
  losses::Profile profile = losses::Profile::Combined;  // used in Single mode
  tasks::TaskKind task = tasks::TaskKind::Reach;
  std::uint64_t seed = 0;
  int threads = 1;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const network::NetworkParams& params);

/// One bias-corrected Adam update. Frozen tensors are left untouched.
/// Throws NumericError naming the tensor if a gradient is not finite.
void adam_step(network::NetworkParams& params, std::span<const double> grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

/// Dominant tensors take grad_dl, non-dominant tensors grad_ndl, shared
/// tensors the 50:50 mix.
std::vector<double> route_gradients(std::span<const double> grad_dl, std::span<const double> grad_ndl,
                                    const network::NetworkParams& params);

/// Loss value and gradient(s) of one batch, averaged over its trials.
struct BatchGradient {
  double loss = 0.0;               // Single: the profile loss; Specialised: mean of DL and NDL
  std::vector<double> primary;     // Single: profile gradient; Specialised: DL gradient
  std::vector<double> secondary;   // Specialised only: NDL gradient
};

BatchGradient batch_gradient(const network::NetworkParams& params, const Environment& env,
                             std::span<const tasks::TrialSpec> trials, LossMode mode, losses::Profile profile,
                             int threads = 1);

/// Gradient actually applied for a batch: the profile gradient, or the
/// routed pair in Specialised mode.
std::vector<double> applied_gradient(const BatchGradient& g, const network::NetworkParams& params, LossMode mode);

/// Trials of batch `batch` in epoch `epoch` for a given training stream.
std::vector<tasks::TrialSpec> training_batch(const Environment& env, tasks::TaskKind task, Rng stream, int epoch,
                                             int batch, int batch_size);

struct EpochResult {
  double mean_loss = 0.0;
};

/// batches_per_epoch Adam steps on freshly sampled trials from `stream`.
EpochResult train_epoch(network::NetworkParams& params, AdamState& opt, const TrainConfig& cfg,
                        const Environment& env, Rng stream, int epoch);

/// Profile scored for early stopping: the training profile in Single mode,
/// Combined in Specialised mode.
losses::Profile validation_profile(const TrainConfig& cfg);

/// Mean loss of `profile` over a trial set, forward only.
double validation_loss(const network::NetworkParams& params, const Environment& env,
                       std::span<const tasks::TrialSpec> trials, losses::Profile profile, int threads = 1);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainingRecord {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

struct FitResult {
  network::NetworkParams params;
  TrainingRecord record;
};

/// Early-stopping driver. `run_epoch(epoch)` trains in place and returns the
/// training loss; `validate()` scores the current parameters. Stops once
/// validation has not improved for `patience` consecutive epochs or after
/// `max_epochs`, and returns the parameters of the best validation epoch.
FitResult early_stopping(network::NetworkParams params, int max_epochs, int patience,
                         const std::function<double(network::NetworkParams&, int epoch)>& run_epoch,
                         const std::function<double(const network::NetworkParams&)>& validate);

/// Initialises a network from cfg.seed and trains it on cfg.task.
FitResult fit(const network::ArchitectureConfig& arch, const TrainConfig& cfg, const Environment& env);
/// Continues training from given parameters.
FitResult fit(network::NetworkParams params, const TrainConfig& cfg, const Environment& env);

/// The fixed validation set used by `fit` for a (seed, task).
std::vector<tasks::TrialSpec> validation_set(const Environment& env, tasks::TaskKind task, std::uint64_t seed,
                                             int count);

/// Held-out evaluation trials for a task. Drawn from a fixed seed so every
/// model in an experiment is scored on the same trials.
inline constexpr std::uint64_t kTestSeed = 0x7E57'5E7ULL;
std::vector<tasks::TrialSpec> test_set(const Environment& env, tasks::TaskKind task, int count,
                                       std::uint64_t seed = kTestSeed);

/// Simulates every trial and measures it; results in trial order.
std::vector<tasks::TrialMetrics> evaluate(const network::NetworkParams& params, const Environment& env,
                                          std::span<const tasks::TrialSpec> trials, int threads = 1);

struct MetricSummary {
  int trials = 0;
  int completed = 0;
  double goal_completion = 0.0;  // fraction of trials
  /// Over completed trials only; empty when none completed.
  std::optional<double> speed_mean;
  double speed_sd = 0.0;
  double time_in_goal_mean = 0.0;
  double time_in_goal_sd = 0.0;
};

/// Means and sample standard deviations of per-trial metrics.
MetricSummary summarize(std::span<const tasks::TrialMetrics> metrics);

/// Runs fn(i) for i in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace motorlab::training
