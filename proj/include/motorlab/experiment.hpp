#pragma once

// Experiment orchestration: configuration, the model variants, and the
// per-run pipeline (fit, evaluate, lesion) writing results to disk.
//
// Output directory layout:
//   config.json                 canonical configuration of the experiment
//   runs/<run>.json             run record: metrics, epochs, status
//   trials/<run>.csv            per-trial test metrics
//   training/<run>.csv          epoch, train loss, validation loss
//   timing/<run>.csv            epoch, wall seconds (not reproducible)
//   lesions/<run>.csv           lesion table (bilateral models)
//   checkpoints/<run>.net       trained parameters
//   plots/trajectories/<run>.svg endpoint paths of the first test trials
// plus the report files written by emit_report.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motorlab/lesion.hpp"
#include "motorlab/training.hpp"

namespace motorlab::experiment {

enum class Model { UniB, UniDL, UniNDL, BiNS, BiS, CCNS, CCS };

inline constexpr std::array<Model, 7> kAllModels{Model::UniB, Model::UniDL, Model::UniNDL, Model::BiNS,
                                                 Model::BiS,  Model::CCNS,  Model::CCS};

std::string_view to_string(Model m);
Model parse_model(std::string_view s);

/// Architecture and loss setup of a model variant.
struct ModelSetup {
  network::Kind kind = network::Kind::Unilateral;
  training::LossMode mode = training::LossMode::Single;
  losses::Profile profile = losses::Profile::Combined;
};
ModelSetup setup_of(Model m);
/// Trained with split dominant/non-dominant gradients.
bool specialised(Model m);

struct ExperimentConfig {
  std::vector<Model> models{kAllModels.begin(), kAllModels.end()};
  std::vector<tasks::TaskKind> tasks{tasks::TaskKind::Reach, tasks::TaskKind::Hold};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t units = 10;
  std::size_t layers = 2;
  plant::PlantConfig plant;
  tasks::TaskConfig task;
  losses::LossConfig loss;
  training::TrainConfig train;  // seed, task, mode and profile are set per run
  int test_trials = 1000;
  std::uint64_t test_seed = training::kTestSeed;
  bool lesions = true;
  int workers = 1;  // concurrent runs
  int threads = 1;  // rollout threads inside a run

  void validate() const;
  [[nodiscard]] training::Environment environment() const;
  [[nodiscard]] network::ArchitectureConfig architecture(Model m) const;
  /// Training configuration of one run.
  [[nodiscard]] training::TrainConfig train_config(Model m, tasks::TaskKind task, std::uint64_t seed) const;
};

/// JSON text of a configuration with every addressable key.
std::string to_json_text(const ExperimentConfig& cfg);
/// Parses a (possibly partial) JSON configuration over the defaults.
/// Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies `dotted.key=value`. The value is read as JSON when it parses,
/// otherwise as a string.
void apply_override(ExperimentConfig& cfg, std::string_view assignment);

struct RunKey {
  Model model = Model::UniB;
  tasks::TaskKind task = tasks::TaskKind::Reach;
  std::uint64_t seed = 0;

  /// File stem, e.g. "bi-s_hold_seed3".
  [[nodiscard]] std::string id() const;
  friend bool operator==(const RunKey&, const RunKey&) = default;
};

/// Runs in output order: model-major, then task, then seed.
std::vector<RunKey> enumerate_runs(const ExperimentConfig& cfg);

struct MetricStat {
  double mean = 0.0;
  double sd = 0.0;
};

struct RunRecord {
  RunKey key;
  bool ok = false;
  std::string error;
  int epochs_trained = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  int test_trials = 0;
  double goal_completion = 0.0;
  std::optional<MetricStat> speed_to_goal;  // empty when no trial completed
  MetricStat time_in_goal;
  std::vector<lesion::LesionRow> lesions;
};

std::string run_record_json(const RunRecord& r);
RunRecord parse_run_record(std::string_view json_text);

/// Trains, evaluates and (for bilateral models) lesions one run.
RunRecord execute_run(const ExperimentConfig& cfg, const RunKey& key, const std::filesystem::path& out_dir);

struct RunOptions {
  /// Keep runs whose record exists with status ok. Requires the stored
  /// config.json to match.
  bool resume = false;
  /// Called after each run completes (from worker threads, serialised).
  std::function<void(const RunRecord&, std::size_t done, std::size_t total)> progress;
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // enumeration order
  [[nodiscard]] bool all_ok() const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const RunOptions& opts = {});

/// Lesion rows as CSV: model kind, specialised flag, seed, lesion kind, task,
/// metric name, value.
std::string lesion_csv(const RunRecord& r);
/// Per-trial test results as CSV.
std::string trials_csv(const RunKey& key, std::span<const tasks::TrialSpec> trials,
                       std::span<const tasks::TrialMetrics> metrics);

/// Writes `text` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view text);
std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace motorlab::experiment
