#pragma once

// Random Reach and Hold Position trials, closed-loop rollouts and the three
// accuracy metrics (goal completion, speed to goal, time in goal).

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "motorlab/diff/tape.hpp"
#include "motorlab/network.hpp"
#include "motorlab/plant.hpp"
#include "motorlab/rng.hpp"

namespace motorlab::tasks {

using plant::Vec2;
using plant::Vec6;

enum class TaskKind { Reach, Hold };

std::string_view to_string(TaskKind k);
TaskKind parse_task(std::string_view s);

struct TaskConfig {
  double threshold = 0.01;  // goal radius, m
  int timesteps = 50;
  double force_bound = 4.0;  // N, hold-task perturbation magnitude cap
  Vec2 shoulder_range_deg{20.0, 110.0};
  Vec2 elbow_range_deg{30.0, 140.0};
  int max_attempts = 1000;

  void validate() const;
};

struct TrialSpec {
  TaskKind kind = TaskKind::Reach;
  std::uint64_t id = 0;
  Vec2 q_init{};
  Vec2 target{};
  Vec2 external_force{};
  int timesteps = 50;
  double threshold = 0.01;
};

/// Uniform joint configuration inside the task workspace.
Vec2 sample_configuration(Rng& rng, const TaskConfig& cfg);

/// Start and target configurations drawn independently; resampled until the
/// endpoints are more than two goal radii apart. Never carries a force.
TrialSpec sample_reach_trial(Rng& rng, const TaskConfig& cfg, const plant::ArmParams& arm);

/// Starts on target and pushes with a constant force of uniform direction
/// and uniform magnitude in [0, force_bound].
TrialSpec sample_hold_trial(Rng& rng, const TaskConfig& cfg, const plant::ArmParams& arm);

TrialSpec sample_trial(TaskKind kind, Rng rng, const TaskConfig& cfg, const plant::ArmParams& arm);

/// Deterministic trial sequence: trial i is drawn from base.split(i).
class TrialStream {
 public:
  TrialStream(TaskKind kind, Rng base, TaskConfig cfg, plant::ArmParams arm)
      : kind_(kind), base_(base), cfg_(cfg), arm_(arm) {}

  [[nodiscard]] TrialSpec at(std::uint64_t index) const;
  [[nodiscard]] std::vector<TrialSpec> take(std::uint64_t first, std::size_t count) const;
  [[nodiscard]] TaskKind kind() const { return kind_; }

 private:
  TaskKind kind_;
  Rng base_;
  TaskConfig cfg_;
  plant::ArmParams arm_;
};

struct Trajectory {
  TrialSpec spec;
  Vec2 start{};  // endpoint before the first step
  std::vector<Vec2> endpoints;
  std::vector<Vec6> activations;
  std::vector<Vec6> excitations;
  std::vector<std::array<double, plant::kObservationSize>> observations;
};

/// Trajectory together with the tape nodes the losses differentiate through.
struct TapedRollout {
  Trajectory trajectory;
  diff::Var target;
  std::vector<diff::Var> endpoints;
  std::vector<diff::Var> activations;
};

/// Closed loop: observe, run the controller, step the plant, T times.
/// Starts from rest with zero activation.
TapedRollout rollout(diff::Tape& tape, const plant::Plant& plant, const network::NetworkParams& params,
                     const network::BoundParams& bound, const TrialSpec& spec);

/// Forward-only rollout. Produces the same values as `rollout` while keeping
/// the tape bounded to one step.
Trajectory simulate(const plant::Plant& plant, const network::NetworkParams& params, const TrialSpec& spec);

/// Distance of the endpoint to target at step t (0-based into endpoints).
double distance_to_target(const Trajectory& traj, std::size_t t);

/// 1-based timestep at which the first run of three consecutive in-goal
/// steps begins.
std::optional<int> first_goal_step(const Trajectory& traj);
bool goal_completion(const Trajectory& traj);
/// Start-to-target distance over the timesteps taken to reach the goal.
std::optional<double> speed_to_goal(const Trajectory& traj);
int time_in_goal(const Trajectory& traj);

struct TrialMetrics {
  bool goal_completed = false;
  std::optional<double> speed_to_goal;
  int time_in_goal = 0;
};
TrialMetrics measure(const Trajectory& traj);

}  // namespace motorlab::tasks
