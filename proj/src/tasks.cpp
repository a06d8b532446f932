#include "motorlab/tasks.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "motorlab/error.hpp"

namespace motorlab::tasks {

using diff::Var;

std::string_view to_string(TaskKind k) { return k == TaskKind::Reach ? "reach" : "hold"; }

TaskKind parse_task(std::string_view s) {
  if (s == "reach") return TaskKind::Reach;
  if (s == "hold") return TaskKind::Hold;
  throw ContractError("tasks: unknown task '" + std::string(s) + "'");
}

void TaskConfig::validate() const {
  if (!(threshold > 0.0)) throw ContractError("tasks: threshold must be positive");
  if (timesteps < 1) throw ContractError("tasks: timesteps must be positive");
  if (!(force_bound >= 0.0)) throw ContractError("tasks: force_bound must be non-negative");
  if (!(shoulder_range_deg[0] <= shoulder_range_deg[1]) || !(elbow_range_deg[0] <= elbow_range_deg[1])) {
    throw ContractError("tasks: empty joint range");
  }
  if (max_attempts < 1) throw ContractError("tasks: max_attempts must be positive");
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double distance(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

Vec2 sample_configuration(Rng& rng, const TaskConfig& cfg) {
  const double q1 = rng.uniform(cfg.shoulder_range_deg[0], cfg.shoulder_range_deg[1]) * kDeg;
  const double q2 = rng.uniform(cfg.elbow_range_deg[0], cfg.elbow_range_deg[1]) * kDeg;
  return {q1, q2};
}

TrialSpec sample_reach_trial(Rng& rng, const TaskConfig& cfg, const plant::ArmParams& arm) {
  TrialSpec spec;
  spec.kind = TaskKind::Reach;
  spec.timesteps = cfg.timesteps;
  spec.threshold = cfg.threshold;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    spec.q_init = sample_configuration(rng, cfg);
    spec.target = plant::forward_kinematics(sample_configuration(rng, cfg), arm);
    if (distance(plant::forward_kinematics(spec.q_init, arm), spec.target) > 2.0 * cfg.threshold) return spec;
  }
  throw ContractError("tasks: no reach trial with start-target distance above twice the threshold after " +
                      std::to_string(cfg.max_attempts) + " attempts; check the workspace bounds");
}

TrialSpec sample_hold_trial(Rng& rng, const TaskConfig& cfg, const plant::ArmParams& arm) {
  TrialSpec spec;
  spec.kind = TaskKind::Hold;
  spec.timesteps = cfg.timesteps;
  spec.threshold = cfg.threshold;
  spec.q_init = sample_configuration(rng, cfg);
  spec.target = plant::forward_kinematics(spec.q_init, arm);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double magnitude = rng.uniform(0.0, cfg.force_bound);
  spec.external_force = {magnitude * std::cos(angle), magnitude * std::sin(angle)};
  return spec;
}

TrialSpec sample_trial(TaskKind kind, Rng rng, const TaskConfig& cfg, const plant::ArmParams& arm) {
  return kind == TaskKind::Reach ? sample_reach_trial(rng, cfg, arm) : sample_hold_trial(rng, cfg, arm);
}

TrialSpec TrialStream::at(std::uint64_t index) const {
  TrialSpec spec = sample_trial(kind_, base_.split(index), cfg_, arm_);
  spec.id = index;
  return spec;
}

std::vector<TrialSpec> TrialStream::take(std::uint64_t first, std::size_t count) const {
  std::vector<TrialSpec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(at(first + i));
  return out;
}

namespace {

plant::PlantState initial_state(const TrialSpec& spec) {
  plant::PlantState s;
  s.q = spec.q_init;
  return s;
}

template <std::size_t N>
std::array<double, N> to_array(std::span<const double> v) {
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

[[noreturn]] void rethrow_for_trial(const TrialSpec& spec, int step, const std::exception& e) {
  std::ostringstream msg;
  msg << "rollout of " << to_string(spec.kind) << " trial " << spec.id << " failed at step " << step << ": "
      << e.what();
  throw NumericError(msg.str());
}

void record_step(Trajectory& traj, Var x, Var u, Var endpoint, Var activation) {
  traj.observations.push_back(to_array<plant::kObservationSize>(x.value()));
  traj.excitations.push_back(to_array<plant::kMuscles>(u.value()));
  traj.endpoints.push_back(to_array<2>(endpoint.value()));
  traj.activations.push_back(to_array<plant::kMuscles>(activation.value()));
}

void reserve(Trajectory& traj) {
  const auto n = static_cast<std::size_t>(traj.spec.timesteps);
  traj.endpoints.reserve(n);
  traj.activations.reserve(n);
  traj.excitations.reserve(n);
  traj.observations.reserve(n);
}

}  // namespace

TapedRollout rollout(diff::Tape& tape, const plant::Plant& plant, const network::NetworkParams& params,
                     const network::BoundParams& bound, const TrialSpec& spec) {
  TapedRollout out;
  out.trajectory.spec = spec;
  reserve(out.trajectory);
  out.endpoints.reserve(static_cast<std::size_t>(spec.timesteps));
  out.activations.reserve(static_cast<std::size_t>(spec.timesteps));
  int t = 0;
  try {
    plant::StateVars state = plant.load(tape, initial_state(spec));
    out.target = tape.leaf(spec.target);
    plant::Sensed sensed = plant.sense(state);
    out.trajectory.start = to_array<2>(sensed.endpoint.value());
    for (t = 0; t < spec.timesteps; ++t) {
      const Var x = plant.observe(sensed, out.target);
      const Var u = network::forward(params, bound, x);
      state = plant.step(state, u, spec.external_force);
      sensed = plant.sense(state);
      const Var activation = state.a();
      record_step(out.trajectory, x, u, sensed.endpoint, activation);
      out.endpoints.push_back(sensed.endpoint);
      out.activations.push_back(activation);
    }
  } catch (const NumericError& e) {
    rethrow_for_trial(spec, t, e);
  }
  return out;
}

Trajectory simulate(const plant::Plant& plant, const network::NetworkParams& params, const TrialSpec& spec) {
  thread_local diff::Tape tape;
  tape.clear();
  const network::BoundParams bound = network::bind(params, tape.leaf(params.values));
  return rollout(tape, plant, params, bound, spec).trajectory;
}

double distance_to_target(const Trajectory& traj, std::size_t t) {
  return distance(traj.endpoints.at(t), traj.spec.target);
}

std::optional<int> first_goal_step(const Trajectory& traj) {
  int run = 0;
  for (std::size_t t = 0; t < traj.endpoints.size(); ++t) {
    run = distance_to_target(traj, t) <= traj.spec.threshold ? run + 1 : 0;
    if (run == 3) return static_cast<int>(t) - 1;  // 1-based index of the window start
  }
  return std::nullopt;
}

bool goal_completion(const Trajectory& traj) { return first_goal_step(traj).has_value(); }

std::optional<double> speed_to_goal(const Trajectory& traj) {
  const auto step = first_goal_step(traj);
  if (!step) return std::nullopt;
  return distance(traj.start, traj.spec.target) / static_cast<double>(*step);
}

int time_in_goal(const Trajectory& traj) {
  int n = 0;
  for (std::size_t t = 0; t < traj.endpoints.size(); ++t) {
    if (distance_to_target(traj, t) <= traj.spec.threshold) ++n;
  }
  return n;
}

TrialMetrics measure(const Trajectory& traj) {
  return {goal_completion(traj), speed_to_goal(traj), time_in_goal(traj)};
}

}  // namespace motorlab::tasks
