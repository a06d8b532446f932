#pragma once

// Two-link planar arm in the horizontal plane, driven by six muscles with
// constant moment arms. Shoulder flexor/extensor (SF, SE) span the shoulder,
// elbow flexor/extensor (EF, EE) the elbow, and the bi-articular pair
// (BF, BE) both joints. A positive moment arm means the muscle shortens as
// the joint flexes and pulls the joint toward flexion.

#include <array>
#include <cstddef>
#include <span>

#include "motorlab/diff/tape.hpp"

namespace motorlab::plant {

inline constexpr std::size_t kMuscles = 6;
inline constexpr std::size_t kJoints = 2;
inline constexpr std::size_t kObservationSize = 16;

using Vec2 = std::array<double, 2>;
using Vec6 = std::array<double, kMuscles>;
using Mat2 = std::array<Vec2, 2>;  // [row][col]

enum class Muscle : std::size_t { SF, SE, EF, EE, BF, BE };

struct ArmParams {
  double l1 = 0.30;
  double l2 = 0.33;
  double m1 = 1.4;
  double m2 = 1.0;
  double d1 = 0.11;
  double d2 = 0.16;
  double i1 = 0.025;
  double i2 = 0.045;
  double damping = 0.05;
  double dt = 0.01;

  void validate() const;
};

struct MuscleParams {
  Vec6 f_max{2100.0, 2100.0, 1500.0, 1500.0, 1200.0, 1200.0};
  Vec6 r_shoulder{0.04, -0.04, 0.0, 0.0, 0.028, -0.035};
  Vec6 r_elbow{0.0, 0.0, 0.025, -0.025, 0.028, -0.035};
  Vec6 l0{0.15, 0.15, 0.10, 0.10, 0.20, 0.20};
  Vec2 q0{0.7853981633974483, 1.5707963267948966};  // 45 deg, 90 deg
  double tau_act = 0.015;
  double tau_deact = 0.05;
  double v_max = 10.0;  // optimal lengths per second

  void validate() const;
};

struct PlantConfig {
  ArmParams arm;
  MuscleParams muscles;

  void validate() const {
    arm.validate();
    muscles.validate();
  }
};

struct PlantState {
  Vec2 q{};
  Vec2 qdot{};
  Vec6 a{};
  int t = 0;
};

// Plain evaluations of the plant formulas.

Vec2 forward_kinematics(const Vec2& q, const ArmParams& arm);
Mat2 endpoint_jacobian(const Vec2& q, const ArmParams& arm);
/// Joint torques produced by an endpoint force, J^T F.
Vec2 joint_torque_from_endpoint_force(const Vec2& q, const Vec2& force, const ArmParams& arm);
Mat2 mass_matrix(const Vec2& q, const ArmParams& arm);
double kinetic_energy(const PlantState& s, const ArmParams& arm);

struct MuscleGeometry {
  Vec6 length{};
  Vec6 velocity{};  // positive when lengthening
};
MuscleGeometry muscle_geometry(const Vec2& q, const Vec2& qdot, const MuscleParams& muscles);
Vec6 muscle_force(const Vec6& a, const Vec6& length, const Vec6& velocity, const MuscleParams& muscles);

// Differentiable plant on a tape. Sensing and integration each enter the
// tape as a single linearised node whose Jacobian is evaluated with
// forward-mode dual numbers.

inline constexpr std::size_t kStateSize = 10;     // q (2), qdot (2), a (6)
inline constexpr std::size_t kFeedbackSize = 14;  // endpoint (2), l / l0 (6), v / (v_max l0) (6)

struct StateVars {
  diff::Var state;  // q (2), qdot (2), a (6)
  int t = 0;

  [[nodiscard]] diff::Var q() const { return diff::slice(state, 0, 2); }
  [[nodiscard]] diff::Var qdot() const { return diff::slice(state, 2, 2); }
  [[nodiscard]] diff::Var a() const { return diff::slice(state, 4, kMuscles); }
};

/// What the controller receives from the plant besides the target.
struct Sensed {
  diff::Var feedback;  // endpoint (2), normalised lengths (6), normalised velocities (6)
  diff::Var endpoint;
};

class Plant {
 public:
  explicit Plant(PlantConfig config);

  [[nodiscard]] const PlantConfig& config() const { return config_; }

  /// Places a plain state on the tape as one leaf.
  StateVars load(diff::Tape& tape, const PlantState& state) const;
  static PlantState store(const StateVars& s);

  Sensed sense(const StateVars& s) const;

  /// Observation vector: target (2), endpoint (2), normalised muscle lengths
  /// (6), normalised muscle velocities (6).
  diff::Var observe(const Sensed& sensed, diff::Var target) const;

  /// Advances one timestep: activation dynamics, muscle and external
  /// torques, rigid-body dynamics, then semi-implicit Euler.
  StateVars step(const StateVars& s, diff::Var excitation, const Vec2& external_force) const;

  /// Same update on plain values.
  PlantState step(const PlantState& s, const Vec6& excitation, const Vec2& external_force) const;

 private:
  template <typename T>
  void feedback_kernel(const T* q_qdot, T* out) const;
  template <typename T>
  void step_kernel(const T* state_and_excitation, const Vec2& external_force, T* out) const;

  PlantConfig config_;
  Vec6 inv_l0_{};
  Vec6 neg_inv_vscale_{};
  double mass_a1_ = 0.0;  // I1 + I2 + m1 d1^2 + m2 (L1^2 + d2^2)
  double mass_a2_ = 0.0;  // m2 L1 d2
  double mass_a3_ = 0.0;  // I2 + m2 d2^2
};

}  // namespace motorlab::plant
