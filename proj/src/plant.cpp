#include "motorlab/plant.hpp"

#include <cmath>
#include <string>

#include "motorlab/diff/dual.hpp"
#include "motorlab/error.hpp"

namespace motorlab::plant {

using diff::Var;
using diff::Dual;

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ContractError(std::string("plant: ") + name + " must be positive and finite");
  }
}

using diff::value_of;

double exp(double x) { return std::exp(x); }
double sin(double x) { return std::sin(x); }
double cos(double x) { return std::cos(x); }

template <typename T>
T force_length(const T& length_norm) {
  const T stretch = length_norm - 1.0;
  return exp(-4.0 * (stretch * stretch));
}

// Multiplier of a normalised lengthening velocity. With shortening speed
// s = -v: max(0, (1 - s) / (1 + 4 s)) for s >= 0, 1.5 - 0.5 exp(10 s) for
// s < 0. The branches meet at s = 0 with value 1 and slope -5 in s.
template <typename T>
T force_velocity(const T& velocity_norm) {
  const T s = -velocity_norm;
  if (value_of(s) >= 1.0) return T(0.0);
  if (value_of(s) >= 0.0) return (1.0 - s) / (4.0 * s + 1.0);
  return 1.5 - 0.5 * exp(10.0 * s);
}

}  // namespace

void ArmParams::validate() const {
  require_positive(l1, "arm.l1");
  require_positive(l2, "arm.l2");
  require_positive(m1, "arm.m1");
  require_positive(m2, "arm.m2");
  require_positive(d1, "arm.d1");
  require_positive(d2, "arm.d2");
  require_positive(i1, "arm.i1");
  require_positive(i2, "arm.i2");
  require_positive(dt, "arm.dt");
  if (!(damping >= 0.0)) throw ContractError("plant: arm.damping must be non-negative");
}

void MuscleParams::validate() const {
  for (std::size_t m = 0; m < kMuscles; ++m) {
    require_positive(f_max[m], "muscles.f_max");
    require_positive(l0[m], "muscles.l0");
  }
  // Mono-articular muscles span a single joint.
  for (auto m : {Muscle::SF, Muscle::SE}) {
    if (r_elbow[static_cast<std::size_t>(m)] != 0.0) throw ContractError("plant: shoulder muscle with elbow arm");
  }
  for (auto m : {Muscle::EF, Muscle::EE}) {
    if (r_shoulder[static_cast<std::size_t>(m)] != 0.0) throw ContractError("plant: elbow muscle with shoulder arm");
  }
  require_positive(tau_act, "muscles.tau_act");
  require_positive(tau_deact, "muscles.tau_deact");
  require_positive(v_max, "muscles.v_max");
}

Vec2 forward_kinematics(const Vec2& q, const ArmParams& arm) {
  const double q12 = q[0] + q[1];
  return {arm.l1 * std::cos(q[0]) + arm.l2 * std::cos(q12), arm.l1 * std::sin(q[0]) + arm.l2 * std::sin(q12)};
}

Mat2 endpoint_jacobian(const Vec2& q, const ArmParams& arm) {
  const double q12 = q[0] + q[1];
  const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
  const double s12 = std::sin(q12), c12 = std::cos(q12);
  return {{{-arm.l1 * s1 - arm.l2 * s12, -arm.l2 * s12}, {arm.l1 * c1 + arm.l2 * c12, arm.l2 * c12}}};
}

Vec2 joint_torque_from_endpoint_force(const Vec2& q, const Vec2& force, const ArmParams& arm) {
  const Mat2 j = endpoint_jacobian(q, arm);
  return {j[0][0] * force[0] + j[1][0] * force[1], j[0][1] * force[0] + j[1][1] * force[1]};
}

Mat2 mass_matrix(const Vec2& q, const ArmParams& arm) {
  const double a1 = arm.i1 + arm.i2 + arm.m1 * arm.d1 * arm.d1 + arm.m2 * (arm.l1 * arm.l1 + arm.d2 * arm.d2);
  const double a2 = arm.m2 * arm.l1 * arm.d2;
  const double a3 = arm.i2 + arm.m2 * arm.d2 * arm.d2;
  const double c2 = std::cos(q[1]);
  return {{{a1 + 2.0 * a2 * c2, a3 + a2 * c2}, {a3 + a2 * c2, a3}}};
}

double kinetic_energy(const PlantState& s, const ArmParams& arm) {
  const Mat2 m = mass_matrix(s.q, arm);
  const auto& w = s.qdot;
  return 0.5 * (m[0][0] * w[0] * w[0] + 2.0 * m[0][1] * w[0] * w[1] + m[1][1] * w[1] * w[1]);
}

MuscleGeometry muscle_geometry(const Vec2& q, const Vec2& qdot, const MuscleParams& muscles) {
  MuscleGeometry g;
  const double dq1 = q[0] - muscles.q0[0];
  const double dq2 = q[1] - muscles.q0[1];
  for (std::size_t m = 0; m < kMuscles; ++m) {
    const double rs = muscles.r_shoulder[m];
    const double re = muscles.r_elbow[m];
    g.length[m] = muscles.l0[m] - (rs * dq1 + re * dq2);
    g.velocity[m] = -(rs * qdot[0] + re * qdot[1]);
  }
  return g;
}

Vec6 muscle_force(const Vec6& a, const Vec6& length, const Vec6& velocity, const MuscleParams& muscles) {
  Vec6 f{};
  for (std::size_t m = 0; m < kMuscles; ++m) {
    const double ln = length[m] / muscles.l0[m];
    const double vn = velocity[m] / (muscles.v_max * muscles.l0[m]);
    f[m] = a[m] * muscles.f_max[m] * force_length(ln) * force_velocity(vn);
  }
  return f;
}

Plant::Plant(PlantConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& mp = config_.muscles;
  for (std::size_t m = 0; m < kMuscles; ++m) {
    inv_l0_[m] = 1.0 / mp.l0[m];
    neg_inv_vscale_[m] = -1.0 / (mp.v_max * mp.l0[m]);
  }
  const auto& arm = config_.arm;
  mass_a1_ = arm.i1 + arm.i2 + arm.m1 * arm.d1 * arm.d1 + arm.m2 * (arm.l1 * arm.l1 + arm.d2 * arm.d2);
  mass_a2_ = arm.m2 * arm.l1 * arm.d2;
  mass_a3_ = arm.i2 + arm.m2 * arm.d2 * arm.d2;
}

template <typename T>
void Plant::feedback_kernel(const T* x, T* out) const {
  const auto& arm = config_.arm;
  const auto& mp = config_.muscles;
  const T q12 = x[0] + x[1];
  out[0] = arm.l1 * cos(x[0]) + arm.l2 * cos(q12);
  out[1] = arm.l1 * sin(x[0]) + arm.l2 * sin(q12);
  const T dq1 = x[0] - mp.q0[0];
  const T dq2 = x[1] - mp.q0[1];
  for (std::size_t m = 0; m < kMuscles; ++m) {
    const double rs = mp.r_shoulder[m];
    const double re = mp.r_elbow[m];
    out[2 + m] = 1.0 - (rs * dq1 + re * dq2) * inv_l0_[m];
    out[8 + m] = (rs * x[2] + re * x[3]) * neg_inv_vscale_[m];
  }
}

template <typename T>
void Plant::step_kernel(const T* x, const Vec2& external_force, T* out) const {
  const auto& arm = config_.arm;
  const auto& mp = config_.muscles;
  const T* q = x;
  const T* qdot = x + 2;
  const T* act = x + 4;
  const T* excitation = x + 10;

  T sensed[kFeedbackSize];
  feedback_kernel(x, sensed);

  // Activation dynamics with separate rise and decay time constants, Euler
  // step, then clamped to [0, 1]. The updated activation drives the force.
  T torque1(0.0), torque2(0.0);
  for (std::size_t m = 0; m < kMuscles; ++m) {
    const T gap = excitation[m] - act[m];
    const double rate = value_of(gap) >= 0.0 ? 1.0 / mp.tau_act : 1.0 / mp.tau_deact;
    T a = act[m] + (arm.dt * rate) * gap;
    if (value_of(a) < 0.0) a = T(0.0);
    if (value_of(a) > 1.0) a = T(1.0);
    out[4 + m] = a;
    const T tension = mp.f_max[m] * (a * force_length(sensed[2 + m]) * force_velocity(sensed[8 + m]));
    torque1 += mp.r_shoulder[m] * tension;
    torque2 += mp.r_elbow[m] * tension;
  }

  const T q12 = q[0] + q[1];
  const T s1 = sin(q[0]), c1 = cos(q[0]);
  const T s12 = sin(q12), c12 = cos(q12);
  if (external_force[0] != 0.0 || external_force[1] != 0.0) {
    const double fx = external_force[0];
    const double fy = external_force[1];
    const T elbow = arm.l2 * (fy * c12 - fx * s12);
    torque1 += arm.l1 * (fy * c1 - fx * s1) + elbow;
    torque2 += elbow;
  }

  // M(q) qdd + C(q, qdot) + b qdot = torque
  const T c2 = cos(q[1]);
  const T h = mass_a2_ * sin(q[1]);
  const T m11 = mass_a1_ + 2.0 * mass_a2_ * c2;
  const T m12 = mass_a3_ + mass_a2_ * c2;
  const T coriolis1 = -(h * qdot[1] * (2.0 * qdot[0] + qdot[1]));
  const T coriolis2 = h * qdot[0] * qdot[0];
  const T r1 = torque1 - coriolis1 - arm.damping * qdot[0];
  const T r2 = torque2 - coriolis2 - arm.damping * qdot[1];
  const T det = mass_a3_ * m11 - m12 * m12;
  const T qdd1 = (mass_a3_ * r1 - m12 * r2) / det;
  const T qdd2 = (m11 * r2 - m12 * r1) / det;

  out[2] = qdot[0] + arm.dt * qdd1;
  out[3] = qdot[1] + arm.dt * qdd2;
  out[0] = q[0] + arm.dt * out[2];
  out[1] = q[1] + arm.dt * out[3];
}

StateVars Plant::load(diff::Tape& tape, const PlantState& state) const {
  std::array<double, kStateSize> x{};
  std::copy(state.q.begin(), state.q.end(), x.begin());
  std::copy(state.qdot.begin(), state.qdot.end(), x.begin() + 2);
  std::copy(state.a.begin(), state.a.end(), x.begin() + 4);
  return {tape.leaf(x), state.t};
}

PlantState Plant::store(const StateVars& s) {
  PlantState out;
  const auto x = s.state.value();
  std::copy(x.begin(), x.begin() + 2, out.q.begin());
  std::copy(x.begin() + 2, x.begin() + 4, out.qdot.begin());
  std::copy(x.begin() + 4, x.end(), out.a.begin());
  out.t = s.t;
  return out;
}

Sensed Plant::sense(const StateVars& s) const {
  if (s.state.size() != kStateSize) throw ContractError("plant: state must have 10 elements");
  using D = Dual<4>;
  const auto x = s.state.value();
  D in[4];
  for (std::size_t i = 0; i < 4; ++i) in[i] = D::variable(x[i], i);
  D out[kFeedbackSize];
  feedback_kernel(in, out);

  std::array<double, kFeedbackSize> value{};
  std::array<double, kFeedbackSize * kStateSize> jac{};
  for (std::size_t r = 0; r < kFeedbackSize; ++r) {
    value[r] = out[r].v;
    for (std::size_t c = 0; c < 4; ++c) jac[r * kStateSize + c] = out[r].d[c];
  }
  Sensed sensed;
  sensed.feedback = diff::linearised(s.state, value, jac);
  sensed.endpoint = diff::slice(sensed.feedback, 0, 2);
  return sensed;
}

Var Plant::observe(const Sensed& sensed, Var target) const {
  if (target.size() != 2) throw ContractError("plant: target must be a 2-vector");
  return diff::concat(target, sensed.feedback);
}

StateVars Plant::step(const StateVars& s, Var excitation, const Vec2& external_force) const {
  if (excitation.size() != kMuscles) throw ContractError("plant: excitation must have 6 elements");
  if (s.state.size() != kStateSize) throw ContractError("plant: state must have 10 elements");
  constexpr std::size_t n = kStateSize + kMuscles;
  using D = Dual<n>;
  const Var input = diff::concat(s.state, excitation);
  const auto x = input.value();
  D in[n];
  for (std::size_t i = 0; i < n; ++i) in[i] = D::variable(x[i], i);
  D out[kStateSize];
  step_kernel(in, external_force, out);

  std::array<double, kStateSize> value{};
  std::array<double, kStateSize * n> jac{};
  for (std::size_t r = 0; r < kStateSize; ++r) {
    value[r] = out[r].v;
    std::copy(out[r].d.begin(), out[r].d.end(), jac.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return {diff::linearised(input, value, jac), s.t + 1};
}

PlantState Plant::step(const PlantState& s, const Vec6& excitation, const Vec2& external_force) const {
  double in[kStateSize + kMuscles];
  std::copy(s.q.begin(), s.q.end(), in);
  std::copy(s.qdot.begin(), s.qdot.end(), in + 2);
  std::copy(s.a.begin(), s.a.end(), in + 4);
  std::copy(excitation.begin(), excitation.end(), in + 10);
  double out[kStateSize];
  step_kernel(in, external_force, out);
  for (double v : out) {
    if (!std::isfinite(v)) throw NumericError("plant: non-finite state after step " + std::to_string(s.t));
  }
  PlantState next;
  std::copy(out, out + 2, next.q.begin());
  std::copy(out + 2, out + 4, next.qdot.begin());
  std::copy(out + 4, out + 10, next.a.begin());
  next.t = s.t + 1;
  return next;
}

}  // namespace motorlab::plant
