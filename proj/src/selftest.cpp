#include "motorlab/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "motorlab/diff/gradcheck.hpp"
#include "motorlab/rng.hpp"
#include "motorlab/training.hpp"

namespace motorlab::selftest {

namespace {

using plant::Mat2;
using plant::PlantConfig;
using plant::PlantState;
using plant::Vec2;
using plant::Vec6;

constexpr double kPi = std::numbers::pi;

std::string describe(double worst, double limit) {
  std::ostringstream s;
  s << "max relative error " << worst << " (limit " << limit << ")";
  return s.str();
}

CheckResult equilibrium() {
  const plant::Plant plant{PlantConfig{}};
  Rng rng(1);
  int violations = 0;
  for (int i = 0; i < 100; ++i) {
    PlantState s;
    s.q = {rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)};
    const PlantState next = plant.step(s, Vec6{}, Vec2{});
    if (next.q != s.q || next.qdot != s.qdot || next.a != s.a) ++violations;
  }
  return {"equilibrium at rest without drive", violations == 0,
          std::to_string(violations) + " of 100 resting states moved"};
}

CheckResult passivity() {
  PlantConfig cfg;
  cfg.arm.dt = 1e-4;
  const plant::Plant plant{cfg};
  Rng rng(2);
  int increases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    PlantState s;
    s.q = {rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)};
    s.qdot = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
    double energy = plant::kinetic_energy(s, cfg.arm);
    for (int t = 0; t < 200; ++t) {
      s = plant.step(s, Vec6{}, Vec2{});
      const double next = plant::kinetic_energy(s, cfg.arm);
      if (next > energy) ++increases;
      energy = next;
    }
  }
  return {"kinetic energy non-increasing without drive (dt=1e-4)", increases == 0,
          std::to_string(increases) + " increasing steps of 10000"};
}

CheckResult endpoint_jacobian() {
  const plant::ArmParams arm;
  Rng rng(3);
  const double h = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec2 q{rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)};
    const Mat2 j = plant::endpoint_jacobian(q, arm);
    for (std::size_t c = 0; c < 2; ++c) {
      Vec2 up = q, down = q;
      up[c] += h;
      down[c] -= h;
      const Vec2 pu = plant::forward_kinematics(up, arm);
      const Vec2 pd = plant::forward_kinematics(down, arm);
      for (std::size_t r = 0; r < 2; ++r) {
        const double fd = (pu[r] - pd[r]) / (2 * h);
        worst = std::max(worst, std::fabs(j[r][c] - fd) / std::max(1.0, std::fabs(j[r][c])));
      }
    }
  }
  return {"endpoint jacobian against finite differences", worst < 1e-6, describe(worst, 1e-6)};
}

CheckResult step_gradients() {
  const plant::Plant plant{PlantConfig{}};
  Rng rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    // theta = q, qdot, a, u with a and u away from the clamp kinks
    std::vector<double> theta;
    theta.push_back(rng.uniform(0.4, 1.8));
    theta.push_back(rng.uniform(0.6, 2.3));
    theta.push_back(rng.uniform(-2, 2));
    theta.push_back(rng.uniform(-2, 2));
    for (int m = 0; m < 6; ++m) theta.push_back(rng.uniform(0.05, 0.6));
    for (int m = 0; m < 6; ++m) theta.push_back(rng.uniform(0.05, 0.95));
    std::vector<double> w(plant::kMuscles);
    for (auto& x : w) x = rng.uniform(-1, 1);
    const Vec2 fext{rng.uniform(-4, 4), rng.uniform(-4, 4)};

    const diff::ScalarProgram f = [&](diff::Tape& tape, diff::Var t) {
      const plant::StateVars s{diff::slice(t, 0, plant::kStateSize), 0};
      const auto next = plant.step(s, diff::slice(t, plant::kStateSize, plant::kMuscles), fext);
      const auto after = plant.sense(next);
      const auto qdot = next.qdot();
      return diff::sum(after.feedback * after.feedback) + diff::sum(qdot * qdot) + diff::sum(next.a() * tape.leaf(w));
    };
    worst = std::max(worst, diff::check_gradient(f, theta).max_relative_error);
  }
  return {"step gradients against finite differences", worst < 1e-4, describe(worst, 1e-4)};
}

CheckResult activation_bounds() {
  const plant::Plant plant{PlantConfig{}};
  Rng rng(5);
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    PlantState s;
    s.q = {rng.uniform(0.4, 1.8), rng.uniform(0.6, 2.3)};
    for (int t = 0; t < 100; ++t) {
      Vec6 u{};
      for (auto& x : u) x = rng.uniform() < 0.3 ? std::round(rng.uniform()) : rng.uniform();
      s = plant.step(s, u, Vec2{rng.uniform(-4, 4), rng.uniform(-4, 4)});
      for (double a : s.a) {
        if (!(a >= 0.0 && a <= 1.0)) ++violations;
      }
    }
  }
  return {"activations stay in [0, 1]", violations == 0, std::to_string(violations) + " out-of-range activations"};
}

}  // namespace

std::vector<CheckResult> gradient_suite(const GradientSuiteConfig& cfg) {
  const training::Environment env;
  std::vector<CheckResult> out;
  Rng rng(cfg.seed);
  for (auto kind : {network::Kind::Unilateral, network::Kind::Bilateral, network::Kind::BilateralCC}) {
    network::ArchitectureConfig arch;
    arch.kind = kind;
    for (auto profile : {losses::Profile::Dominant, losses::Profile::NonDominant, losses::Profile::Combined}) {
      double worst = 0.0;
      for (int i = 0; i < cfg.pairs; ++i) {
        const auto params = network::init(arch, rng.next_u64());
        const auto task = i % 2 == 0 ? tasks::TaskKind::Reach : tasks::TaskKind::Hold;
        auto spec = tasks::sample_trial(task, rng.split(rng.next_u64()), env.task, env.plant.config().arm);
        spec.timesteps = cfg.steps;
        const diff::ScalarProgram f = [&](diff::Tape& tape, diff::Var theta) {
          const auto bound = network::bind(params, theta);
          const auto run = tasks::rollout(tape, env.plant, params, bound, spec);
          return losses::composite_loss(run, params, bound, env.loss.weights(profile),
                                        losses::penalty_scope(profile, arch), env.loss.penalty_lambda);
        };
        worst = std::max(worst, diff::check_gradient(f, params.values, cfg.h).max_relative_error);
      }
      out.push_back({std::string(network::to_string(kind)) + "/" + std::string(losses::to_string(profile)),
                     worst < cfg.tolerance, describe(worst, cfg.tolerance)});
    }
  }
  return out;
}

std::vector<CheckResult> physics_suite() {
  return {equilibrium(), passivity(), endpoint_jacobian(), step_gradients(), activation_bounds()};
}

}  // namespace motorlab::selftest
