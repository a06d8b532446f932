#pragma once

// Invariant suites runnable outside the unit tests: gradient correctness of
// whole rollouts and the plant's physical invariants.

#include <string>
#include <vector>

namespace motorlab::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct GradientSuiteConfig {
  int pairs = 20;  // random (params, trial) pairs per kind and profile
  int steps = 5;
  double h = 1e-6;
  double tolerance = 1e-4;
  unsigned long long seed = 2024;
};

/// One check per (architecture kind, loss profile): BPTT gradient of the
/// composite loss against central differences.
std::vector<CheckResult> gradient_suite(const GradientSuiteConfig& cfg = {});

/// Equilibrium, passivity, Jacobians against finite differences and
/// activation bounds on the default plant.
std::vector<CheckResult> physics_suite();

}  // namespace motorlab::selftest
