#pragma once

#include <functional>
#include <span>
#include <vector>

#include "motorlab/diff/tape.hpp"

namespace motorlab::diff {

/// Builds a scalar on `tape` from a leaf holding the parameter vector.
using ScalarProgram = std::function<Var(Tape& tape, Var theta)>;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Compares the reverse-mode gradient of `f` at `theta` with central
/// differences of step h. Relative error per coordinate is
/// |analytic - numeric| / max(1, |analytic|); a non-finite difference counts
/// as infinite error.
GradientCheck check_gradient(const ScalarProgram& f, std::span<const double> theta, double h = 1e-5);

/// Evaluates `f` at `theta` and returns the value.
double evaluate(const ScalarProgram& f, std::span<const double> theta);

}  // namespace motorlab::diff
