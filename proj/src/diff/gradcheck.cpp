#include "motorlab/diff/gradcheck.hpp"

#include <cmath>
#include <limits>

#include "motorlab/error.hpp"

namespace motorlab::diff {

double evaluate(const ScalarProgram& f, std::span<const double> theta) {
  Tape tape;
  const Var out = f(tape, tape.leaf(theta));
  return out.scalar();
}

GradientCheck check_gradient(const ScalarProgram& f, std::span<const double> theta, double h) {
  GradientCheck result;
  {
    Tape tape;
    const Var leaf = tape.leaf(theta);
    const Var out = f(tape, leaf);
    const Gradients g = tape.backward(out);
    const auto grad = g[leaf];
    result.analytic.assign(grad.begin(), grad.end());
  }

  std::vector<double> probe(theta.begin(), theta.end());
  result.numeric.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double err = 0.0;
    try {
      probe[i] = theta[i] + h;
      const double up = evaluate(f, probe);
      probe[i] = theta[i] - h;
      const double down = evaluate(f, probe);
      result.numeric[i] = (up - down) / (2.0 * h);
      err = std::fabs(result.analytic[i] - result.numeric[i]) / std::max(1.0, std::fabs(result.analytic[i]));
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    } catch (const NumericError&) {
      result.numeric[i] = std::numeric_limits<double>::quiet_NaN();
      err = std::numeric_limits<double>::infinity();
    }
    probe[i] = theta[i];
    if (err > result.max_relative_error || (i == 0 && err >= result.max_relative_error)) {
      result.max_relative_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace motorlab::diff
