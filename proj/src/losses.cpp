#include "motorlab/losses.hpp"

#include "motorlab/error.hpp"

namespace motorlab::losses {

using diff::Var;

std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::Dominant: return "dl";
    case Profile::NonDominant: return "ndl";
    case Profile::Combined: return "combined";
  }
  return "?";
}

Profile parse_profile(std::string_view s) {
  for (auto p : {Profile::Dominant, Profile::NonDominant, Profile::Combined}) {
    if (s == to_string(p)) return p;
  }
  throw ContractError("losses: unknown profile '" + std::string(s) + "'");
}

const LossWeights& LossConfig::weights(Profile p) const {
  switch (p) {
    case Profile::Dominant: return dominant;
    case Profile::NonDominant: return non_dominant;
    case Profile::Combined: return combined;
  }
  return combined;
}

GroupSet penalty_scope(Profile p, const network::ArchitectureConfig& arch) {
  if (p == Profile::NonDominant && arch.bilateral()) return GroupSet::only(network::Group::NonDominant);
  return GroupSet::all();
}

namespace {

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw ContractError(std::string("losses: ") + what + " needs a non-empty trajectory");
}

template <typename PerStep>
Var time_mean(std::size_t n, PerStep&& per_step) {
  Var acc = per_step(0);
  for (std::size_t t = 1; t < n; ++t) acc = acc + per_step(t);
  return diff::scale(acc, 1.0 / static_cast<double>(n));
}

}  // namespace

Var cartesian_l1(std::span<const Var> endpoints, Var target) {
  require_nonempty(endpoints.size(), "cartesian_l1");
  return time_mean(endpoints.size(), [&](std::size_t t) { return diff::sum(diff::abs(endpoints[t] - target)); });
}

Var cartesian_l2(std::span<const Var> endpoints, Var target) {
  require_nonempty(endpoints.size(), "cartesian_l2");
  return time_mean(endpoints.size(), [&](std::size_t t) {
    const Var e = endpoints[t] - target;
    return diff::sum(e * e);
  });
}

Var muscle_activation_loss(std::span<const Var> activations) {
  require_nonempty(activations.size(), "muscle_activation_loss");
  return time_mean(activations.size(), [&](std::size_t t) { return diff::sum(activations[t] * activations[t]); });
}

Var weight_penalty(const network::NetworkParams& params, const network::BoundParams& bound, GroupSet scope,
                   double lambda) {
  Var acc;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const auto& t = params.tensors[i];
    if (t.role != network::Role::Weight || !scope.contains(t.group)) continue;
    const Var w = bound.tensors[i];
    const Var sq = diff::sum(w * w);
    acc = acc.valid() ? acc + sq : sq;
  }
  if (!acc.valid()) return bound.tensors.front().tape()->leaf(0.0);
  return diff::scale(acc, lambda);
}

LossTerms loss_terms(const tasks::TapedRollout& r, const network::NetworkParams& params,
                     const network::BoundParams& bound, GroupSet scope, double lambda) {
  return {cartesian_l1(r.endpoints, r.target), cartesian_l2(r.endpoints, r.target),
          muscle_activation_loss(r.activations), weight_penalty(params, bound, scope, lambda)};
}

Var weighted(const LossTerms& terms, const LossWeights& w) {
  return diff::scale(terms.cart1, w.cart1) + diff::scale(terms.cart2, w.cart2) + diff::scale(terms.act, w.act) +
         diff::scale(terms.wp, w.wp);
}

Var composite_loss(const tasks::TapedRollout& r, const network::NetworkParams& params,
                   const network::BoundParams& bound, const LossWeights& w, GroupSet scope, double lambda) {
  return weighted(loss_terms(r, params, bound, scope, lambda), w);
}

namespace {

// Rebuilds the tape view of a recorded trajectory.
tasks::TapedRollout replay(diff::Tape& tape, const tasks::Trajectory& traj) {
  tasks::TapedRollout r;
  r.target = tape.leaf(traj.spec.target);
  for (const auto& p : traj.endpoints) r.endpoints.push_back(tape.leaf(p));
  for (const auto& a : traj.activations) r.activations.push_back(tape.leaf(a));
  return r;
}

}  // namespace

double cartesian_l1(const tasks::Trajectory& traj) {
  diff::Tape tape;
  const auto r = replay(tape, traj);
  return cartesian_l1(r.endpoints, r.target).scalar();
}

double cartesian_l2(const tasks::Trajectory& traj) {
  diff::Tape tape;
  const auto r = replay(tape, traj);
  return cartesian_l2(r.endpoints, r.target).scalar();
}

double muscle_activation_loss(const tasks::Trajectory& traj) {
  diff::Tape tape;
  const auto r = replay(tape, traj);
  return muscle_activation_loss(r.activations).scalar();
}

double weight_penalty(const network::NetworkParams& params, GroupSet scope, double lambda) {
  diff::Tape tape;
  const auto bound = network::bind(params, tape.leaf(params.values));
  return weight_penalty(params, bound, scope, lambda).scalar();
}

double composite_loss(const tasks::Trajectory& traj, const network::NetworkParams& params, const LossWeights& w,
                      GroupSet scope, double lambda) {
  diff::Tape tape;
  const auto r = replay(tape, traj);
  const auto bound = network::bind(params, tape.leaf(params.values));
  return composite_loss(r, params, bound, w, scope, lambda).scalar();
}

}  // namespace motorlab::losses
