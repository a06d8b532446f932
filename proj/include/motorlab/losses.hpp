#pragma once

// Position, effort and weight-size losses and their weighted profiles.
// Every time-indexed term is a mean over the timesteps of a rollout.

#include <span>
#include <string_view>

#include "motorlab/diff/tape.hpp"
#include "motorlab/network.hpp"
#include "motorlab/tasks.hpp"

namespace motorlab::losses {

struct LossWeights {
  double cart1 = 0.0;  // absolute position error
  double cart2 = 0.0;  // squared position error
  double act = 0.0;    // squared muscle activation
  double wp = 0.0;     // weight penalty

  static constexpr LossWeights dominant() { return {0.0, 5.0, 2.0, 0.0}; }
  static constexpr LossWeights non_dominant() { return {5.0, 0.0, 0.0, 2.0}; }
  static constexpr LossWeights combined() { return {2.5, 2.5, 1.0, 1.0}; }

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

enum class Profile { Dominant, NonDominant, Combined };

std::string_view to_string(Profile p);
Profile parse_profile(std::string_view s);

/// Set of parameter groups a weight penalty covers.
class GroupSet {
 public:
  constexpr GroupSet() = default;
  static constexpr GroupSet all() { return GroupSet(0b111); }
  static constexpr GroupSet only(network::Group g) { return GroupSet(bit(g)); }

  [[nodiscard]] constexpr bool contains(network::Group g) const { return (mask_ & bit(g)) != 0; }

 private:
  constexpr explicit GroupSet(unsigned mask) : mask_(mask) {}
  static constexpr unsigned bit(network::Group g) { return 1u << static_cast<unsigned>(g); }
  unsigned mask_ = 0;
};

struct LossConfig {
  LossWeights dominant = LossWeights::dominant();
  LossWeights non_dominant = LossWeights::non_dominant();
  LossWeights combined = LossWeights::combined();
  double penalty_lambda = 1e-3;

  [[nodiscard]] const LossWeights& weights(Profile p) const;
};

/// Groups penalised under a profile. The non-dominant profile penalises the
/// non-dominant hemisphere of a bilateral network, or the whole of a
/// unilateral one; the other profiles cover every group.
GroupSet penalty_scope(Profile p, const network::ArchitectureConfig& arch);

diff::Var cartesian_l1(std::span<const diff::Var> endpoints, diff::Var target);
diff::Var cartesian_l2(std::span<const diff::Var> endpoints, diff::Var target);
diff::Var muscle_activation_loss(std::span<const diff::Var> activations);
/// lambda * sum of squared entries of every weight matrix in scope. Biases
/// and mixing scalars are not penalised.
diff::Var weight_penalty(const network::NetworkParams& params, const network::BoundParams& bound, GroupSet scope,
                         double lambda);

struct LossTerms {
  diff::Var cart1, cart2, act, wp;
};

LossTerms loss_terms(const tasks::TapedRollout& r, const network::NetworkParams& params,
                     const network::BoundParams& bound, GroupSet scope, double lambda);
diff::Var weighted(const LossTerms& terms, const LossWeights& w);

diff::Var composite_loss(const tasks::TapedRollout& r, const network::NetworkParams& params,
                         const network::BoundParams& bound, const LossWeights& w, GroupSet scope, double lambda);

// Plain evaluations on recorded trajectories.
double cartesian_l1(const tasks::Trajectory& traj);
double cartesian_l2(const tasks::Trajectory& traj);
double muscle_activation_loss(const tasks::Trajectory& traj);
double weight_penalty(const network::NetworkParams& params, GroupSet scope, double lambda);
double composite_loss(const tasks::Trajectory& traj, const network::NetworkParams& params, const LossWeights& w,
                      GroupSet scope, double lambda);

}  // namespace motorlab::losses
