#pragma once

// Lesions of bilateral networks and the output-layer retraining that follows
// them.
//
//  * Shallow: the hemisphere's input weights are zeroed, so its first layer
//    only passes on tanh(bias).
//  * Deep: the hemisphere's mixing scalar is zeroed and frozen. Its layers
//    keep computing and, in a BilateralCC net, still feed the callosum.
//  * CorpusCallosum: cross-hemisphere pooling is switched off.

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "motorlab/network.hpp"
#include "motorlab/tasks.hpp"
#include "motorlab/training.hpp"

namespace motorlab::lesion {

enum class LesionKind {
  ShallowDominant,
  ShallowNonDominant,
  DeepDominant,
  DeepNonDominant,
  CorpusCallosum,
  CCDeepDominant,
  CCDeepNonDominant,
};

inline constexpr std::array<LesionKind, 7> kAllLesions{
    LesionKind::ShallowDominant, LesionKind::ShallowNonDominant, LesionKind::DeepDominant,
    LesionKind::DeepNonDominant, LesionKind::CorpusCallosum,     LesionKind::CCDeepDominant,
    LesionKind::CCDeepNonDominant,
};

std::string_view to_string(LesionKind k);
LesionKind parse_lesion(std::string_view s);

bool involves_callosum(LesionKind k);
/// Shallow and deep kinds need a bilateral net; callosum kinds a BilateralCC one.
bool valid_for(LesionKind k, network::Kind arch);
/// Valid kinds for an architecture, in enumeration order.
std::vector<LesionKind> lesions_for(network::Kind arch);

/// Returns a lesioned copy. Throws ContractError for an invalid pairing.
network::NetworkParams apply_lesion(network::NetworkParams params, LesionKind kind);

/// One Combined-loss epoch on cfg.task with every tensor except the output
/// layer frozen. The trial stream is keyed by (cfg.seed, kind). Frozen flags
/// set by the lesion itself are kept.
network::NetworkParams retrain_output_layer(network::NetworkParams params, LesionKind kind,
                                            const training::TrainConfig& cfg, const training::Environment& env);

struct LesionRow {
  std::optional<LesionKind> kind;  // empty for the intact network
  tasks::TaskKind task = tasks::TaskKind::Reach;
  training::MetricSummary summary;
};

struct TestSets {
  std::vector<tasks::TrialSpec> reach;
  std::vector<tasks::TrialSpec> hold;
};

/// Intact rows for both tasks, then for each valid lesion: lesion, retrain,
/// evaluate on both tasks.
std::vector<LesionRow> lesion_suite(const network::NetworkParams& trained, const training::TrainConfig& cfg,
                                    const training::Environment& env, const TestSets& tests);

}  // namespace motorlab::lesion
