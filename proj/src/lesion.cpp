#include "motorlab/lesion.hpp"

#include <algorithm>
#include <string>

#include "motorlab/error.hpp"
#include "motorlab/rng.hpp"

namespace motorlab::lesion {

using network::NetworkParams;

std::string_view to_string(LesionKind k) {
  switch (k) {
    case LesionKind::ShallowDominant: return "shallow_dominant";
    case LesionKind::ShallowNonDominant: return "shallow_nondominant";
    case LesionKind::DeepDominant: return "deep_dominant";
    case LesionKind::DeepNonDominant: return "deep_nondominant";
    case LesionKind::CorpusCallosum: return "corpus_callosum";
    case LesionKind::CCDeepDominant: return "cc_deep_dominant";
    case LesionKind::CCDeepNonDominant: return "cc_deep_nondominant";
  }
  return "?";
}

LesionKind parse_lesion(std::string_view s) {
  for (auto k : kAllLesions) {
    if (to_string(k) == s) return k;
  }
  throw ContractError("lesion: unknown lesion kind '" + std::string(s) + "'");
}

bool involves_callosum(LesionKind k) {
  return k == LesionKind::CorpusCallosum || k == LesionKind::CCDeepDominant || k == LesionKind::CCDeepNonDominant;
}

bool valid_for(LesionKind k, network::Kind arch) {
  if (arch == network::Kind::Unilateral) return false;
  return !involves_callosum(k) || arch == network::Kind::BilateralCC;
}

std::vector<LesionKind> lesions_for(network::Kind arch) {
  std::vector<LesionKind> out;
  std::copy_if(kAllLesions.begin(), kAllLesions.end(), std::back_inserter(out),
               [&](LesionKind k) { return valid_for(k, arch); });
  return out;
}

namespace {

void shallow(NetworkParams& p, std::string_view side) {
  auto w = p.data(std::string(side) + ".hidden1.weight");
  std::fill(w.begin(), w.end(), 0.0);
}

void deep(NetworkParams& p, std::string_view side) {
  const std::size_t i = p.index_of("mix." + std::string(side));
  p.data(i)[0] = 0.0;
  p.frozen[i] = 1;
}

}  // namespace

NetworkParams apply_lesion(NetworkParams params, LesionKind kind) {
  if (!valid_for(kind, params.arch.kind)) {
    throw ContractError("lesion: " + std::string(to_string(kind)) + " is not defined for a " +
                        std::string(network::to_string(params.arch.kind)) + " network");
  }
  switch (kind) {
    case LesionKind::ShallowDominant: shallow(params, "dominant"); break;
    case LesionKind::ShallowNonDominant: shallow(params, "nondominant"); break;
    case LesionKind::DeepDominant: deep(params, "dominant"); break;
    case LesionKind::DeepNonDominant: deep(params, "nondominant"); break;
    case LesionKind::CorpusCallosum: params.callosum = false; break;
    case LesionKind::CCDeepDominant:
      params.callosum = false;
      deep(params, "dominant");
      break;
    case LesionKind::CCDeepNonDominant:
      params.callosum = false;
      deep(params, "nondominant");
      break;
  }
  return params;
}

NetworkParams retrain_output_layer(NetworkParams params, LesionKind kind, const training::TrainConfig& cfg,
                                   const training::Environment& env) {
  const auto kept = params.frozen;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    const auto& name = params.tensors[t].name;
    if (name != "output.weight" && name != "output.bias") params.frozen[t] = 1;
  }
  training::TrainConfig rc = cfg;
  rc.mode = training::LossMode::Single;
  rc.profile = losses::Profile::Combined;
  const Rng stream =
      Rng(cfg.seed).split({tag(StreamTag::Retrain), static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(cfg.task)});
  auto opt = training::make_adam_state(params);
  training::train_epoch(params, opt, rc, env, stream, 1);
  params.frozen = kept;
  return params;
}

std::vector<LesionRow> lesion_suite(const NetworkParams& trained, const training::TrainConfig& cfg,
                                    const training::Environment& env, const TestSets& tests) {
  std::vector<LesionRow> rows;
  auto score = [&](const NetworkParams& p, std::optional<LesionKind> kind) {
    for (auto task : {tasks::TaskKind::Reach, tasks::TaskKind::Hold}) {
      const auto& trials = task == tasks::TaskKind::Reach ? tests.reach : tests.hold;
      rows.push_back({kind, task, training::summarize(training::evaluate(p, env, trials, cfg.threads))});
    }
  };
  score(trained, std::nullopt);
  for (auto kind : lesions_for(trained.arch.kind)) {
    score(retrain_output_layer(apply_lesion(trained, kind), kind, cfg, env), kind);
  }
  return rows;
}

}  // namespace motorlab::lesion
