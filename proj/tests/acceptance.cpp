// Acceptance checks. Prints one PASS/FAIL line per criterion, preceded by
// indented detail lines, and exits non-zero when any criterion fails.
//
// Criteria 5-7 need the full experiment (7 models x 2 tasks x 10 seeds).
// It is run with resume into --full-dir, so an interrupted or earlier
// invocation is picked up where it stopped.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "motorlab/experiment.hpp"
#include "motorlab/lesion.hpp"
#include "motorlab/report.hpp"
#include "motorlab/rng.hpp"
#include "motorlab/selftest.hpp"
#include "motorlab/stats.hpp"

namespace fs = std::filesystem;
using namespace motorlab;
using experiment::Model;
using lesion::LesionKind;
using tasks::TaskKind;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool passed = true;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what) {
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    passed = passed && ok;
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double mean(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// --- 1, 2 -----------------------------------------------------------------

Outcome gradients() {
  Outcome out;
  const auto t0 = Clock::now();
  for (const auto& r : selftest::gradient_suite()) out.require(r.passed, r.name + ": " + r.detail);
  const double s = seconds_since(t0);
  out.require(s < 60.0, "runtime " + num(s, 1) + " s (limit 60 s)");
  return out;
}

Outcome physics() {
  Outcome out;
  const auto t0 = Clock::now();
  for (const auto& r : selftest::physics_suite()) out.require(r.passed, r.name + ": " + r.detail);
  const double s = seconds_since(t0);
  out.require(s < 60.0, "runtime " + num(s, 1) + " s (limit 60 s)");
  return out;
}

// --- 3, 4 -----------------------------------------------------------------

Outcome callosum_lesion() {
  Outcome out;
  network::ArchitectureConfig arch;
  arch.kind = network::Kind::BilateralCC;
  auto cc = network::init(arch, 77);
  Rng perturb(78);
  for (auto& v : cc.values) v += perturb.uniform(-0.3, 0.3);
  const auto lesioned = lesion::apply_lesion(cc, LesionKind::CorpusCallosum);
  auto plain = cc;
  plain.arch.kind = network::Kind::Bilateral;
  plain.callosum = false;

  Rng rng(79);
  int identical = 0, intact_differs = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(plant::kObservationSize);
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    const auto y = network::forward(lesioned, x);
    if (y == network::forward(plain, x)) ++identical;
    if (y != network::forward(cc, x)) ++intact_differs;
  }
  out.require(identical == 1000, std::to_string(identical) + "/1000 outputs bit-identical to the plain bilateral net");
  out.require(intact_differs > 0, "the intact callosum changes the output on " + std::to_string(intact_differs) +
                                      "/1000 inputs");
  return out;
}

// Counts scalars from the layer shapes alone.
std::size_t oracle_count(network::Kind kind, std::size_t units, std::size_t layers) {
  const std::size_t in = plant::kObservationSize, outputs = plant::kMuscles;
  auto dense = [](std::size_t fan_in, std::size_t fan_out) { return fan_in * fan_out + fan_out; };
  if (kind == network::Kind::Unilateral) {
    std::size_t n = dense(in, units);
    for (std::size_t l = 1; l < layers; ++l) n += dense(units, units);
    return n + dense(units, outputs);
  }
  const std::size_t half = units / 2;
  std::size_t side = dense(in, half);
  for (std::size_t l = 1; l < layers; ++l) side += dense(half, half);
  return 2 * side + 2 + dense(half, outputs);
}

Outcome parameter_counts() {
  Outcome out;
  std::map<network::Kind, std::size_t> counts;
  for (auto kind : {network::Kind::Unilateral, network::Kind::Bilateral, network::Kind::BilateralCC}) {
    network::ArchitectureConfig arch;
    arch.kind = kind;
    const auto params = network::init(arch, 1);
    counts[kind] = params.values.size();
    const std::size_t oracle = oracle_count(kind, 10, 2);
    out.require(params.values.size() == oracle && network::param_count(arch) == oracle,
                std::string(network::to_string(kind)) + "(10,2): " + std::to_string(params.values.size()) +
                    " scalars, oracle " + std::to_string(oracle));
  }
  out.require(counts[network::Kind::Unilateral] == 346, "unilateral = 346");
  out.require(counts[network::Kind::Bilateral] == 268 && counts[network::Kind::BilateralCC] == 268,
              "bilateral = callosum = 268");
  out.require(counts[network::Kind::Bilateral] < counts[network::Kind::Unilateral], "bilateral < unilateral");
  return out;
}

// --- 5, 6, 7 --------------------------------------------------------------

const experiment::RunRecord* find(const report::LoadedRuns& runs, Model m, TaskKind t, std::uint64_t seed) {
  for (std::size_t i = 0; i < runs.keys.size(); ++i) {
    const auto& k = runs.keys[i];
    if (k.model == m && k.task == t && k.seed == seed && runs.records[i] && runs.records[i]->ok) {
      return &*runs.records[i];
    }
  }
  return nullptr;
}

// Per-seed values; a run without any completed trial has speed 0.
std::vector<double> speeds(const report::LoadedRuns& runs, Model m) {
  std::vector<double> out;
  for (auto seed : runs.config.seeds) {
    if (const auto* r = find(runs, m, TaskKind::Reach, seed)) out.push_back(r->speed_to_goal ? r->speed_to_goal->mean : 0.0);
  }
  return out;
}

std::vector<double> times_in_goal(const report::LoadedRuns& runs, Model m) {
  std::vector<double> out;
  for (auto seed : runs.config.seeds) {
    if (const auto* r = find(runs, m, TaskKind::Hold, seed)) out.push_back(r->time_in_goal.mean);
  }
  return out;
}

int count_greater(const std::vector<double>& a, const std::vector<double>& b) {
  int n = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) n += a[i] > b[i] ? 1 : 0;
  return n;
}

bool complete(const report::LoadedRuns& runs, Outcome& out, const std::vector<Model>& models) {
  std::size_t ok = 0, expected = 0;
  for (std::size_t i = 0; i < runs.keys.size(); ++i) {
    if (std::find(models.begin(), models.end(), runs.keys[i].model) == models.end()) continue;
    ++expected;
    ok += runs.records[i] && runs.records[i]->ok ? 1 : 0;
  }
  out.require(ok == expected, std::to_string(ok) + "/" + std::to_string(expected) + " runs completed");
  return ok == expected;
}

Outcome unilateral_specialisation(const report::LoadedRuns& runs) {
  Outcome out;
  if (!complete(runs, out, {Model::UniDL, Model::UniNDL})) return out;
  for (auto m : {Model::UniDL, Model::UniNDL}) {
    const double gc = mean(report::per_seed(runs, m, TaskKind::Reach, report::Metric::GoalCompletion));
    out.require(gc >= 0.90, "(a) " + std::string(experiment::to_string(m)) + " reach goal completion " + num(gc, 3) +
                                " (need >= 0.900)");
  }
  const auto sd = speeds(runs, Model::UniDL), sn = speeds(runs, Model::UniNDL);
  const int faster = count_greater(sd, sn);
  out.require(mean(sd) >= 1.05 * mean(sn), "(b) mean speed Uni-DL " + num(mean(sd), 5) + " vs Uni-NDL " +
                                               num(mean(sn), 5) + ", ratio " + num(mean(sd) / mean(sn), 3) +
                                               " (need >= 1.050)");
  out.require(faster >= 7, "(b) Uni-DL faster on " + std::to_string(faster) + "/10 seeds (need >= 7)");
  const auto td = times_in_goal(runs, Model::UniDL), tn = times_in_goal(runs, Model::UniNDL);
  const int longer = count_greater(tn, td);
  out.require(mean(tn) >= 1.15 * mean(td), "(c) mean hold time in goal Uni-NDL " + num(mean(tn), 2) + " vs Uni-DL " +
                                               num(mean(td), 2) + ", ratio " + num(mean(tn) / mean(td), 3) +
                                               " (need >= 1.150)");
  out.require(longer >= 7, "(c) Uni-NDL holds longer on " + std::to_string(longer) + "/10 seeds (need >= 7)");
  return out;
}

// Metric of the hemisphere left standing after a deep lesion of the other,
// evaluated on the task the network was trained on.
double alone(const experiment::RunRecord& r, LesionKind kind) {
  for (const auto& row : r.lesions) {
    if (row.kind != kind || row.task != r.key.task) continue;
    if (r.key.task == TaskKind::Reach) return row.summary.speed_mean.value_or(0.0);
    return row.summary.time_in_goal_mean;
  }
  return 0.0;
}

// Per seed: (dominant alone, non-dominant alone).
std::vector<std::pair<double, double>> hemispheres(const report::LoadedRuns& runs, Model m, TaskKind t) {
  std::vector<std::pair<double, double>> out;
  for (auto seed : runs.config.seeds) {
    if (const auto* r = find(runs, m, t, seed)) {
      out.emplace_back(alone(*r, LesionKind::DeepNonDominant), alone(*r, LesionKind::DeepDominant));
    }
  }
  return out;
}

Outcome bilateral_lesions(const report::LoadedRuns& runs) {
  Outcome out;
  if (!complete(runs, out, {Model::BiS, Model::BiNS})) return out;
  const auto reach = hemispheres(runs, Model::BiS, TaskKind::Reach);
  const auto hold = hemispheres(runs, Model::BiS, TaskKind::Hold);
  const int dom_faster =
      static_cast<int>(std::count_if(reach.begin(), reach.end(), [](const auto& p) { return p.first > p.second; }));
  const int ndom_longer =
      static_cast<int>(std::count_if(hold.begin(), hold.end(), [](const auto& p) { return p.second > p.first; }));
  const int n = static_cast<int>(runs.config.seeds.size());
  out.require(2 * dom_faster > n, "Bi-S reach: dominant alone faster on " + std::to_string(dom_faster) + "/" +
                                      std::to_string(n) + " seeds (need a majority)");
  out.require(2 * ndom_longer > n, "Bi-S hold: non-dominant alone holds longer on " + std::to_string(ndom_longer) +
                                       "/" + std::to_string(n) + " seeds (need a majority)");
  for (auto t : {TaskKind::Reach, TaskKind::Hold}) {
    auto gap = [&](Model m) {
      std::vector<double> g;
      for (const auto& [dom, ndom] : hemispheres(runs, m, t)) g.push_back(t == TaskKind::Reach ? dom - ndom : ndom - dom);
      return std::fabs(mean(g));
    };
    const double s = gap(Model::BiS), ns = gap(Model::BiNS);
    const std::string label = t == TaskKind::Reach ? "reach speed" : "hold time in goal";
    out.require(ns < s, "|mean hemisphere gap| on " + label + ": Bi-NS " + num(ns, 5) + " < Bi-S " + num(s, 5));
  }
  return out;
}

Outcome bilateral_vs_unilateral(const report::LoadedRuns& runs) {
  Outcome out;
  if (!complete(runs, out, {experiment::kAllModels.begin(), experiment::kAllModels.end()})) return out;
  std::vector<stats::NamedSample> groups;
  for (auto m : experiment::kAllModels) {
    groups.emplace_back(std::string(experiment::to_string(m)), times_in_goal(runs, m));
  }
  const auto rows = stats::pairwise_stats(groups);
  out.note("Holm family: all " + std::to_string(rows.size()) + " model pairs on hold time in goal");
  const double base = mean(times_in_goal(runs, Model::UniB));
  for (auto m : {Model::BiNS, Model::BiS, Model::CCNS, Model::CCS}) {
    const std::string name(experiment::to_string(m));
    const auto it = std::find_if(rows.begin(), rows.end(), [&](const stats::PairwiseRow& r) {
      return (r.a == "Uni-B" && r.b == name) || (r.a == name && r.b == "Uni-B");
    });
    const double mm = mean(times_in_goal(runs, m));
    const bool ok = it != rows.end() && it->computable && mm > base && it->p_holm < 0.05;
    out.require(ok, name + " " + num(mm, 2) + " vs Uni-B " + num(base, 2) +
                        (it != rows.end() && it->computable ? ", p_holm " + num(it->p_holm, 5) : ", not computable") +
                        " (need higher and p_holm < 0.05)");
  }
  return out;
}

// --- 8, 9 -----------------------------------------------------------------

experiment::ExperimentConfig pinned_mini() {
  experiment::ExperimentConfig c;
  c.models = {Model::UniB, Model::BiS};
  c.seeds = {0, 1};
  c.train.max_epochs = 5;
  c.train.batches_per_epoch = 32;
  c.train.val_trials = 64;
  c.test_trials = 200;
  return c;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel.rfind("timing/", 0) == 0) continue;  // wall-clock seconds
    out[rel] = experiment::read_file(e.path());
  }
  return out;
}

Outcome determinism(const fs::path& root) {
  Outcome out;
  const auto t0 = Clock::now();
  const auto cfg = pinned_mini();
  auto threaded = cfg;
  threaded.threads = 3;
  threaded.workers = 2;
  std::vector<std::map<std::string, std::string>> snaps;
  int max_epochs = 0;
  for (const auto& [name, c] : {std::pair{"first", cfg}, std::pair{"second", cfg}, std::pair{"threaded", threaded}}) {
    const auto dir = root / name;
    fs::remove_all(dir);
    const auto res = experiment::run_experiment(c, dir);
    report::emit_report(dir);
    out.require(res.all_ok(), std::string(name) + ": " + std::to_string(res.records.size()) + " runs ok");
    for (const auto& r : res.records) max_epochs = std::max(max_epochs, r.epochs_trained);
    snaps.push_back(snapshot(dir));
  }
  out.note(std::to_string(snaps[0].size()) + " output files compared (timing/ excluded)");
  out.require(snaps[0] == snaps[1], "two invocations byte-identical");
  out.require(snaps[0] == snaps[2], "threads=3, workers=2 byte-identical to threads=1, workers=1");
  out.require(max_epochs <= 5, "at most 5 epochs per run (max " + std::to_string(max_epochs) + ")");
  const double s = seconds_since(t0);
  out.require(s < 300.0, "runtime " + num(s, 1) + " s (limit 300 s)");
  return out;
}

Outcome early_stopping(const std::vector<const report::LoadedRuns*>& experiments) {
  Outcome out;
  const std::vector<double> curve{1.0, 0.9, 0.95, 0.96, 0.97, 0.5, 0.4};
  network::ArchitectureConfig arch;
  auto start = network::zeros(arch);
  int epochs_run = 0;
  const auto res = training::early_stopping(
      start, 100, 3,
      [&](network::NetworkParams& p, int epoch) {
        ++epochs_run;
        p.values[0] = epoch;
        return 0.0;
      },
      [&](const network::NetworkParams& p) { return curve.at(static_cast<std::size_t>(p.values[0]) - 1); });
  out.require(epochs_run == 5 && res.record.epochs.size() == 5,
              "synthetic curve stops after epoch " + std::to_string(epochs_run));
  out.require(res.record.best_epoch == 2 && res.params.values[0] == 2.0,
              "parameters restored from epoch " + std::to_string(static_cast<int>(res.params.values[0])));
  int max_epochs = 0;
  std::size_t n = 0;
  for (const auto* runs : experiments) {
    for (const auto& r : runs->records) {
      if (!r) continue;
      ++n;
      max_epochs = std::max(max_epochs, r->epochs_trained);
    }
  }
  out.require(n > 0 && max_epochs <= 100,
              "max epochs over " + std::to_string(n) + " acceptance runs: " + std::to_string(max_epochs) + " (limit 100)");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string full_dir = "acceptance/full", mini_dir = "acceptance/mini";
  std::set<int> only;
  app.add_option("--full-dir", full_dir, "directory of the full experiment (resumed)");
  app.add_option("--mini-dir", mini_dir, "scratch directory of the determinism experiment");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int c) { return only.empty() || only.count(c) > 0; };

  std::map<int, std::pair<std::string, Outcome>> results;
  auto record = [&](int id, std::string title, Outcome o) {
    for (const auto& d : o.details) std::printf("  [%d] %s\n", id, d.c_str());
    std::printf("%s %d %s\n", o.passed ? "PASS" : "FAIL", id, title.c_str());
    std::fflush(stdout);
    results[id] = {std::move(title), std::move(o)};
  };

  if (wanted(1)) record(1, "gradient correctness", gradients());
  if (wanted(2)) record(2, "plant physics", physics());
  if (wanted(3)) record(3, "structural callosum lesion equivalence", callosum_lesion());
  if (wanted(4)) record(4, "parameter counts", parameter_counts());

  std::optional<report::LoadedRuns> full;
  if (wanted(5) || wanted(6) || wanted(7) || wanted(9)) {
    experiment::RunOptions opts;
    opts.resume = true;
    opts.progress = [](const experiment::RunRecord& r, std::size_t done, std::size_t total) {
      std::fprintf(stderr, "full experiment [%zu/%zu] %s %s\n", done, total, r.key.id().c_str(),
                   r.ok ? "ok" : r.error.c_str());
    };
    experiment::run_experiment(experiment::ExperimentConfig{}, full_dir, opts);
    report::emit_report(full_dir);
    full = report::load_runs(full_dir);
  }
  if (wanted(5)) record(5, "unilateral specialisation ordering", unilateral_specialisation(*full));
  if (wanted(6)) record(6, "bilateral lesion specialisation", bilateral_lesions(*full));
  if (wanted(7)) record(7, "bilateral beats unilateral on hold", bilateral_vs_unilateral(*full));
  std::optional<report::LoadedRuns> mini;
  if (wanted(8)) {
    record(8, "determinism regression", determinism(mini_dir));
    mini = report::load_runs(fs::path(mini_dir) / "first");
  }
  if (wanted(9)) {
    std::vector<const report::LoadedRuns*> exps{&*full};
    if (mini) exps.push_back(&*mini);
    record(9, "early stopping contract", early_stopping(exps));
  }

  int failed = 0;
  std::printf("\nsummary\n");
  for (const auto& [id, r] : results) {
    std::printf("%s %d %s\n", r.second.passed ? "PASS" : "FAIL", id, r.first.c_str());
    failed += r.second.passed ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
