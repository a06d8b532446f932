// motorlab: train, evaluate and lesion single networks, run whole
// experiments, and rebuild their reports.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "motorlab/error.hpp"
#include "motorlab/experiment.hpp"
#include "motorlab/lesion.hpp"
#include "motorlab/report.hpp"
#include "motorlab/selftest.hpp"

namespace fs = std::filesystem;
using namespace motorlab;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON configuration file (defaults when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "override a configuration key, e.g. train.lr=0.002");
}

experiment::ExperimentConfig load(const Common& c) {
  auto cfg = c.config.empty() ? experiment::ExperimentConfig{} : experiment::load_config(c.config);
  for (const auto& o : c.overrides) experiment::apply_override(cfg, o);
  return cfg;
}

void print_summary(const char* label, const training::MetricSummary& s) {
  std::printf("%-24s trials %d  goal completion %.4f  speed ", label, s.trials, s.goal_completion);
  if (s.speed_mean) {
    std::printf("%.5f +- %.5f", *s.speed_mean, s.speed_sd);
  } else {
    std::printf("n/a");
  }
  std::printf("  time in goal %.2f +- %.2f\n", s.time_in_goal_mean, s.time_in_goal_sd);
}

int run_train(const Common& c, const std::string& model_name, const std::string& task_name, std::uint64_t seed,
              const std::string& out) {
  const auto cfg = load(c);
  const auto model = experiment::parse_model(model_name);
  const auto task = tasks::parse_task(task_name);
  const auto tc = cfg.train_config(model, task, seed);
  const auto fitted = training::fit(cfg.architecture(model), tc, cfg.environment());
  for (const auto& e : fitted.record.epochs) {
    std::printf("epoch %3d  train %.6f  val %.6f  %.1fs\n", e.epoch, e.train_loss, e.val_loss, e.wall_seconds);
  }
  std::printf("best epoch %d  val %.6f\n", fitted.record.best_epoch, fitted.record.best_val_loss);
  experiment::write_file(out, [&] {
    std::ostringstream s;
    network::save(fitted.params, s);
    return s.str();
  }());
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int run_evaluate(const Common& c, const std::string& checkpoint, const std::string& task_name,
                 const std::string& csv) {
  const auto cfg = load(c);
  const auto params = network::load_file(checkpoint);
  const auto task = tasks::parse_task(task_name);
  const auto env = cfg.environment();
  const auto trials = training::test_set(env, task, cfg.test_trials, cfg.test_seed);
  const auto metrics = training::evaluate(params, env, trials, cfg.threads);
  print_summary(std::string(tasks::to_string(task)).c_str(), training::summarize(metrics));
  if (!csv.empty()) {
    const experiment::RunKey key{experiment::Model::UniB, task, 0};
    experiment::write_file(csv, experiment::trials_csv(key, trials, metrics));
  }
  return 0;
}

int run_lesion(const Common& c, const std::string& checkpoint, const std::string& task_name, std::uint64_t seed) {
  const auto cfg = load(c);
  const auto params = network::load_file(checkpoint);
  if (!params.arch.bilateral()) throw ContractError("lesion: checkpoint holds a unilateral network");
  const auto env = cfg.environment();
  auto tc = cfg.train;
  tc.task = tasks::parse_task(task_name);
  tc.seed = seed;
  tc.threads = cfg.threads;
  const lesion::TestSets tests{training::test_set(env, tasks::TaskKind::Reach, cfg.test_trials, cfg.test_seed),
                               training::test_set(env, tasks::TaskKind::Hold, cfg.test_trials, cfg.test_seed)};
  for (const auto& row : lesion::lesion_suite(params, tc, env, tests)) {
    const std::string label = std::string(row.kind ? lesion::to_string(*row.kind) : "intact") + "/" +
                              std::string(tasks::to_string(row.task));
    print_summary(label.c_str(), row.summary);
  }
  return 0;
}

int run_experiment(const Common& c, const std::string& out, int seeds, bool resume, int workers) {
  auto cfg = load(c);
  if (seeds > 0) {
    cfg.seeds.clear();
    for (int s = 0; s < seeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (workers > 0) cfg.workers = workers;
  experiment::RunOptions opts;
  opts.resume = resume;
  opts.progress = [](const experiment::RunRecord& r, std::size_t done, std::size_t total) {
    std::printf("[%zu/%zu] %s %s", done, total, r.key.id().c_str(), r.ok ? "ok" : "FAILED");
    if (r.ok) {
      std::printf("  epochs %d  goal completion %.3f  time in goal %.1f\n", r.epochs_trained, r.goal_completion,
                  r.time_in_goal.mean);
    } else {
      std::printf("  %s\n", r.error.c_str());
    }
    std::fflush(stdout);
  };
  const auto result = experiment::run_experiment(cfg, out, opts);
  const auto rep = report::emit_report(out);
  std::printf("report written to %s\n", out.c_str());
  if (!result.all_ok() || !rep.failed.empty() || !rep.missing.empty()) {
    std::fprintf(stderr, "%zu failed, %zu missing run(s)\n", rep.failed.size(), rep.missing.size());
    return 1;
  }
  return 0;
}

int run_report(const std::string& dir) {
  const auto rep = report::emit_report(dir);
  for (const auto& id : rep.missing) std::printf("missing: %s\n", id.c_str());
  for (const auto& id : rep.failed) std::printf("failed: %s\n", id.c_str());
  std::printf("report written to %s\n", dir.c_str());
  return rep.missing.empty() && rep.failed.empty() ? 0 : 1;
}

int run_selftest(const std::string& suite) {
  std::vector<selftest::CheckResult> results;
  if (suite == "physics" || suite == "all") {
    for (auto& r : selftest::physics_suite()) results.push_back(std::move(r));
  }
  if (suite == "gradient" || suite == "all") {
    for (auto& r : selftest::gradient_suite()) results.push_back(std::move(r));
  }
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-link arm reaching and holding with unilateral and bilateral controllers"};
  app.require_subcommand(1);

  Common train_common;
  std::string model = "Uni-B", task = "reach", out, checkpoint, csv;
  std::uint64_t seed = 0;
  auto* train = app.add_subcommand("train", "fit one model on one task and save a checkpoint");
  add_common(train, train_common);
  train->add_option("--model", model, "Uni-B, Uni-DL, Uni-NDL, Bi-NS, Bi-S, CC-NS or CC-S");
  train->add_option("--task", task, "reach or hold");
  train->add_option("--seed", seed);
  train->add_option("--out", out, "checkpoint path")->required();

  Common eval_common;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the held-out test set");
  add_common(evaluate, eval_common);
  evaluate->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--task", task, "reach or hold");
  evaluate->add_option("--csv", csv, "write per-trial metrics here");

  Common lesion_common;
  auto* lesion_cmd = app.add_subcommand("lesion", "lesion a bilateral checkpoint, retrain its output, evaluate");
  add_common(lesion_cmd, lesion_common);
  lesion_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  lesion_cmd->add_option("--task", task, "task the network was trained on (used for retraining)");
  lesion_cmd->add_option("--seed", seed, "seed of the retraining trial stream");

  Common exp_common;
  int seeds = 0, workers = 0;
  bool resume = false;
  auto* exp = app.add_subcommand("experiment", "train, evaluate and lesion every configured run, then report");
  add_common(exp, exp_common);
  exp->add_option("--out", out, "output directory")->required();
  exp->add_option("--seeds", seeds, "use seeds 0..N-1")->check(CLI::PositiveNumber);
  exp->add_option("--workers", workers, "concurrent runs")->check(CLI::PositiveNumber);
  exp->add_flag("--resume", resume, "keep completed runs of an earlier invocation");

  std::string dir;
  auto* rep = app.add_subcommand("report", "rebuild summary.json, plots and README.txt of an experiment");
  rep->add_option("dir", dir, "experiment directory")->required()->check(CLI::ExistingDirectory);

  std::string suite = "all";
  auto* self = app.add_subcommand("selftest", "run the gradient and physics invariant suites");
  self->add_option("--suite", suite)->check(CLI::IsMember({"all", "gradient", "physics"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_common, model, task, seed, out);
    if (*evaluate) return run_evaluate(eval_common, checkpoint, task, csv);
    if (*lesion_cmd) return run_lesion(lesion_common, checkpoint, task, seed);
    if (*exp) return run_experiment(exp_common, out, seeds, resume, workers);
    if (*rep) return run_report(dir);
    if (*self) return run_selftest(suite);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
