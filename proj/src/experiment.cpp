#include "motorlab/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "motorlab/error.hpp"

namespace motorlab::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

json stat_json(const std::optional<MetricStat>& s) {
  if (!s) return nullptr;
  return {{"mean", s->mean}, {"sd", s->sd}};
}

std::optional<MetricStat> stat_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return MetricStat{j.at("mean").get<double>(), j.at("sd").get<double>()};
}

json summary_json(const training::MetricSummary& s) {
  std::optional<MetricStat> speed;
  if (s.speed_mean) speed = MetricStat{*s.speed_mean, s.speed_sd};
  return {{"trials", s.trials},
          {"goal_completion", s.goal_completion},
          {"speed_to_goal", stat_json(speed)},
          {"time_in_goal", stat_json(MetricStat{s.time_in_goal_mean, s.time_in_goal_sd})}};
}

training::MetricSummary summary_from(const json& j) {
  training::MetricSummary s;
  s.trials = j.at("trials");
  s.goal_completion = j.at("goal_completion");
  s.completed = static_cast<int>(std::lround(s.goal_completion * s.trials));
  if (const auto sp = stat_from(j.at("speed_to_goal"))) {
    s.speed_mean = sp->mean;
    s.speed_sd = sp->sd;
  }
  const auto tg = stat_from(j.at("time_in_goal"));
  s.time_in_goal_mean = tg->mean;
  s.time_in_goal_sd = tg->sd;
  return s;
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  // Execution settings do not change results and are left out.
  json j = json::parse(to_json_text(cfg));
  j.erase("workers");
  j.erase("threads");
  return j.dump(2) + "\n";
}

std::string training_csv(const training::TrainingRecord& rec) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& e : rec.epochs) {
    out += std::to_string(e.epoch) + "," + format_number(e.train_loss) + "," + format_number(e.val_loss) + "\n";
  }
  return out;
}

std::string timing_csv(const training::TrainingRecord& rec) {
  std::string out = "epoch,wall_seconds\n";
  for (const auto& e : rec.epochs) out += std::to_string(e.epoch) + "," + format_number(e.wall_seconds) + "\n";
  return out;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Endpoint paths of a few test trials in workspace coordinates.
std::string trajectory_svg(const std::string& title, const std::vector<tasks::Trajectory>& trajs, double reach) {
  const double size = 480, margin = 30, scale = (size - 2 * margin) / (2 * reach);
  auto px = [&](double x) { return fixed(size / 2 + x * scale); };
  auto py = [&](double y) { return fixed(size / 2 - y * scale); };
  static constexpr std::array<const char*, 8> colours{"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                                      "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" font-family=\"sans-serif\" "
         "font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"240\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  svg << "<circle cx=\"" << px(0) << "\" cy=\"" << py(0) << "\" r=\"3\" fill=\"black\"/>\n";
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& t = trajs[i];
    const char* c = colours[i % colours.size()];
    svg << "<circle cx=\"" << px(t.spec.target[0]) << "\" cy=\"" << py(t.spec.target[1]) << "\" r=\""
        << fixed(t.spec.threshold * scale) << "\" fill=\"none\" stroke=\"" << c << "\"/>\n";
    svg << "<polyline fill=\"none\" stroke=\"" << c << "\" points=\"" << px(t.start[0]) << "," << py(t.start[1]);
    for (const auto& p : t.endpoints) svg << " " << px(p[0]) << "," << py(p[1]);
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

std::string RunKey::id() const {
  return lower(to_string(model)) + "_" + std::string(tasks::to_string(task)) + "_seed" + std::to_string(seed);
}

std::vector<RunKey> enumerate_runs(const ExperimentConfig& cfg) {
  std::vector<RunKey> out;
  for (auto m : cfg.models) {
    for (auto t : cfg.tasks) {
      for (auto s : cfg.seeds) out.push_back({m, t, s});
    }
  }
  return out;
}

bool ExperimentResult::all_ok() const {
  return std::all_of(records.begin(), records.end(), [](const RunRecord& r) { return r.ok; });
}

std::string run_record_json(const RunRecord& r) {
  json lesions = json::array();
  for (const auto& row : r.lesions) {
    json entry = summary_json(row.summary);
    entry["lesion"] = row.kind ? std::string(lesion::to_string(*row.kind)) : "intact";
    entry["task"] = std::string(tasks::to_string(row.task));
    lesions.push_back(entry);
  }
  const json j = {
      {"model", std::string(to_string(r.key.model))},
      {"task", std::string(tasks::to_string(r.key.task))},
      {"seed", r.key.seed},
      {"status", r.ok ? "ok" : "failed"},
      {"error", r.error},
      {"epochs_trained", r.epochs_trained},
      {"best_epoch", r.best_epoch},
      {"best_val_loss", r.best_val_loss},
      {"test",
       {{"trials", r.test_trials},
        {"goal_completion", r.goal_completion},
        {"speed_to_goal", stat_json(r.speed_to_goal)},
        {"time_in_goal", stat_json(r.time_in_goal)}}},
      {"lesions", lesions},
  };
  return j.dump(2) + "\n";
}

RunRecord parse_run_record(std::string_view json_text) {
  try {
    const json j = json::parse(json_text);
    RunRecord r;
    r.key = {parse_model(j.at("model").get<std::string>()), tasks::parse_task(j.at("task").get<std::string>()),
             j.at("seed").get<std::uint64_t>()};
    r.ok = j.at("status") == "ok";
    r.error = j.at("error");
    r.epochs_trained = j.at("epochs_trained");
    r.best_epoch = j.at("best_epoch");
    r.best_val_loss = j.at("best_val_loss");
    const auto& t = j.at("test");
    r.test_trials = t.at("trials");
    r.goal_completion = t.at("goal_completion");
    r.speed_to_goal = stat_from(t.at("speed_to_goal"));
    r.time_in_goal = stat_from(t.at("time_in_goal")).value();
    for (const auto& row : j.at("lesions")) {
      lesion::LesionRow l;
      const std::string kind = row.at("lesion");
      if (kind != "intact") l.kind = lesion::parse_lesion(kind);
      l.task = tasks::parse_task(row.at("task").get<std::string>());
      l.summary = summary_from(row);
      r.lesions.push_back(l);
    }
    return r;
  } catch (const json::exception& e) {
    throw ContractError(std::string("experiment: malformed run record: ") + e.what());
  }
}

std::string lesion_csv(const RunRecord& r) {
  std::string out = "model_kind,specialised,seed,lesion,task,metric,value\n";
  const std::string prefix = std::string(network::to_string(setup_of(r.key.model).kind)) + "," +
                             (specialised(r.key.model) ? "1" : "0") + "," + std::to_string(r.key.seed) + ",";
  for (const auto& row : r.lesions) {
    const std::string head = prefix + (row.kind ? std::string(lesion::to_string(*row.kind)) : "intact") + "," +
                             std::string(tasks::to_string(row.task)) + ",";
    const auto& s = row.summary;
    out += head + "goal_completion," + format_number(s.goal_completion) + "\n";
    out += head + "speed_to_goal," + (s.speed_mean ? format_number(*s.speed_mean) : "") + "\n";
    out += head + "time_in_goal," + format_number(s.time_in_goal_mean) + "\n";
  }
  return out;
}

std::string trials_csv(const RunKey& key, std::span<const tasks::TrialSpec> trials,
                       std::span<const tasks::TrialMetrics> metrics) {
  std::string out =
      "trial,seed,task,q_init_shoulder,q_init_elbow,target_x,target_y,force_x,force_y,threshold,timesteps,"
      "goal_completed,speed_to_goal,time_in_goal\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& s = trials[i];
    const auto& m = metrics[i];
    out += std::to_string(s.id) + "," + std::to_string(key.seed) + "," + std::string(tasks::to_string(s.kind)) + "," +
           format_number(s.q_init[0]) + "," + format_number(s.q_init[1]) + "," + format_number(s.target[0]) + "," +
           format_number(s.target[1]) + "," + format_number(s.external_force[0]) + "," +
           format_number(s.external_force[1]) + "," + format_number(s.threshold) + "," +
           std::to_string(s.timesteps) + "," + (m.goal_completed ? "1" : "0") + "," +
           (m.speed_to_goal ? format_number(*m.speed_to_goal) : "") + "," + std::to_string(m.time_in_goal) + "\n";
  }
  return out;
}

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunRecord execute_run(const ExperimentConfig& cfg, const RunKey& key, const fs::path& out_dir) {
  RunRecord rec;
  rec.key = key;
  const std::string id = key.id();
  try {
    const auto env = cfg.environment();
    const auto arch = cfg.architecture(key.model);
    const auto tc = cfg.train_config(key.model, key.task, key.seed);
    const auto fitted = training::fit(arch, tc, env);
    rec.epochs_trained = static_cast<int>(fitted.record.epochs.size());
    rec.best_epoch = fitted.record.best_epoch;
    rec.best_val_loss = fitted.record.best_val_loss;
    std::ostringstream ckpt;
    network::save(fitted.params, ckpt);
    write_file(out_dir / "checkpoints" / (id + ".net"), ckpt.str());
    write_file(out_dir / "training" / (id + ".csv"), training_csv(fitted.record));
    write_file(out_dir / "timing" / (id + ".csv"), timing_csv(fitted.record));

    const auto trials = training::test_set(env, key.task, cfg.test_trials, cfg.test_seed);
    const auto metrics = training::evaluate(fitted.params, env, trials, cfg.threads);
    write_file(out_dir / "trials" / (id + ".csv"), trials_csv(key, trials, metrics));
    std::vector<tasks::Trajectory> shown;
    for (std::size_t i = 0; i < std::min<std::size_t>(trials.size(), 8); ++i) {
      shown.push_back(tasks::simulate(env.plant, fitted.params, trials[i]));
    }
    const auto& arm = env.plant.config().arm;
    write_file(out_dir / "plots" / "trajectories" / (id + ".svg"), trajectory_svg(id, shown, arm.l1 + arm.l2));
    const auto s = training::summarize(metrics);
    rec.test_trials = s.trials;
    rec.goal_completion = s.goal_completion;
    if (s.speed_mean) rec.speed_to_goal = MetricStat{*s.speed_mean, s.speed_sd};
    rec.time_in_goal = {s.time_in_goal_mean, s.time_in_goal_sd};

    if (cfg.lesions && arch.bilateral()) {
      const lesion::TestSets tests{
          training::test_set(env, tasks::TaskKind::Reach, cfg.test_trials, cfg.test_seed),
          training::test_set(env, tasks::TaskKind::Hold, cfg.test_trials, cfg.test_seed)};
      rec.lesions = lesion::lesion_suite(fitted.params, tc, env, tests);
      write_file(out_dir / "lesions" / (id + ".csv"), lesion_csv(rec));
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  write_file(out_dir / "runs" / (id + ".json"), run_record_json(rec));
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir, const RunOptions& opts) {
  cfg.validate();
  const std::string config_text = canonical_config_text(cfg);
  const fs::path config_path = out_dir / "config.json";
  if (opts.resume && fs::exists(config_path) && read_file(config_path) != config_text) {
    throw ContractError("experiment: " + config_path.string() +
                        " holds a different configuration; refusing to resume into it");
  }
  write_file(config_path, config_text);

  const auto keys = enumerate_runs(cfg);
  ExperimentResult result;
  result.records.resize(keys.size());
  std::vector<std::uint8_t> pending(keys.size(), 1);
  if (opts.resume) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto path = out_dir / "runs" / (keys[i].id() + ".json");
      if (!fs::exists(path)) continue;
      try {
        auto rec = parse_run_record(read_file(path));
        if (rec.ok && rec.key == keys[i]) {
          result.records[i] = std::move(rec);
          pending[i] = 0;
        }
      } catch (const ContractError&) {
        // unreadable record: run again
      }
    }
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (pending[i]) todo.push_back(i);
  }
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  std::size_t done = keys.size() - todo.size();
  auto worker = [&] {
    for (std::size_t j = next++; j < todo.size(); j = next++) {
      const std::size_t i = todo[j];
      result.records[i] = execute_run(cfg, keys[i], out_dir);
      const std::lock_guard lock(report_mutex);
      ++done;
      if (opts.progress) opts.progress(result.records[i], done, keys.size());
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), std::max<std::size_t>(todo.size(), 1));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  return result;
}

}  // namespace motorlab::experiment
