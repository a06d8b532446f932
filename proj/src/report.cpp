#include "motorlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "motorlab/error.hpp"
#include "motorlab/stats.hpp"

namespace motorlab::report {

using experiment::Model;
using experiment::RunRecord;
using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::GoalCompletion: return "goal_completion";
    case Metric::SpeedToGoal: return "speed_to_goal";
    case Metric::TimeInGoal: return "time_in_goal";
  }
  return "?";
}

LoadedRuns load_runs(const fs::path& dir) {
  LoadedRuns out;
  out.config = experiment::load_config(dir / "config.json");
  out.keys = experiment::enumerate_runs(out.config);
  for (const auto& key : out.keys) {
    const auto path = dir / "runs" / (key.id() + ".json");
    if (!fs::exists(path)) {
      out.records.emplace_back();
      continue;
    }
    out.records.push_back(experiment::parse_run_record(experiment::read_file(path)));
  }
  return out;
}

namespace {

constexpr std::array<Metric, 3> kMetrics{Metric::GoalCompletion, Metric::SpeedToGoal, Metric::TimeInGoal};

std::optional<double> metric_of(const training::MetricSummary& s, Metric m) {
  switch (m) {
    case Metric::GoalCompletion: return s.goal_completion;
    case Metric::SpeedToGoal: return s.speed_mean;
    case Metric::TimeInGoal: return s.time_in_goal_mean;
  }
  return std::nullopt;
}

std::optional<double> metric_of(const RunRecord& r, Metric m) {
  switch (m) {
    case Metric::GoalCompletion: return r.goal_completion;
    case Metric::SpeedToGoal:
      if (r.speed_to_goal) return r.speed_to_goal->mean;
      return std::nullopt;
    case Metric::TimeInGoal: return r.time_in_goal.mean;
  }
  return std::nullopt;
}

struct Aggregate {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
};

Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  a.n = xs.size();
  if (xs.empty()) return a;
  for (double x : xs) a.mean += x;
  a.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return a;
}

json aggregate_json(const Aggregate& a) {
  if (a.n == 0) return {{"n", 0}, {"mean", nullptr}, {"sd", nullptr}};
  if (a.n == 1) return {{"n", 1}, {"mean", a.mean}, {"sd", nullptr}};
  return {{"n", a.n}, {"mean", a.mean}, {"sd", a.sd}};
}

json number_or_null(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  return v;
}

// ---- SVG ----

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  std::string label;
  std::vector<Aggregate> values;  // one per category
};

const std::array<const char*, 4> kColours{"#4c72b0", "#dd8452", "#55a868", "#c44e52"};

// Grouped bar chart with one-sd whiskers.
std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<std::string>& categories,
                      const std::vector<Series>& series) {
  const double width = 720, height = 400, left = 70, right = 20, top = 40, bottom = 80;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  double y_max = 0.0;
  for (const auto& s : series) {
    for (const auto& v : s.values) {
      if (v.n > 0) y_max = std::max(y_max, v.mean + v.sd);
    }
  }
  if (!(y_max > 0.0)) y_max = 1.0;
  y_max *= 1.1;
  auto y_of = [&](double v) { return top + plot_h * (1.0 - v / y_max); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\"" << fixed(height, 0)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  svg << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(top) << "\" x2=\"" << fixed(left) << "\" y2=\""
      << fixed(top + plot_h) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(top + plot_h) << "\" x2=\"" << fixed(left + plot_w)
      << "\" y2=\"" << fixed(top + plot_h) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = y_max * k / 4.0;
    const double y = y_of(v);
    svg << "<line x1=\"" << fixed(left - 4) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(left) << "\" y2=\""
        << fixed(y) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">"
        << fixed(v, y_max < 0.1 ? 4 : 2) << "</text>\n";
  }
  svg << "<text transform=\"translate(16," << fixed(top + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(y_label) << "</text>\n";

  const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(categories.size(), 1));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = left + group_w * static_cast<double>(c) + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto& v = series[s].values[c];
      if (v.n == 0) continue;
      const double x = gx + bar_w * static_cast<double>(s);
      const double y = y_of(v.mean);
      svg << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(bar_w * 0.9)
          << "\" height=\"" << fixed(top + plot_h - y) << "\" fill=\"" << kColours[s % kColours.size()] << "\"/>\n";
      const double cx = x + bar_w * 0.45;
      svg << "<line x1=\"" << fixed(cx) << "\" y1=\"" << fixed(y_of(std::max(0.0, v.mean - v.sd))) << "\" x2=\""
          << fixed(cx) << "\" y2=\"" << fixed(y_of(v.mean + v.sd)) << "\" stroke=\"black\"/>\n";
    }
    svg << "<text x=\"" << fixed(gx + group_w * 0.4) << "\" y=\"" << fixed(top + plot_h + 16)
        << "\" text-anchor=\"end\" transform=\"rotate(-30 " << fixed(gx + group_w * 0.4) << ","
        << fixed(top + plot_h + 16) << ")\">" << escape(categories[c]) << "</text>\n";
  }
  if (series.size() > 1) {
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double y = top + 14.0 * static_cast<double>(s);
      svg << "<rect x=\"" << fixed(left + plot_w - 150) << "\" y=\"" << fixed(y) << "\" width=\"10\" height=\"10\" fill=\""
          << kColours[s % kColours.size()] << "\"/>\n";
      svg << "<text x=\"" << fixed(left + plot_w - 135) << "\" y=\"" << fixed(y + 9) << "\">"
          << escape(series[s].label) << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string metric_label(Metric m) {
  switch (m) {
    case Metric::GoalCompletion: return "goal completion (fraction)";
    case Metric::SpeedToGoal: return "speed to goal (m per step)";
    case Metric::TimeInGoal: return "time in goal (steps)";
  }
  return "";
}

// Headline metric of a task.
Metric headline(tasks::TaskKind t) { return t == tasks::TaskKind::Reach ? Metric::SpeedToGoal : Metric::TimeInGoal; }

}  // namespace

std::vector<double> per_seed(const LoadedRuns& runs, Model model, tasks::TaskKind task, Metric metric) {
  std::vector<double> out;
  for (std::size_t i = 0; i < runs.keys.size(); ++i) {
    const auto& k = runs.keys[i];
    const auto& r = runs.records[i];
    if (k.model != model || k.task != task || !r || !r->ok) continue;
    if (const auto v = metric_of(*r, metric)) out.push_back(*v);
  }
  return out;
}

ReportResult emit_report(const fs::path& dir) {
  const auto runs = load_runs(dir);
  const auto& cfg = runs.config;
  ReportResult result;
  for (std::size_t i = 0; i < runs.keys.size(); ++i) {
    if (!runs.records[i]) {
      result.missing.push_back(runs.keys[i].id());
    } else if (!runs.records[i]->ok) {
      result.failed.push_back(runs.keys[i].id());
    }
  }

  // Per model and task.
  json rows = json::array();
  for (auto m : cfg.models) {
    for (auto t : cfg.tasks) {
      json row = {{"model", std::string(experiment::to_string(m))}, {"task", std::string(tasks::to_string(t))}};
      for (auto metric : kMetrics) row[std::string(to_string(metric))] = aggregate_json(aggregate(per_seed(runs, m, t, metric)));
      std::vector<double> epochs;
      for (std::size_t i = 0; i < runs.keys.size(); ++i) {
        const auto& r = runs.records[i];
        if (runs.keys[i].model == m && runs.keys[i].task == t && r && r->ok) epochs.push_back(r->epochs_trained);
      }
      row["epochs_trained"] = aggregate_json(aggregate(epochs));
      rows.push_back(row);
    }
  }

  // Lesion tables: mean over seeds per (model, trained task, lesion, evaluation task).
  json lesion_tables = json::array();
  std::vector<std::string> lesion_svgs;
  for (auto m : cfg.models) {
    if (!cfg.lesions || !cfg.architecture(m).bilateral()) continue;
    std::vector<std::optional<lesion::LesionKind>> kinds{std::nullopt};
    for (auto k : lesion::lesions_for(cfg.architecture(m).kind)) kinds.emplace_back(k);
    for (auto trained : cfg.tasks) {
      json table = {{"model", std::string(experiment::to_string(m))},
                    {"trained_task", std::string(tasks::to_string(trained))}};
      json entries = json::array();
      std::vector<std::string> categories;
      std::vector<Series> series{{"reach: " + metric_label(Metric::SpeedToGoal), {}},
                                 {"hold: " + metric_label(Metric::TimeInGoal), {}}};
      for (const auto& kind : kinds) {
        categories.push_back(kind ? std::string(lesion::to_string(*kind)) : "intact");
        for (auto eval : {tasks::TaskKind::Reach, tasks::TaskKind::Hold}) {
          json entry = {{"lesion", categories.back()}, {"task", std::string(tasks::to_string(eval))}};
          for (auto metric : kMetrics) {
            std::vector<double> xs;
            for (std::size_t i = 0; i < runs.keys.size(); ++i) {
              const auto& r = runs.records[i];
              if (runs.keys[i].model != m || runs.keys[i].task != trained || !r || !r->ok) continue;
              for (const auto& row : r->lesions) {
                if (row.kind == kind && row.task == eval) {
                  if (const auto v = metric_of(row.summary, metric)) xs.push_back(*v);
                }
              }
            }
            const auto agg = aggregate(xs);
            entry[std::string(to_string(metric))] = aggregate_json(agg);
            if (metric == headline(eval)) {
              series[eval == tasks::TaskKind::Reach ? 0 : 1].values.push_back(agg);
            }
          }
          entries.push_back(entry);
        }
      }
      table["rows"] = entries;
      lesion_tables.push_back(table);
      // One chart per evaluation task, each on its headline metric.
      const std::string run_stem = experiment::RunKey{m, trained, 0}.id();
      const std::string stem = run_stem.substr(0, run_stem.rfind('_'));
      for (std::size_t s = 0; s < 2; ++s) {
        const auto eval = s == 0 ? tasks::TaskKind::Reach : tasks::TaskKind::Hold;
        const std::string name = "lesions_" + stem + "_eval_" + std::string(tasks::to_string(eval)) + ".svg";
        experiment::write_file(dir / "plots" / name,
                               bar_chart(std::string(experiment::to_string(m)) + " trained on " +
                                             std::string(tasks::to_string(trained)) + ": lesions, " +
                                             std::string(tasks::to_string(eval)) + " evaluation",
                                         metric_label(headline(eval)), categories, {series[s]}));
        lesion_svgs.push_back(name);
      }
    }
  }

  // Pairwise statistics over seeds.
  json stats_tables = json::array();
  for (auto t : cfg.tasks) {
    for (auto metric : kMetrics) {
      std::vector<stats::NamedSample> groups;
      for (auto m : cfg.models) groups.emplace_back(std::string(experiment::to_string(m)), per_seed(runs, m, t, metric));
      json pairs = json::array();
      if (groups.size() >= 2) {
        for (const auto& p : stats::pairwise_stats(groups)) {
          json row = {{"a", p.a}, {"b", p.b}, {"computable", p.computable}};
          if (p.computable) {
            row["mean_difference"] = p.test.mean_difference;
            row["t"] = number_or_null(p.test.t);
            row["df"] = p.test.df;
            row["p"] = p.test.p;
            row["p_holm"] = p.p_holm;
          }
          pairs.push_back(row);
        }
      }
      stats_tables.push_back(
          {{"task", std::string(tasks::to_string(t))}, {"metric", std::string(to_string(metric))}, {"pairs", pairs}});
    }
  }

  json failed = json::array();
  for (std::size_t i = 0; i < runs.keys.size(); ++i) {
    const auto& r = runs.records[i];
    if (r && !r->ok) failed.push_back({{"run", runs.keys[i].id()}, {"error", r->error}});
  }
  const json summary = {{"rows", rows},          {"lesions", lesion_tables}, {"stats", stats_tables},
                        {"missing", result.missing}, {"failed", failed}};
  experiment::write_file(dir / "summary.json", summary.dump(2) + "\n");

  // Model performance charts, one per task and metric.
  std::vector<std::string> categories;
  for (auto m : cfg.models) categories.emplace_back(experiment::to_string(m));
  std::vector<std::string> perf_svgs;
  for (auto t : cfg.tasks) {
    for (auto metric : kMetrics) {
      Series s{std::string(to_string(metric)), {}};
      for (auto m : cfg.models) s.values.push_back(aggregate(per_seed(runs, m, t, metric)));
      const std::string name = "performance_" + std::string(tasks::to_string(t)) + "_" + std::string(to_string(metric)) + ".svg";
      experiment::write_file(dir / "plots" / name,
                             bar_chart("All models, " + std::string(tasks::to_string(t)) + " task",
                                       metric_label(metric), categories, {s}));
      perf_svgs.push_back(name);
    }
  }

  std::ostringstream readme;
  readme << "motorlab experiment report\n\n";
  readme << "models: ";
  for (std::size_t i = 0; i < cfg.models.size(); ++i) readme << (i ? ", " : "") << experiment::to_string(cfg.models[i]);
  readme << "\ntasks: ";
  for (std::size_t i = 0; i < cfg.tasks.size(); ++i) readme << (i ? ", " : "") << tasks::to_string(cfg.tasks[i]);
  readme << "\nseeds: " << cfg.seeds.size() << "\ntest trials per task: " << cfg.test_trials << "\n";
  readme << "runs: " << runs.keys.size() << " expected, " << result.missing.size() << " missing, "
         << result.failed.size() << " failed\n\n";
  readme << "mean over seeds (sd)\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-6s %-17s %-21s %-17s\n", "model", "task", "goal completion",
                "speed to goal", "time in goal");
  readme << line;
  for (const auto& row : rows) {
    auto cell = [&](const char* key, int digits) {
      const auto& a = row.at(key);
      if (a.at("mean").is_null()) return std::string("n/a");
      const auto& sd = a.at("sd");
      return fixed(a.at("mean").get<double>(), digits) + " (" +
             (sd.is_null() ? std::string("n/a") : fixed(sd.get<double>(), digits)) + ")";
    };
    std::snprintf(line, sizeof line, "%-8s %-6s %-17s %-21s %-17s\n", row.at("model").get<std::string>().c_str(),
                  row.at("task").get<std::string>().c_str(), cell("goal_completion", 3).c_str(),
                  cell("speed_to_goal", 5).c_str(), cell("time_in_goal", 2).c_str());
    readme << line;
  }
  if (!result.missing.empty()) {
    readme << "\nmissing runs:\n";
    for (const auto& id : result.missing) readme << "  " << id << "\n";
  }
  if (!result.failed.empty()) {
    readme << "\nfailed runs:\n";
    for (const auto& id : result.failed) readme << "  " << id << "\n";
  }
  readme << "\nfiles:\n  summary.json  per-model metrics, lesion tables, pairwise Welch tests with Holm adjustment\n";
  for (const auto& f : perf_svgs) readme << "  plots/" << f << "\n";
  for (const auto& f : lesion_svgs) readme << "  plots/" << f << "\n";
  readme << "  runs/, trials/, training/, lesions/, checkpoints/  per-run outputs\n";
  readme << "  timing/  wall-clock seconds per epoch (varies between runs)\n";
  experiment::write_file(dir / "README.txt", readme.str());
  return result;
}

}  // namespace motorlab::report
