#pragma once

// Aggregation of an experiment directory into summary files.
//
// Writes summary.json (per model and task: metric means and standard
// deviations over seeds; lesion tables; pairwise statistics), one SVG bar
// chart per task and per lesioned model, and a plain-text README.txt.
// Everything is derived from config.json and runs/*.json, so regenerating
// from unchanged records is byte-identical.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "motorlab/experiment.hpp"

namespace motorlab::report {

/// Run records of a directory in enumeration order; empty where missing.
struct LoadedRuns {
  experiment::ExperimentConfig config;
  std::vector<experiment::RunKey> keys;
  std::vector<std::optional<experiment::RunRecord>> records;
};
LoadedRuns load_runs(const std::filesystem::path& dir);

/// Per-seed values of one metric for (model, task), skipping missing or
/// failed runs and runs where the metric is undefined.
enum class Metric { GoalCompletion, SpeedToGoal, TimeInGoal };
std::string_view to_string(Metric m);
std::vector<double> per_seed(const LoadedRuns& runs, experiment::Model model, tasks::TaskKind task, Metric metric);

struct ReportResult {
  std::vector<std::string> missing;  // run ids without a record
  std::vector<std::string> failed;   // run ids whose record reports failure
};

ReportResult emit_report(const std::filesystem::path& dir);

}  // namespace motorlab::report
