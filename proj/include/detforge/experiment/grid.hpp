#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "detforge/core/config.hpp"
#include "detforge/eval/eval.hpp"

namespace detforge::experiment {

/// Confusion counts of every function of one run on val, test and each
/// synthetic dataset.
struct FunctionRunCounts {
  core::Configuration config;
  std::vector<bool> broken;
  std::vector<eval::ConfusionCounts> val;
  std::vector<eval::ConfusionCounts> test;
  /// [dataset run][dataset][function]
  std::vector<std::vector<std::vector<eval::ConfusionCounts>>> synthetic;

  std::size_t size() const { return broken.size(); }
};

/// Everything the analyses need, independent of the metric.
struct EvaluationGrid {
  std::string task_id;
  std::vector<core::Configuration> dataset_configs;  // surviving dataset runs
  std::vector<FunctionRunCounts> runs;               // surviving function runs
  std::vector<core::Configuration> failed_codegen;
  std::vector<core::Configuration> failed_datagen;

  /// Throws InvalidArgument on misaligned shapes.
  void validate() const;
  std::string to_json() const;
  static EvaluationGrid from_json(std::string_view text);
};

/// Metric view of one function run. Broken functions score 0 everywhere.
struct RunScores {
  core::Configuration config;
  std::vector<double> val;
  std::vector<double> test;
  /// [dataset run][function]: mean over that run's datasets.
  std::vector<std::vector<double>> synthetic;
};

struct TaskScores {
  std::string task_id;
  eval::MetricKind kind = eval::MetricKind::f2;
  std::vector<core::Configuration> dataset_configs;
  std::vector<RunScores> runs;
  std::vector<core::Configuration> failed_codegen;
  std::vector<core::Configuration> failed_datagen;
  /// Number of (function, dataset) cells with a zero precision or recall
  /// denominator among non-broken functions.
  std::size_t degenerate_cells = 0;

  std::optional<std::size_t> find_run(const core::Configuration& cfg) const;
  std::optional<std::size_t> find_dataset_run(const core::Configuration& cfg) const;
};

TaskScores to_scores(const EvaluationGrid& grid, eval::MetricKind kind);

}  // namespace detforge::experiment
