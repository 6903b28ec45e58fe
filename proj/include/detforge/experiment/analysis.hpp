#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "detforge/core/error.hpp"
#include "detforge/experiment/grid.hpp"
#include "json.hpp"

namespace detforge::experiment {

class MissingFactorLevel : public Error {
 public:
  using Error::Error;
};

class TransferredConfigUnavailable : public Error {
 public:
  using Error::Error;
};

using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct NamedTest {
  std::string label;
  eval::TestResult result;
};

struct AnalysisReport {
  std::string rq_id;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::vector<Table> tables;
  std::vector<NamedTest> tests;
  std::vector<std::string> flags;

  const Table& table(const std::string& name) const;
  /// Canonical JSON; identical inputs give identical bytes.
  std::string to_json() const;
  /// Long-form CSV of one table.
  static std::string to_csv(const Table& table);
};

enum class Factor { model, temperature, n_shot, rag };

std::string_view to_string(Factor factor);
Factor parse_factor(std::string_view text);

/// Mean test metric of a run: the unweighted mean over its functions.
double run_mean(const RunScores& run);

/// Grand mean of per-run mean test metric (or of all functions when
/// `per_function`), min/max over runs, and group means per level of `factor`.
AnalysisReport ntd_summary(const TaskScores& scores, std::optional<Factor> factor = std::nullopt,
                           bool per_function = false);

/// Argmax of mean val metric; the first run in stored order wins a tie.
std::size_t tda_best_run(const TaskScores& scores);

/// top_k on `truth` minus top_k on dataset run `s`, both measured on `truth`.
double run_performance_difference(const TaskScores& scores, std::size_t u, std::size_t s,
                                  std::size_t k, std::uint64_t seed);

/// Argmin over dataset runs of the performance difference on val for run `u`;
/// the first in stored order wins a tie.
std::size_t best_dataset_run(const TaskScores& scores, std::size_t u, std::size_t k,
                             std::uint64_t seed);

/// Mean test metric of the top_k of run `u` ranked by dataset run `s`.
double top_k_test(const TaskScores& scores, std::size_t u, std::size_t s, std::size_t k,
                  std::uint64_t seed);

enum class Rq1Factor { rag, few_shot_given_rag, few_shot_given_no_rag };

std::string_view to_string(Rq1Factor factor);
Rq1Factor parse_rq1_factor(std::string_view text);

AnalysisReport rq1_effect(const TaskScores& scores, Rq1Factor factor);

AnalysisReport rq2_effect(const TaskScores& scores, const std::vector<std::size_t>& ks,
                          std::uint64_t seed);

/// Published reference F2 of the learned baselines.
const std::map<std::string, double>& baseline_scores();
/// Baselines compared against by default for a task id.
std::vector<std::string> default_baselines(const std::string& task_id);

AnalysisReport rq3_compare(const TaskScores& scores, const std::vector<std::string>& baselines,
                           const std::vector<std::size_t>& ks, std::uint64_t seed);

struct TransferRow {
  std::size_t k = 0;
  double best = 0.0;
  double average = 0.0;
  std::optional<double> transferred;
  core::Configuration u_best;
  core::Configuration s_best;
  core::Configuration u_transf;
  core::Configuration s_transf;
};

/// Rows for one target task: its own best cell, the average over all its
/// (U, S) cells, and the cell at the source task's best configurations.
struct TransferDirection {
  std::string source_task;
  std::string target_task;
  std::vector<TransferRow> rows;
};

struct TransferabilityReport {
  std::vector<TransferDirection> directions;  // target = first task, then second
  std::vector<std::string> flags;
  eval::MetricKind kind = eval::MetricKind::f2;
  std::uint64_t seed = 0;

  AnalysisReport to_report() const;
};

/// With `strict`, a source configuration absent on the target throws
/// TransferredConfigUnavailable; otherwise the cell is null and flagged.
TransferabilityReport rq4_transfer(const TaskScores& first, const TaskScores& second,
                                   const std::vector<std::size_t>& ks, std::uint64_t seed,
                                   bool strict = false);

}  // namespace detforge::experiment
