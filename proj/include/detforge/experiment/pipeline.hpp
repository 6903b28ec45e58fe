#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "detforge/codegen/codegen.hpp"
#include "detforge/core/dataset_io.hpp"
#include "detforge/datagen/datagen.hpp"
#include "detforge/experiment/grid.hpp"
#include "detforge/experiment/store.hpp"
#include "detforge/llm/llm.hpp"
#include "detforge/sandbox/sandbox.hpp"

namespace detforge::experiment {

/// `data/<task>/{train,val,test}.csv`, or a seeded stratified split of
/// `data/<task>/full.csv` when the three files are absent.
core::DatasetSplit load_task_data(const ExperimentStore& store, const std::string& task,
                                  std::uint64_t seed);

struct PipelineContext {
  ExperimentStore* store = nullptr;
  core::TaskSpec task;
  const core::DatasetSplit* data = nullptr;
  llm::Provider* provider = nullptr;
  llm::ResponseCache* cache = nullptr;
  codegen::RetrievalContext retrieval;
  sandbox::RunnerFactory runner_factory;
  int jobs = 4;
  std::uint64_t seed = 7;
  std::chrono::milliseconds per_call_timeout = sandbox::kDefaultPerCallTimeout;
  llm::SamplingOptions sampling;
  /// Called after each configuration with a one-line progress note.
  std::function<void(const std::string&)> progress;
};

struct FunctionExperiment {
  std::string task_id;
  std::vector<codegen::FunctionRun> runs;      // surviving, in configuration order
  std::vector<core::Configuration> failed;
};

struct DatasetExperiment {
  std::string task_id;
  std::vector<datagen::SyntheticDatasetRun> runs;  // surviving, in configuration order
  std::vector<core::Configuration> failed;
};

/// One run per configuration; runs already in the store are loaded instead
/// of regenerated.
FunctionExperiment run_function_experiment(const PipelineContext& ctx,
                                           const std::vector<core::Configuration>& configs, int n);

DatasetExperiment run_dataset_experiment(const PipelineContext& ctx,
                                         const std::vector<core::Configuration>& configs, int m,
                                         datagen::DatasetOptions options);

/// Stored runs only; configurations without a stored run are skipped.
FunctionExperiment load_function_experiment(const ExperimentStore& store, const std::string& task,
                                            const std::vector<core::Configuration>& configs);
DatasetExperiment load_dataset_experiment(const ExperimentStore& store, const std::string& task,
                                          const std::vector<core::Configuration>& configs);

/// Runs every healthy function on val, test and every synthetic dataset, and
/// stores the confusion grid.
EvaluationGrid evaluate_experiment(const PipelineContext& ctx, const FunctionExperiment& h,
                                   const DatasetExperiment& p);

EvaluationGrid load_grid(const ExperimentStore& store, const std::string& task);

}  // namespace detforge::experiment
