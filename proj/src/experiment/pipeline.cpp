#include "detforge/experiment/pipeline.hpp"

#include "detforge/core/error.hpp"
#include "detforge/eval/eval.hpp"

namespace detforge::experiment {

namespace fs = std::filesystem;

core::DatasetSplit load_task_data(const ExperimentStore& store, const std::string& task,
                                  std::uint64_t seed) {
  const auto dir = store.data_dir(task);
  const auto train = dir / "train.csv";
  const auto val = dir / "val.csv";
  const auto test = dir / "test.csv";
  if (fs::exists(train) && fs::exists(val) && fs::exists(test)) {
    return {core::load_labeled_dataset(train), core::load_labeled_dataset(val),
            core::load_labeled_dataset(test)};
  }
  const auto full = dir / "full.csv";
  if (!fs::exists(full)) throw MissingArtifact((dir / "{train,val,test}.csv or full.csv").string());
  return core::split_dataset(core::load_labeled_dataset(full), {}, seed);
}

namespace {

void require(const PipelineContext& ctx) {
  if (!ctx.store || !ctx.data || !ctx.provider || !ctx.runner_factory) {
    throw InvalidArgument("pipeline context is incomplete");
  }
}

void note(const PipelineContext& ctx, const std::string& line) {
  if (ctx.progress) ctx.progress(line);
}

}  // namespace

FunctionExperiment run_function_experiment(const PipelineContext& ctx,
                                           const std::vector<core::Configuration>& configs,
                                           int n) {
  require(ctx);
  FunctionExperiment h{ctx.task.id, {}, {}};
  std::unique_ptr<sandbox::Runner> runner;
  for (const auto& cfg : configs) {
    const auto dir = ctx.store->codegen_dir(ctx.task.id, cfg);
    codegen::FunctionRun run;
    if (fs::exists(dir / "run.json")) {
      run = codegen::load_function_run(dir);
      note(ctx, "stored   " + cfg.label());
    } else {
      if (!runner) runner = ctx.runner_factory();
      codegen::FunctionRunOptions options{n, ctx.seed, ctx.per_call_timeout, ctx.sampling};
      run = codegen::generate_function_run(ctx.task, cfg, *ctx.provider, ctx.cache, ctx.retrieval,
                                           ctx.data->train, *runner, options);
      codegen::save_function_run(run, dir);
      for (const auto& f : run.functions) {
        ctx.store->record(dir / ("sample_" + std::to_string(f.sample_index) + ".src"));
      }
      ctx.store->record(dir / "run.json");
      note(ctx, "generated " + cfg.label() + ": " + std::to_string(run.broken_count()) + "/" +
                    std::to_string(run.functions.size()) + " broken" +
                    (run.failed ? ", failed" : ""));
    }
    if (run.failed) {
      h.failed.push_back(cfg);
    } else {
      h.runs.push_back(std::move(run));
    }
  }
  return h;
}

DatasetExperiment run_dataset_experiment(const PipelineContext& ctx,
                                         const std::vector<core::Configuration>& configs, int m,
                                         datagen::DatasetOptions options) {
  require(ctx);
  options.seed = ctx.seed;
  options.sampling = ctx.sampling;
  DatasetExperiment p{ctx.task.id, {}, {}};
  for (const auto& cfg : configs) {
    const auto dir = ctx.store->datagen_dir(ctx.task.id, cfg);
    datagen::SyntheticDatasetRun run;
    if (fs::exists(dir / "run.json")) {
      run = datagen::load_dataset_run(dir);
      note(ctx, "stored   " + cfg.label());
    } else {
      run = datagen::generate_dataset_run(ctx.task, cfg, m, *ctx.provider, ctx.cache,
                                          ctx.retrieval, ctx.data->train, options);
      datagen::save_dataset_run(run, dir);
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".csv") ctx.store->record(entry.path());
      }
      ctx.store->record(dir / "run.json");
      note(ctx, "generated " + cfg.label() + ": " + std::to_string(run.datasets.size()) +
                    " dataset(s)" + (run.failed ? ", failed" : ""));
    }
    if (run.failed) {
      p.failed.push_back(cfg);
    } else {
      p.runs.push_back(std::move(run));
    }
  }
  return p;
}

FunctionExperiment load_function_experiment(const ExperimentStore& store, const std::string& task,
                                            const std::vector<core::Configuration>& configs) {
  FunctionExperiment h{task, {}, {}};
  for (const auto& cfg : configs) {
    const auto dir = store.codegen_dir(task, cfg);
    if (!fs::exists(dir / "run.json")) continue;
    auto run = codegen::load_function_run(dir);
    if (run.failed) {
      h.failed.push_back(cfg);
    } else {
      h.runs.push_back(std::move(run));
    }
  }
  return h;
}

DatasetExperiment load_dataset_experiment(const ExperimentStore& store, const std::string& task,
                                          const std::vector<core::Configuration>& configs) {
  DatasetExperiment p{task, {}, {}};
  for (const auto& cfg : configs) {
    const auto dir = store.datagen_dir(task, cfg);
    if (!fs::exists(dir / "run.json")) continue;
    auto run = datagen::load_dataset_run(dir);
    if (run.failed) {
      p.failed.push_back(cfg);
    } else {
      p.runs.push_back(std::move(run));
    }
  }
  return p;
}

EvaluationGrid evaluate_experiment(const PipelineContext& ctx, const FunctionExperiment& h,
                                   const DatasetExperiment& p) {
  require(ctx);
  std::vector<core::Dataset> synthetic;
  for (const auto& run : p.runs) {
    for (const auto& d : run.datasets) {
      synthetic.push_back(
          d.to_dataset(run.config.slug() + "/dataset_" + std::to_string(d.dataset_index)));
    }
  }
  std::vector<const core::Dataset*> datasets{&ctx.data->val, &ctx.data->test};
  for (const auto& d : synthetic) datasets.push_back(&d);

  std::vector<sandbox::Candidate> candidates;
  for (const auto& run : h.runs) {
    for (const auto& f : run.functions) {
      if (f.usable()) candidates.push_back(f.candidate());
    }
  }
  const auto preds = sandbox::evaluate_all(candidates, datasets, ctx.per_call_timeout,
                                           ctx.runner_factory, ctx.jobs);

  EvaluationGrid grid;
  grid.task_id = ctx.task.id;
  grid.failed_codegen = h.failed;
  grid.failed_datagen = p.failed;
  for (const auto& run : p.runs) grid.dataset_configs.push_back(run.config);

  std::size_t c = 0;
  for (const auto& run : h.runs) {
    FunctionRunCounts counts;
    counts.config = run.config;
    const auto n = run.functions.size();
    counts.broken = run.broken();
    counts.val.resize(n);
    counts.test.resize(n);
    for (const auto& prun : p.runs) {
      counts.synthetic.emplace_back(prun.datasets.size(),
                                    std::vector<eval::ConfusionCounts>(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (counts.broken[i]) continue;
      const auto& row = preds[c++];
      counts.val[i] = eval::confusion(row[0], ctx.data->val);
      counts.test[i] = eval::confusion(row[1], ctx.data->test);
      std::size_t d = 2;
      for (std::size_t s = 0; s < p.runs.size(); ++s) {
        for (std::size_t j = 0; j < p.runs[s].datasets.size(); ++j, ++d) {
          counts.synthetic[s][j][i] = eval::confusion(row[d], *datasets[d]);
        }
      }
    }
    grid.runs.push_back(std::move(counts));
  }
  grid.validate();
  ctx.store->write(ctx.store->grid_path(ctx.task.id), grid.to_json());
  return grid;
}

EvaluationGrid load_grid(const ExperimentStore& store, const std::string& task) {
  const auto path = store.grid_path(task);
  if (!fs::exists(path)) throw MissingArtifact(path.string());
  return EvaluationGrid::from_json(core::read_file(path));
}

}  // namespace detforge::experiment
