#include "detforge/cli/cli.hpp"

#include <chrono>
#include <ctime>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "detforge/core/config.hpp"
#include "detforge/core/dataset_io.hpp"
#include "detforge/experiment/analysis.hpp"
#include "detforge/experiment/pipeline.hpp"
#include "detforge/rag/rag.hpp"
#include "json.hpp"

namespace detforge::cli {

namespace fs = std::filesystem;
using namespace detforge::experiment;

namespace {

struct Options {
  std::string workspace = "workspace";
  std::string task = "xss";
  std::uint64_t seed = 7;
  std::string provider = "replay";
  std::string stub_script;
  std::string recorded_provider = "live";
  bool no_cache = false;
  std::string domain;
  int jobs = 4;
  std::string runner = "process";
  std::string runner_cmd = "df-runner";
  int per_call_timeout_ms = 2000;
  std::size_t retrieval_k = rag::kDefaultRetrievalK;

  std::size_t chunk_size = rag::kDefaultChunkSize;
  std::size_t chunk_overlap = rag::kDefaultChunkOverlap;

  int n_functions = 40;
  int m_datasets = 10;
  double timeout_s = 9000.0;
  std::size_t dataset_size = 100;
  std::size_t rows_per_batch = 50;
  int max_batches = 500;

  std::vector<std::size_t> ks{1, 3, 5};
  std::string metric = "f2";
  std::string selector = "val";
  std::string rq;
  std::string factor = "rag";
  std::string ntd_factor;
  bool per_function = false;
  std::vector<std::string> baselines;
  std::string other_task;
  bool strict = false;
};

void add_workspace(CLI::App* app, Options& o) {
  app->add_option("--workspace", o.workspace, "Workspace root")->capture_default_str();
  app->add_option("--task", o.task, "Task id (xss, sqli or one from tasks.json)")
      ->capture_default_str();
  app->add_option("--seed", o.seed, "Seed for every random choice")->capture_default_str();
  app->add_option("--domain", o.domain,
                  "Configuration domain JSON (default: the built-in XSS/SQLi domain)");
}

void add_generation(CLI::App* app, Options& o) {
  app->add_option("--provider", o.provider, "Model provider")
      ->check(CLI::IsMember({"live", "stub", "replay"}))
      ->capture_default_str();
  app->add_option("--stub-script", o.stub_script, "Stub provider script (JSON)");
  app->add_option("--recorded-provider", o.recorded_provider,
                  "Provider namespace the replay cache was recorded under")
      ->capture_default_str();
  app->add_flag("--no-cache", o.no_cache, "Bypass the response cache");
  app->add_option("--retrieval-k", o.retrieval_k, "Chunks retrieved per RAG prompt")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--jobs", o.jobs, "Worker bound for sampling and evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_runner(CLI::App* app, Options& o) {
  app->add_option("--runner", o.runner,
                  "Detector runner: a runner process, or the in-process scripted runner")
      ->check(CLI::IsMember({"process", "scripted"}))
      ->capture_default_str();
  app->add_option("--runner-cmd", o.runner_cmd, "Runner process command line")
      ->capture_default_str();
  app->add_option("--per-call-timeout-ms", o.per_call_timeout_ms, "Per-payload timeout")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--jobs", o.jobs, "Worker bound for sampling and evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_ranking(CLI::App* app, Options& o) {
  app->add_option("--k", o.ks, "top_k sizes")->delimiter(',')->capture_default_str();
  app->add_option("--metric", o.metric, "Metric")
      ->check(CLI::IsMember({"f2", "f1", "accuracy"}))
      ->capture_default_str();
}

std::vector<core::TaskSpec> builtin_tasks() { return {core::TaskSpec::xss(), core::TaskSpec::sqli()}; }

core::TaskSpec resolve_task(const ExperimentStore& store, const std::string& id) {
  const auto path = store.root() / "tasks.json";
  std::vector<core::TaskSpec> tasks = builtin_tasks();
  if (fs::exists(path)) {
    try {
      for (auto t : nlohmann::json::parse(core::read_file(path)).get<std::vector<core::TaskSpec>>()) {
        t.validate();
        std::erase_if(tasks, [&](const core::TaskSpec& x) { return x.id == t.id; });
        tasks.push_back(std::move(t));
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(path.string() + ": malformed task list: " + e.what());
    }
  }
  for (auto& t : tasks) {
    if (t.id == id) return t;
  }
  throw InvalidArgument("unknown task '" + id + "'");
}

core::ConfigurationDomain domain_of(const Options& o) {
  return o.domain.empty() ? core::ConfigurationDomain::standard()
                          : core::ConfigurationDomain::load(o.domain);
}

std::unique_ptr<llm::Provider> make_provider(const Options& o) {
  if (o.provider == "live") return llm::LiveProvider::from_environment();
  if (o.provider == "stub") {
    if (o.stub_script.empty()) throw InvalidArgument("--provider stub needs --stub-script");
    return llm::StubProvider::from_file(o.stub_script);
  }
  return std::make_unique<llm::ReplayProvider>(o.recorded_provider);
}

sandbox::RunnerFactory make_runner_factory(const Options& o) {
  if (o.runner == "scripted") {
    return [] { return std::unique_ptr<sandbox::Runner>(sandbox::FixtureRunner::scripted()); };
  }
  std::vector<std::string> argv;
  std::istringstream words(o.runner_cmd);
  for (std::string w; words >> w;) argv.push_back(w);
  if (argv.empty()) throw InvalidArgument("--runner-cmd is empty");
  return [argv] { return std::unique_ptr<sandbox::Runner>(new sandbox::ProcessRunner(argv)); };
}

std::vector<std::size_t> checked_ks(const Options& o) {
  if (o.ks.empty()) throw InvalidArgument("--k needs at least one value");
  for (const auto k : o.ks) {
    if (k < 1) throw InvalidArgument("--k values must be at least 1");
  }
  return o.ks;
}

void write_report(ExperimentStore& store, const std::string& task, const std::string& name,
                  const AnalysisReport& report, std::ostream& out) {
  const auto json_path = store.report_path(task, name + ".json");
  store.write(json_path, report.to_json());
  for (const auto& t : report.tables) {
    store.write(store.report_path(task, name + "_" + t.name + ".csv"), AnalysisReport::to_csv(t));
  }
  out << "wrote " << json_path.string() << "\n";
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct Session {
  Options& o;
  ExperimentStore store;
  std::ostream& out;
  std::ostream& err;

  PipelineContext context(const core::TaskSpec& task, const core::DatasetSplit& data,
                          llm::Provider& provider, llm::ResponseCache* cache,
                          const rag::VectorIndex* index, const rag::Embedder& embedder) {
    PipelineContext ctx;
    ctx.store = &store;
    ctx.task = task;
    ctx.data = &data;
    ctx.provider = &provider;
    ctx.cache = cache;
    ctx.retrieval = {index, &embedder, o.retrieval_k};
    ctx.runner_factory = make_runner_factory(o);
    ctx.jobs = o.jobs;
    ctx.seed = o.seed;
    ctx.per_call_timeout = std::chrono::milliseconds(o.per_call_timeout_ms);
    ctx.sampling.parallelism = o.jobs;
    ctx.progress = [this](const std::string& line) { out << line << "\n"; };
    return ctx;
  }

  std::optional<rag::VectorIndex> maybe_index(const core::TaskSpec& task,
                                              const std::vector<core::Configuration>& configs) {
    const bool needed = std::any_of(configs.begin(), configs.end(),
                                    [](const auto& c) { return c.rag_enabled; });
    if (!needed) return std::nullopt;
    const auto path = store.index_path(task.id);
    if (!fs::exists(path)) throw MissingArtifact(path.string() + " (run rag-index first)");
    return rag::VectorIndex::load(path);
  }

  void rag_index() {
    const auto task = resolve_task(store, o.task);
    fs::path source = task.rag_source;
    if (source.is_relative()) source = store.root() / source;
    if (!fs::exists(source)) throw MissingArtifact(source.string());
    rag::HashEmbedder embedder;
    const auto index =
        rag::VectorIndex::build_from_file(source, embedder, o.chunk_size, o.chunk_overlap);
    store.write(store.index_path(task.id), index.to_json());
    out << "indexed " << index.entries().size() << " chunks from " << source.string() << "\n";
  }

  void gen_functions() {
    const auto task = resolve_task(store, o.task);
    const auto configs = core::enumerate_configurations(domain_of(o), core::Purpose::codegen);
    const auto data = load_task_data(store, task.id, o.seed);
    auto provider = make_provider(o);
    std::optional<llm::ResponseCache> cache;
    if (!o.no_cache) cache.emplace(store.cache_dir());
    const auto index = maybe_index(task, configs);
    rag::HashEmbedder embedder;
    auto ctx = context(task, data, *provider, cache ? &*cache : nullptr,
                       index ? &*index : nullptr, embedder);
    const auto h = run_function_experiment(ctx, configs, o.n_functions);
    out << h.runs.size() << " function run(s), " << h.failed.size() << " failed\n";
  }

  void gen_datasets() {
    const auto task = resolve_task(store, o.task);
    const auto configs = core::enumerate_configurations(domain_of(o), core::Purpose::datagen);
    const auto data = load_task_data(store, task.id, o.seed);
    auto provider = make_provider(o);
    std::optional<llm::ResponseCache> cache;
    if (!o.no_cache) cache.emplace(store.cache_dir());
    const auto index = maybe_index(task, configs);
    rag::HashEmbedder embedder;
    auto ctx = context(task, data, *provider, cache ? &*cache : nullptr,
                       index ? &*index : nullptr, embedder);
    datagen::DatasetOptions options;
    options.target = o.dataset_size;
    options.timeout_seconds = o.timeout_s;
    options.rows_per_batch = o.rows_per_batch;
    options.max_batches = o.max_batches;
    const auto p = run_dataset_experiment(ctx, configs, o.m_datasets, options);
    out << p.runs.size() << " dataset run(s), " << p.failed.size() << " failed\n";
  }

  void evaluate() {
    const auto task = resolve_task(store, o.task);
    const auto dom = domain_of(o);
    const auto codegen_cfgs = core::enumerate_configurations(dom, core::Purpose::codegen);
    const auto datagen_cfgs = core::enumerate_configurations(dom, core::Purpose::datagen);
    const auto h = load_function_experiment(store, task.id, codegen_cfgs);
    const auto p = load_dataset_experiment(store, task.id, datagen_cfgs);
    if (h.runs.empty() && h.failed.empty()) {
      throw MissingArtifact(
          (store.root() / "runs" / task.id / "codegen").string() + " (run gen-functions first)");
    }
    const auto data = load_task_data(store, task.id, o.seed);
    llm::ReplayProvider unused;
    rag::HashEmbedder embedder;
    auto ctx = context(task, data, unused, nullptr, nullptr, embedder);
    const auto grid = evaluate_experiment(ctx, h, p);
    out << "scored " << grid.runs.size() << " function run(s) against "
        << grid.dataset_configs.size() << " dataset run(s): "
        << store.grid_path(task.id).string() << "\n";
  }

  TaskScores scores_for(const std::string& task_id) {
    return to_scores(load_grid(store, task_id), eval::parse_metric(o.metric));
  }

  void rank() {
    const auto task = resolve_task(store, o.task);
    const auto ks = checked_ks(o);
    const auto scores = scores_for(task.id);
    std::optional<std::size_t> s_index;
    if (o.selector != "val" && o.selector != "test") {
      for (std::size_t s = 0; s < scores.dataset_configs.size(); ++s) {
        if (scores.dataset_configs[s].slug() == o.selector) s_index = s;
      }
      if (!s_index) {
        throw InvalidArgument("unknown selector '" + o.selector +
                              "' (val, test or a stored dataset run slug)");
      }
    }
    nlohmann::ordered_json j;
    j["task"] = task.id;
    j["metric"] = o.metric;
    j["selector"] = o.selector;
    j["seed"] = o.seed;
    j["ks"] = ks;
    auto& runs = j["runs"] = nlohmann::ordered_json::array();
    for (const auto& run : scores.runs) {
      const auto& selector_scores = s_index ? run.synthetic[*s_index]
                                    : o.selector == "val" ? run.val
                                                          : run.test;
      const auto prefix = task.id + "/" + run.config.slug() + "/";
      const auto ranked = eval::rank(run.config.slug(), o.selector, selector_scores);
      nlohmann::ordered_json r;
      r["run"] = run.config.slug();
      r["configuration"] = run.config.label();
      auto refs = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < ranked.scores.size(); ++i) refs.push_back(prefix + std::to_string(i));
      r["function_refs"] = refs;
      r["scores"] = ranked.scores;
      r["order"] = ranked.order;
      auto& top = r["top_k"] = nlohmann::ordered_json::object();
      for (const auto k : ks) {
        auto picked = nlohmann::ordered_json::array();
        for (const auto i : eval::top_k_select(ranked, std::min(k, ranked.scores.size()), o.seed)) {
          picked.push_back(prefix + std::to_string(i));
        }
        top[std::to_string(k)] = picked;
      }
      runs.push_back(std::move(r));
    }
    const auto path = store.ranking_path(task.id, o.selector);
    store.write(path, j.dump(2) + "\n");
    out << "wrote " << path.string() << "\n";
  }

  void analyze() {
    const auto task = resolve_task(store, o.task);
    const auto ks = checked_ks(o);
    if (o.rq == "rq1") {
      const auto f = parse_rq1_factor(o.factor);
      const auto name = f == Rq1Factor::rag ? std::string("rq1") : "rq1_" + o.factor;
      write_report(store, task.id, name, rq1_effect(scores_for(task.id), f), out);
    } else if (o.rq == "rq2") {
      write_report(store, task.id, "rq2", rq2_effect(scores_for(task.id), ks, o.seed), out);
    } else if (o.rq == "rq3") {
      const auto names = o.baselines.empty() ? default_baselines(task.id) : o.baselines;
      write_report(store, task.id, "rq3", rq3_compare(scores_for(task.id), names, ks, o.seed), out);
    } else {
      std::string other = o.other_task;
      if (other.empty()) other = task.id == "xss" ? "sqli" : "xss";
      resolve_task(store, other);
      const auto t = rq4_transfer(scores_for(task.id), scores_for(other), ks, o.seed, o.strict);
      write_report(store, task.id, "rq4", t.to_report(), out);
    }
  }

  void report() {
    const auto task = resolve_task(store, o.task);
    const auto ks = checked_ks(o);
    const auto scores = scores_for(task.id);
    std::optional<Factor> factor;
    if (!o.ntd_factor.empty()) factor = parse_factor(o.ntd_factor);
    const auto ntd = ntd_summary(scores, factor, o.per_function);
    write_report(store, task.id, "ntd", ntd, out);
    const auto best = tda_best_run(scores);
    out << "NTD mean " << o.metric << ": " << ntd.summary["grand_mean"].get<double>() << "\n"
        << "TDA U_best: " << scores.runs[best].config.label() << "\n";
    try {
      write_report(store, task.id, "rq1", rq1_effect(scores, Rq1Factor::rag), out);
    } catch (const MissingFactorLevel& e) {
      out << "rq1 skipped: " << e.what() << "\n";
    }
    if (!scores.dataset_configs.empty()) {
      for (const auto k : ks) {
        const auto s = best_dataset_run(scores, best, k, o.seed);
        out << "S_best (k=" << k << "): " << scores.dataset_configs[s].label() << "\n";
      }
      write_report(store, task.id, "rq2", rq2_effect(scores, ks, o.seed), out);
    } else {
      out << "rq2 skipped: no synthetic dataset runs\n";
    }
    const auto names = o.baselines.empty() ? default_baselines(task.id) : o.baselines;
    write_report(store, task.id, "rq3", rq3_compare(scores, names, ks, o.seed), out);
  }
};

std::string join_argv(const std::vector<std::string>& argv) {
  std::string s;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int run_command(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"LLM-generated attack detector pipeline", "detforge"};
  app.require_subcommand(1);
  app.fallthrough(false);

  auto* rag_index = app.add_subcommand("rag-index", "Chunk and index a task's knowledge document");
  add_workspace(rag_index, o);
  rag_index->add_option("--chunk-size", o.chunk_size, "Chunk size in characters")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rag_index->add_option("--chunk-overlap", o.chunk_overlap, "Chunk overlap in characters")
      ->capture_default_str();

  auto* gen_functions = app.add_subcommand("gen-functions", "Generate Function Runs");
  add_workspace(gen_functions, o);
  add_generation(gen_functions, o);
  gen_functions->add_option("--n-functions", o.n_functions, "Functions per run (n)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_functions->add_option("--runner", o.runner, "Detector runner for smoke checks")
      ->check(CLI::IsMember({"process", "scripted"}))
      ->capture_default_str();
  gen_functions->add_option("--runner-cmd", o.runner_cmd, "Runner process command line")
      ->capture_default_str();
  gen_functions->add_option("--per-call-timeout-ms", o.per_call_timeout_ms, "Per-payload timeout")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* gen_datasets = app.add_subcommand("gen-datasets", "Generate Synthetic Dataset Runs");
  add_workspace(gen_datasets, o);
  add_generation(gen_datasets, o);
  gen_datasets->add_option("--m-datasets", o.m_datasets, "Datasets per run (m)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_datasets->add_option("--timeout", o.timeout_s, "Seconds allowed per dataset")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_datasets->add_option("--dataset-size", o.dataset_size, "Examples per dataset")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_datasets->add_option("--rows-per-batch", o.rows_per_batch, "Rows requested per model call")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_datasets->add_option("--max-batches", o.max_batches, "Model calls allowed per dataset")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Score stored runs on val, test and synthetic data");
  add_workspace(evaluate, o);
  add_runner(evaluate, o);

  auto* rank = app.add_subcommand("rank", "Rank each Function Run and select top_k");
  add_workspace(rank, o);
  add_ranking(rank, o);
  rank->add_option("--selector", o.selector, "val, test or a dataset run slug")
      ->capture_default_str();

  auto* analyze = app.add_subcommand("analyze", "Run one research-question analysis");
  add_workspace(analyze, o);
  add_ranking(analyze, o);
  analyze->add_option("rq", o.rq, "Analysis")
      ->required()
      ->check(CLI::IsMember({"rq1", "rq2", "rq3", "rq4"}));
  analyze->add_option("--factor", o.factor, "RQ1 factor")
      ->check(CLI::IsMember({"rag", "few_shot_given_rag", "few_shot_given_no_rag"}))
      ->capture_default_str();
  analyze->add_option("--baselines", o.baselines, "RQ3 baselines (default per task)")
      ->delimiter(',');
  analyze->add_option("--other-task", o.other_task, "RQ4 second task (default: the other one)");
  analyze->add_flag("--strict", o.strict, "RQ4: fail when a transferred configuration is missing");

  auto* report = app.add_subcommand("report", "Write the NTD summary and the RQ1-RQ3 reports");
  add_workspace(report, o);
  add_ranking(report, o);
  report->add_option("--ntd-factor", o.ntd_factor, "Condition the NTD summary on a factor")
      ->check(CLI::IsMember({"model", "temperature", "n_shot", "rag"}));
  report->add_flag("--per-function", o.per_function, "Weight the NTD mean by function");
  report->add_option("--baselines", o.baselines, "RQ3 baselines (default per task)")
      ->delimiter(',');

  std::vector<char*> cargv;
  std::vector<std::string> storage(argv.begin(), argv.end());
  if (storage.empty()) storage.push_back("detforge");
  for (auto& a : storage) cargv.push_back(a.data());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  int code = kExitOk;
  std::unique_ptr<Session> session;
  std::map<std::string, std::string> before;
  try {
    session.reset(new Session{o, ExperimentStore(o.workspace), out, err});
    before = session->store.manifest();
    if (*rag_index) session->rag_index();
    if (*gen_functions) session->gen_functions();
    if (*gen_datasets) session->gen_datasets();
    if (*evaluate) session->evaluate();
    if (*rank) session->rank();
    if (*analyze) session->analyze();
    if (*report) session->report();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kExitDomainError;
  }

  if (session) {
    std::string line = timestamp() + "\t" + join_argv(storage) + "\tseed=" +
                       std::to_string(o.seed) + "\texit=" + std::to_string(code) + "\t";
    bool first = true;
    for (const auto& [path, digest] : session->store.manifest()) {
      const auto it = before.find(path);
      if (it != before.end() && it->second == digest) continue;
      line += (first ? "" : ",") + path + "=" + digest.substr(0, 16);
      first = false;
    }
    try {
      session->store.journal(line);
    } catch (const std::exception& e) {
      err << "warning: " << e.what() << "\n";
    }
  }
  return code;
}

}  // namespace detforge::cli
