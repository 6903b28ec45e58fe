#include "detforge/codegen/codegen.hpp"

#include "detforge/core/dataset_io.hpp"
#include "detforge/core/rng.hpp"
#include "detforge/prompt/prompt.hpp"
#include "json.hpp"

namespace detforge::codegen {

std::string_view to_string(Health health) {
  switch (health) {
    case Health::ok: return "ok";
    case Health::extraction_failed: return "extraction_failed";
    case Health::broken: return "broken";
  }
  return "broken";
}

Health parse_health(std::string_view text) {
  if (text == "ok") return Health::ok;
  if (text == "extraction_failed") return Health::extraction_failed;
  if (text == "broken") return Health::broken;
  throw InvalidArgument("unknown health '" + std::string(text) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Extraction extract_code(std::string_view text, std::string_view entrypoint_name) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) {
    const auto raw = trim(text);
    if (raw.empty() || raw.find(entrypoint_name) == std::string_view::npos) {
      throw ExtractionFailed("no fenced code block and no mention of " +
                             std::string(entrypoint_name));
    }
    return {std::string(raw), ExtractionPath::raw};
  }
  // The opening fence line may carry a language tag.
  const auto body_start = text.find('\n', open);
  if (body_start == std::string_view::npos) throw ExtractionFailed("empty fenced code block");
  auto body = text.substr(body_start + 1);
  if (const auto close = body.find("```"); close != std::string_view::npos) {
    body = body.substr(0, close);
  }
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.remove_suffix(1);
  if (trim(body).empty()) throw ExtractionFailed("empty fenced code block");
  return {std::string(body), ExtractionPath::fenced};
}

std::size_t FunctionRun::broken_count() const {
  std::size_t n = 0;
  for (const auto& f : functions) n += f.usable() ? 0 : 1;
  return n;
}

std::vector<sandbox::Candidate> FunctionRun::candidates() const {
  std::vector<sandbox::Candidate> out;
  out.reserve(functions.size());
  for (const auto& f : functions) out.push_back(f.candidate());
  return out;
}

std::vector<bool> FunctionRun::broken() const {
  std::vector<bool> out;
  out.reserve(functions.size());
  for (const auto& f : functions) out.push_back(!f.usable());
  return out;
}

bool exceeds_failure_threshold(std::size_t broken, std::size_t n) { return broken * 5 > n * 4; }

std::vector<std::string> select_smoke_inputs(const core::Dataset& train, std::uint64_t seed,
                                             std::size_t per_class) {
  std::vector<std::size_t> malicious, benign;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (train[i].label == core::Label::malicious ? malicious : benign).push_back(i);
  }
  core::SeededRng rng(seed);
  std::vector<std::string> out;
  for (auto* pool : {&malicious, &benign}) {
    const auto take = std::min(per_class, pool->size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap((*pool)[i], (*pool)[i + rng.below(pool->size() - i)]);
      out.push_back(train[(*pool)[i]].payload);
    }
  }
  return out;
}

Health smoke_check(const sandbox::Candidate& candidate, std::span<const std::string> smoke_inputs,
                   sandbox::Runner& runner, std::chrono::milliseconds per_call_timeout,
                   std::string* detail) {
  if (smoke_inputs.empty()) throw InvalidArgument("smoke_check: no smoke inputs");
  auto fail = [&](std::string why) {
    if (detail) *detail = std::move(why);
    return Health::broken;
  };
  try {
    const auto loaded = runner.load(candidate);
    if (!loaded.ok) return fail("load failed: " + loaded.error);
    const auto verdicts = runner.eval(candidate.ref, smoke_inputs, per_call_timeout);
    runner.unload(candidate.ref);
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      if (verdicts[i].failed()) {
        return fail("smoke input " + std::to_string(i) + ": " + verdicts[i].detail.value_or(""));
      }
    }
  } catch (const sandbox::RunnerCrashed& e) {
    return fail(std::string("runner crashed: ") + e.what());
  }
  if (detail) detail->clear();
  return Health::ok;
}

FunctionRun generate_function_run(const core::TaskSpec& task, const core::Configuration& cfg,
                                  llm::Provider& provider, llm::ResponseCache* cache,
                                  const RetrievalContext& retrieval, const core::Dataset& train,
                                  sandbox::Runner& runner, const FunctionRunOptions& options) {
  cfg.validate();
  if (cfg.purpose != core::Purpose::codegen) {
    throw InvalidArgument("generate_function_run needs a codegen configuration");
  }
  if (options.n < 1) throw InvalidArgument("generate_function_run: n must be at least 1");

  const auto tpl = prompt::Template::code_generation();
  const auto shots = prompt::select_few_shot(train, cfg.n_shot, options.seed);
  auto p = prompt::build_prompt(tpl, task, shots, {});
  if (cfg.rag_enabled) {
    if (!retrieval.index || !retrieval.embedder) {
      throw InvalidArgument("configuration " + cfg.label() + " needs a RAG index");
    }
    const auto chunks = retrieval.index->retrieve(*retrieval.embedder, p.user_part, retrieval.k);
    p = prompt::build_prompt(tpl, task, shots, chunks);
  }

  const auto responses = llm::sample_n(provider, cache, p, cfg, options.n, options.sampling);
  const auto smoke = select_smoke_inputs(train, options.seed);

  FunctionRun run{task.id, cfg, {}, false, p.digest()};
  run.functions.reserve(responses.size());
  const auto prefix = task.id + "/" + cfg.slug() + "/";
  for (std::size_t i = 0; i < responses.size(); ++i) {
    GeneratedFunction f;
    f.sample_index = static_cast<int>(i);
    f.ref = prefix + std::to_string(i);
    f.entrypoint_name = task.entrypoint_name;
    try {
      auto ex = extract_code(responses[i].text, task.entrypoint_name);
      f.source = std::move(ex.source);
      f.detail = ex.path == ExtractionPath::fenced ? "fenced" : "raw";
    } catch (const ExtractionFailed& e) {
      f.health = Health::extraction_failed;
      f.detail = e.what();
      run.functions.push_back(std::move(f));
      continue;
    }
    if (f.source.find(task.entrypoint_name) == std::string::npos) {
      f.health = Health::broken;
      f.detail = "entrypoint not found: " + task.entrypoint_name;
    } else {
      std::string why;
      f.health = smoke_check(f.candidate(), smoke, runner, options.per_call_timeout, &why);
      if (f.health != Health::ok) f.detail = std::move(why);
    }
    run.functions.push_back(std::move(f));
  }
  run.failed = exceeds_failure_threshold(run.broken_count(), run.functions.size());
  return run;
}

std::string function_run_json(const FunctionRun& run) {
  nlohmann::ordered_json j;
  j["task_id"] = run.task_id;
  j["config"] = nlohmann::ordered_json(nlohmann::json(run.config));
  j["n"] = run.functions.size();
  j["failed"] = run.failed;
  j["broken_count"] = run.broken_count();
  j["prompt_digest"] = run.prompt_digest;
  auto& fs = j["functions"] = nlohmann::ordered_json::array();
  for (const auto& f : run.functions) {
    fs.push_back({{"sample_index", f.sample_index},
                  {"ref", f.ref},
                  {"health", to_string(f.health)},
                  {"detail", f.detail},
                  {"entrypoint", f.entrypoint_name}});
  }
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

void save_function_run(const FunctionRun& run, const std::filesystem::path& dir) {
  for (const auto& f : run.functions) {
    core::write_file_atomic(dir / ("sample_" + std::to_string(f.sample_index) + ".src"), f.source);
  }
  core::write_file_atomic(dir / "run.json", function_run_json(run));
}

FunctionRun load_function_run(const std::filesystem::path& dir) {
  const auto manifest = dir / "run.json";
  if (!std::filesystem::exists(manifest)) throw MissingArtifact(manifest.string());
  try {
    const auto j = nlohmann::json::parse(core::read_file(manifest));
    FunctionRun run;
    run.task_id = j.at("task_id").get<std::string>();
    run.config = j.at("config").get<core::Configuration>();
    run.failed = j.at("failed").get<bool>();
    run.prompt_digest = j.at("prompt_digest").get<std::string>();
    for (const auto& e : j.at("functions")) {
      GeneratedFunction f;
      f.sample_index = e.at("sample_index").get<int>();
      f.ref = e.at("ref").get<std::string>();
      f.health = parse_health(e.at("health").get<std::string>());
      f.detail = e.at("detail").get<std::string>();
      f.entrypoint_name = e.at("entrypoint").get<std::string>();
      const auto src = dir / ("sample_" + std::to_string(f.sample_index) + ".src");
      if (!std::filesystem::exists(src)) throw MissingArtifact(src.string());
      f.source = core::read_file(src);
      run.functions.push_back(std::move(f));
    }
    return run;
  } catch (const nlohmann::json::exception& e) {
    throw Error(manifest.string() + ": malformed run manifest: " + e.what());
  }
}

}  // namespace detforge::codegen
