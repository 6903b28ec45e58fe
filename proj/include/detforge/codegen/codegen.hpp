#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "detforge/core/config.hpp"
#include "detforge/core/error.hpp"
#include "detforge/core/types.hpp"
#include "detforge/llm/llm.hpp"
#include "detforge/rag/rag.hpp"
#include "detforge/sandbox/sandbox.hpp"

namespace detforge::codegen {

class ExtractionFailed : public Error {
 public:
  using Error::Error;
};

enum class Health { ok, extraction_failed, broken };

std::string_view to_string(Health health);
Health parse_health(std::string_view text);

enum class ExtractionPath { fenced, raw };

struct Extraction {
  std::string source;
  ExtractionPath path = ExtractionPath::fenced;
};

/// First fenced block (``` with an optional language tag); with no fence, the
/// trimmed text when it mentions the entry point. Throws ExtractionFailed.
Extraction extract_code(std::string_view text, std::string_view entrypoint_name);

struct GeneratedFunction {
  std::string ref;  // <task>/<config-slug>/<sample_index>
  std::string source;
  std::string entrypoint_name;
  int sample_index = 0;
  Health health = Health::ok;
  std::string detail;  // extraction path, or why the candidate is broken

  sandbox::Candidate candidate() const { return {ref, entrypoint_name, source}; }
  bool usable() const { return health == Health::ok; }
};

struct FunctionRun {
  std::string task_id;
  core::Configuration config;
  std::vector<GeneratedFunction> functions;
  bool failed = false;
  std::string prompt_digest;

  std::size_t broken_count() const;
  std::vector<sandbox::Candidate> candidates() const;
  /// broken()[i] is true unless function i is healthy.
  std::vector<bool> broken() const;
};

/// broken * 5 > n * 4, in exact integer arithmetic.
bool exceeds_failure_threshold(std::size_t broken, std::size_t n);

/// 5 malicious and 5 benign payloads drawn without replacement from `train`
/// (fewer when a class is short).
std::vector<std::string> select_smoke_inputs(const core::Dataset& train, std::uint64_t seed,
                                             std::size_t per_class = 5);

/// ok, or broken when the candidate fails to load or errors or times out on
/// any smoke input. `detail` receives the reason.
Health smoke_check(const sandbox::Candidate& candidate, std::span<const std::string> smoke_inputs,
                   sandbox::Runner& runner, std::chrono::milliseconds per_call_timeout,
                   std::string* detail = nullptr);

struct RetrievalContext {
  const rag::VectorIndex* index = nullptr;
  const rag::Embedder* embedder = nullptr;
  std::size_t k = rag::kDefaultRetrievalK;
};

struct FunctionRunOptions {
  int n = 40;
  std::uint64_t seed = 7;
  std::chrono::milliseconds per_call_timeout = sandbox::kDefaultPerCallTimeout;
  llm::SamplingOptions sampling;
};

/// Builds the prompt, samples n completions, extracts and smoke-checks each
/// one and applies the failure threshold.
FunctionRun generate_function_run(const core::TaskSpec& task, const core::Configuration& cfg,
                                  llm::Provider& provider, llm::ResponseCache* cache,
                                  const RetrievalContext& retrieval, const core::Dataset& train,
                                  sandbox::Runner& runner, const FunctionRunOptions& options = {});

/// Writes `dir/sample_<i>.src` for each function and `dir/run.json`.
void save_function_run(const FunctionRun& run, const std::filesystem::path& dir);
FunctionRun load_function_run(const std::filesystem::path& dir);

std::string function_run_json(const FunctionRun& run);

}  // namespace detforge::codegen
