#include "detforge/llm/llm.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "detforge/core/dataset_io.hpp"
#include "detforge/core/digest.hpp"
#include "json.hpp"

namespace detforge::llm {

namespace {

void frame(std::string& out, std::string_view name, std::string_view value) {
  out += name;
  out += ':';
  out += std::to_string(value.size());
  out += ':';
  out += value;
  out += '\n';
}

}  // namespace

CacheKey cache_key(std::string_view provider_id, const GenerationRequest& req) {
  std::string canonical = "detforge-cache-v1\n";
  frame(canonical, "provider_id", provider_id);
  frame(canonical, "model_id", req.model_id);
  frame(canonical, "system_part", req.system_part);
  frame(canonical, "user_part", req.user_part);
  frame(canonical, "temperature", core::format_real(req.temperature));
  frame(canonical, "sample_index", std::to_string(req.sample_index));
  return CacheKey{core::sha256_hex(canonical)};
}

std::filesystem::path ResponseCache::path_for(const CacheKey& key) const {
  return root_ / key.digest.substr(0, 2) / (key.digest + ".json");
}

std::optional<GenerationResponse> ResponseCache::load(const CacheKey& key) const {
  const auto path = path_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(core::read_file(path));
    const auto& r = j.at("response");
    return GenerationResponse{
        .text = r.at("text").get<std::string>(),
        .provider_id = r.at("provider_id").get<std::string>(),
        .latency_ms = r.at("latency_ms").get<std::int64_t>(),
        .cached = true,
    };
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void ResponseCache::store(const CacheKey& key, const GenerationRequest& req,
                          const GenerationResponse& resp) {
  nlohmann::ordered_json j;
  j["key"] = key.digest;
  j["request"] = {{"model_id", req.model_id},
                  {"system_part", req.system_part},
                  {"user_part", req.user_part},
                  {"temperature", req.temperature},
                  {"sample_index", req.sample_index}};
  j["response"] = {{"text", resp.text},
                   {"provider_id", resp.provider_id},
                   {"latency_ms", resp.latency_ms}};
  const auto text = j.dump(1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  std::lock_guard lock(write_mutex_);
  core::write_file_atomic(path_for(key), text);
}

StubProvider::StubProvider(Script script, std::string id)
    : script_(std::move(script)), id_(std::move(id)) {}

std::unique_ptr<StubProvider> StubProvider::cycling(std::vector<std::string> texts) {
  if (texts.empty()) throw InvalidArgument("stub provider needs at least one text");
  return std::make_unique<StubProvider>([texts = std::move(texts)](const GenerationRequest& r) {
    return texts[static_cast<std::size_t>(r.sample_index) % texts.size()];
  });
}

std::unique_ptr<StubProvider> StubProvider::from_file(const std::filesystem::path& path) {
  struct Rule {
    std::optional<std::string> model;
    std::optional<std::string> contains;
    std::vector<std::string> texts;
  };
  std::vector<Rule> rules;
  std::vector<std::string> fallback;
  std::string id = "stub";
  try {
    auto j = nlohmann::json::parse(core::read_file(path));
    id = j.value("id", id);
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
      Rule rule;
      if (r.contains("model")) rule.model = r.at("model").get<std::string>();
      if (r.contains("contains")) rule.contains = r.at("contains").get<std::string>();
      r.at("texts").get_to(rule.texts);
      if (rule.texts.empty()) throw InvalidArgument(path.string() + ": stub rule without texts");
      rules.push_back(std::move(rule));
    }
    fallback = j.value("default", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path.string() + ": malformed stub script: " + e.what());
  }
  return std::make_unique<StubProvider>(
      [rules = std::move(rules), fallback = std::move(fallback)](const GenerationRequest& req) {
        const auto idx = static_cast<std::size_t>(req.sample_index);
        for (const auto& rule : rules) {
          if (rule.model && *rule.model != req.model_id) continue;
          if (rule.contains && req.system_part.find(*rule.contains) == std::string::npos &&
              req.user_part.find(*rule.contains) == std::string::npos) {
            continue;
          }
          return rule.texts[idx % rule.texts.size()];
        }
        if (fallback.empty()) {
          throw ProviderError("stub script has no rule for model " + req.model_id,
                              req.sample_index);
        }
        return fallback[idx % fallback.size()];
      },
      id);
}

std::string StubProvider::generate(const GenerationRequest& req) {
  ++calls_;
  return script_(req);
}

std::vector<GenerationResponse> sample_n(Provider& provider, ResponseCache* cache,
                                         const prompt::Prompt& prompt,
                                         const core::Configuration& cfg, int n,
                                         const SamplingOptions& options) {
  if (n < 1) throw InvalidArgument("sample_n: n must be at least 1");
  if (options.max_attempts < 1) throw InvalidArgument("sample_n: max_attempts must be >= 1");

  std::vector<GenerationResponse> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  std::atomic<bool> abort{false};
  const std::string provider_id = provider.id();

  auto one = [&](int i) {
    GenerationRequest req{cfg.model_id, prompt.system_part, prompt.user_part, cfg.temperature,
                          options.sample_offset + i};
    const auto key = cache_key(provider_id, req);
    if (cache) {
      if (auto hit = cache->load(key)) return *hit;
    }
    auto backoff = options.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      const auto start = std::chrono::steady_clock::now();
      try {
        GenerationResponse resp{
            .text = provider.generate(req),
            .provider_id = provider_id,
            .latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start)
                              .count(),
            .cached = false,
        };
        if (cache) cache->store(key, req, resp);
        return resp;
      } catch (const TransientProviderError& e) {
        if (attempt >= options.max_attempts) {
          throw ProviderError(std::string(e.what()) + " (after " + std::to_string(attempt) +
                                  " attempts)",
                              req.sample_index);
        }
      }
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  };

  auto worker = [&] {
    for (int i = next++; i < n && !abort; i = next++) {
      try {
        out[static_cast<std::size_t>(i)] = one(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
        abort = true;
      }
    }
  };

  const int threads = std::clamp(options.parallelism, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace detforge::llm
