#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "detforge/core/config.hpp"
#include "detforge/core/error.hpp"
#include "detforge/prompt/prompt.hpp"

namespace detforge::llm {

/// Raised once a sample has exhausted its attempts, or for a
/// non-retryable provider failure.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, std::optional<int> sample_index = std::nullopt)
      : Error(sample_index ? "sample " + std::to_string(*sample_index) + ": " + what : what),
        sample_index_(sample_index) {}
  std::optional<int> sample_index() const noexcept { return sample_index_; }

 private:
  std::optional<int> sample_index_;
};

/// Retryable failure (network, 429, 5xx). Providers throw it; sample_n
/// retries and converts the last one into ProviderError.
class TransientProviderError : public Error {
 public:
  using Error::Error;
};

class ReplayMiss : public Error {
 public:
  explicit ReplayMiss(int sample_index)
      : Error("replay cache has no entry for sample " + std::to_string(sample_index)),
        sample_index_(sample_index) {}
  int sample_index() const noexcept { return sample_index_; }

 private:
  int sample_index_;
};

struct GenerationRequest {
  std::string model_id;
  std::string system_part;
  std::string user_part;
  double temperature = 0.0;
  int sample_index = 0;
};

struct GenerationResponse {
  std::string text;
  std::string provider_id;
  std::int64_t latency_ms = 0;
  bool cached = false;
};

struct CacheKey {
  std::string digest;  // 64 lower-case hex chars

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

/// SHA-256 of a length-framed canonical serialization of the provider
/// namespace and every request field, in fixed order.
CacheKey cache_key(std::string_view provider_id, const GenerationRequest& req);

/// `root/<first-2-hex>/<digest>.json`, one file per key. Writes are
/// serialized and atomic.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path path_for(const CacheKey& key) const;
  std::optional<GenerationResponse> load(const CacheKey& key) const;
  void store(const CacheKey& key, const GenerationRequest& req, const GenerationResponse& resp);

 private:
  std::filesystem::path root_;
  std::mutex write_mutex_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  /// Namespace used in cache keys.
  virtual std::string id() const = 0;
  /// Returns the raw completion text. Throws TransientProviderError for
  /// retryable failures, ProviderError or ReplayMiss otherwise.
  virtual std::string generate(const GenerationRequest& req) = 0;
  /// Number of generate() calls made so far.
  virtual std::size_t calls() const = 0;
};

/// Deterministic scripted provider for tests and hermetic runs.
class StubProvider final : public Provider {
 public:
  using Script = std::function<std::string(const GenerationRequest&)>;

  explicit StubProvider(Script script, std::string id = "stub");
  /// Returns texts[sample_index % texts.size()] for every request.
  static std::unique_ptr<StubProvider> cycling(std::vector<std::string> texts);
  /// Loads a JSON script file; see README for the format.
  static std::unique_ptr<StubProvider> from_file(const std::filesystem::path& path);

  std::string id() const override { return id_; }
  std::string generate(const GenerationRequest& req) override;
  std::size_t calls() const override { return calls_.load(); }

 private:
  Script script_;
  std::string id_;
  std::atomic<std::size_t> calls_{0};
};

/// Cache-only provider: any request reaching it is a miss.
class ReplayProvider final : public Provider {
 public:
  /// `recorded_id` is the namespace of the provider that filled the cache.
  explicit ReplayProvider(std::string recorded_id = "live") : recorded_id_(std::move(recorded_id)) {}

  std::string id() const override { return recorded_id_; }
  std::string generate(const GenerationRequest& req) override {
    throw ReplayMiss(req.sample_index);
  }
  std::size_t calls() const override { return 0; }

 private:
  std::string recorded_id_;
};

/// OpenAI-style chat-completions client: POST <base>/chat/completions.
class LiveProvider final : public Provider {
 public:
  LiveProvider(std::string api_base, std::string api_key,
               std::chrono::seconds timeout = std::chrono::seconds(120));
  /// Reads DF_API_BASE and DF_API_KEY; throws ProviderError when unset.
  static std::unique_ptr<LiveProvider> from_environment();

  std::string id() const override { return "live"; }
  std::string generate(const GenerationRequest& req) override;
  std::size_t calls() const override { return calls_.load(); }

 private:
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string api_key_;
  std::chrono::seconds timeout_;
  std::atomic<std::size_t> calls_{0};
};

struct SamplingOptions {
  int parallelism = 4;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  /// Added to 0..n-1 to form sample indices.
  int sample_offset = 0;
};

/// n responses in sample_index order. Consults the cache before each call and
/// persists successful responses. Throws the lowest-index failure.
std::vector<GenerationResponse> sample_n(Provider& provider, ResponseCache* cache,
                                         const prompt::Prompt& prompt,
                                         const core::Configuration& cfg, int n,
                                         const SamplingOptions& options = {});

}  // namespace detforge::llm
