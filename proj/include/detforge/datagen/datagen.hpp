#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "detforge/codegen/codegen.hpp"
#include "detforge/core/config.hpp"
#include "detforge/core/error.hpp"
#include "detforge/core/types.hpp"
#include "detforge/llm/llm.hpp"

namespace detforge::datagen {

class NoTabularContent : public Error {
 public:
  using Error::Error;
};

class DatasetTimeout : public Error {
 public:
  DatasetTimeout(int dataset_index, double seconds, std::size_t collected)
      : Error("synthetic dataset " + std::to_string(dataset_index) + " timed out after " +
              std::to_string(seconds) + " s with " + std::to_string(collected) + " examples"),
        dataset_index_(dataset_index) {}
  int dataset_index() const noexcept { return dataset_index_; }

 private:
  int dataset_index_;
};

struct SyntheticExample {
  std::string payload;
  core::Label label = core::Label::benign;
  int batch_index = 0;

  friend bool operator==(const SyntheticExample&, const SyntheticExample&) = default;
};

struct ParsedRows {
  std::vector<SyntheticExample> examples;
  std::size_t dropped = 0;
};

/// 0/1, true/false, benign/malicious in any case; anything else is nullopt.
std::optional<core::Label> parse_label(std::string_view text);

/// Reads `payload,label` rows from the first fenced block or the raw text.
/// Rows with an empty payload or an unknown label are dropped and counted.
/// Throws NoTabularContent when there is no such header.
ParsedRows parse_synthetic_rows(std::string_view text);

struct SyntheticDataset {
  int dataset_index = 0;
  std::vector<SyntheticExample> examples;
  double generation_seconds = 0.0;
  int batches = 0;
  std::size_t dropped_rows = 0;
  std::size_t duplicate_rows = 0;
  bool timed_out = false;

  core::ClassCounts counts() const;
  core::Dataset to_dataset(std::string name) const;
};

struct SyntheticDatasetRun {
  std::string task_id;
  core::Configuration config;
  std::vector<SyntheticDataset> datasets;
  bool failed = false;
  std::string prompt_digest;
};

/// Seconds since an arbitrary epoch; injectable for timeout tests.
using Clock = std::function<double()>;
Clock steady_clock();

struct DatasetOptions {
  std::size_t target = 100;
  double timeout_seconds = 9000.0;
  std::size_t rows_per_batch = 50;
  /// Upper bound on model calls per dataset; reaching it counts as a timeout.
  int max_batches = 500;
  std::uint64_t seed = 7;
  llm::SamplingOptions sampling;
  Clock clock;
};

/// Request appended to the user part of every dataset prompt.
std::string csv_request(std::size_t rows);

/// Batches until `target` distinct payloads have arrived, then truncates to
/// exactly `target` in arrival order. Throws DatasetTimeout past the deadline.
/// `partial`, when given, receives what was collected before a timeout.
SyntheticDataset generate_synthetic_dataset(const core::TaskSpec& task,
                                            const core::Configuration& cfg, int dataset_index,
                                            llm::Provider& provider, llm::ResponseCache* cache,
                                            const codegen::RetrievalContext& retrieval,
                                            const core::Dataset& train,
                                            const DatasetOptions& options = {},
                                            SyntheticDataset* partial = nullptr);

/// m datasets; stops at the first timeout and marks the run failed, keeping
/// the partial dataset as the last entry.
SyntheticDatasetRun generate_dataset_run(const core::TaskSpec& task,
                                         const core::Configuration& cfg, int m,
                                         llm::Provider& provider, llm::ResponseCache* cache,
                                         const codegen::RetrievalContext& retrieval,
                                         const core::Dataset& train,
                                         const DatasetOptions& options = {});

/// `dir/dataset_<j>.csv` per complete dataset (`.partial.csv` for a timed-out
/// one) and `dir/run.json`.
void save_dataset_run(const SyntheticDatasetRun& run, const std::filesystem::path& dir);
SyntheticDatasetRun load_dataset_run(const std::filesystem::path& dir);
std::string dataset_run_json(const SyntheticDatasetRun& run);

}  // namespace detforge::datagen
