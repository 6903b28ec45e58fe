#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "detforge/core/config.hpp"

namespace detforge::experiment {

/// Workspace layout and artifact manifest. Every artifact written through
/// the store gets its SHA-256 recorded in `manifest.json`.
class ExperimentStore {
 public:
  explicit ExperimentStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path data_dir(const std::string& task) const;
  std::filesystem::path index_path(const std::string& task) const;
  std::filesystem::path cache_dir() const;
  std::filesystem::path codegen_dir(const std::string& task, const core::Configuration& cfg) const;
  std::filesystem::path datagen_dir(const std::string& task, const core::Configuration& cfg) const;
  std::filesystem::path grid_path(const std::string& task) const;
  std::filesystem::path ranking_path(const std::string& task, const std::string& selector) const;
  std::filesystem::path report_path(const std::string& task, const std::string& name) const;

  /// Writes `content` atomically and records its digest.
  void write(const std::filesystem::path& path, std::string_view content);
  /// Records the digest of a file written elsewhere.
  void record(const std::filesystem::path& path);
  /// Digests recorded so far, keyed by root-relative path.
  std::map<std::string, std::string> manifest() const;
  /// Paths whose file is missing or no longer matches its digest.
  std::vector<std::string> verify() const;

  /// Appends one line to `journal.log`.
  void journal(const std::string& line);

 private:
  std::string relative(const std::filesystem::path& path) const;
  void save_manifest_locked();

  std::filesystem::path root_;
  std::map<std::string, std::string> manifest_;
  mutable std::mutex mutex_;
};

}  // namespace detforge::experiment
