#include "detforge/experiment/store.hpp"

#include <fstream>

#include "detforge/core/dataset_io.hpp"
#include "detforge/core/digest.hpp"
#include "detforge/core/error.hpp"
#include "json.hpp"

namespace detforge::experiment {

namespace fs = std::filesystem;

ExperimentStore::ExperimentStore(fs::path root) : root_(std::move(root)) {
  const auto path = root_ / "manifest.json";
  if (!fs::exists(path)) return;
  try {
    const auto j = nlohmann::json::parse(core::read_file(path));
    manifest_ = j.at("artifacts").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": malformed manifest: " + e.what());
  }
}

fs::path ExperimentStore::data_dir(const std::string& task) const { return root_ / "data" / task; }

fs::path ExperimentStore::index_path(const std::string& task) const {
  return root_ / "rag" / task / "index.json";
}

fs::path ExperimentStore::cache_dir() const { return root_ / "cache"; }

fs::path ExperimentStore::codegen_dir(const std::string& task,
                                      const core::Configuration& cfg) const {
  return root_ / "runs" / task / "codegen" / cfg.slug();
}

fs::path ExperimentStore::datagen_dir(const std::string& task,
                                      const core::Configuration& cfg) const {
  return root_ / "runs" / task / "datagen" / cfg.slug();
}

fs::path ExperimentStore::grid_path(const std::string& task) const {
  return root_ / "scores" / task / "grid.json";
}

fs::path ExperimentStore::ranking_path(const std::string& task, const std::string& selector) const {
  return root_ / "scores" / task / "rankings" / (selector + ".json");
}

fs::path ExperimentStore::report_path(const std::string& task, const std::string& name) const {
  return root_ / "reports" / task / name;
}

std::string ExperimentStore::relative(const fs::path& path) const {
  return fs::relative(fs::absolute(path), fs::absolute(root_)).generic_string();
}

void ExperimentStore::write(const fs::path& path, std::string_view content) {
  core::write_file_atomic(path, content);
  std::lock_guard lock(mutex_);
  manifest_[relative(path)] = core::sha256_hex(content);
  save_manifest_locked();
}

void ExperimentStore::record(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifact(path.string());
  const auto digest = core::sha256_hex(core::read_file(path));
  std::lock_guard lock(mutex_);
  manifest_[relative(path)] = digest;
  save_manifest_locked();
}

std::map<std::string, std::string> ExperimentStore::manifest() const {
  std::lock_guard lock(mutex_);
  return manifest_;
}

std::vector<std::string> ExperimentStore::verify() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> bad;
  for (const auto& [rel, digest] : manifest_) {
    const auto path = root_ / rel;
    if (!fs::exists(path) || core::sha256_hex(core::read_file(path)) != digest) bad.push_back(rel);
  }
  return bad;
}

void ExperimentStore::save_manifest_locked() {
  nlohmann::ordered_json j;
  j["artifacts"] = manifest_;
  core::write_file_atomic(root_ / "manifest.json", j.dump(2) + "\n");
}

void ExperimentStore::journal(const std::string& line) {
  std::lock_guard lock(mutex_);
  fs::create_directories(root_);
  std::ofstream out(root_ / "journal.log", std::ios::app);
  if (!out) throw core::UnreadableFile((root_ / "journal.log").string(), "cannot append");
  out << line << '\n';
}

}  // namespace detforge::experiment
