#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "detforge/core/types.hpp"

namespace dftest {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "df") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline detforge::core::Dataset make_dataset(std::string name,
                                            const std::vector<std::pair<std::string, bool>>& rows) {
  std::vector<detforge::core::LabeledExample> ex;
  for (const auto& [payload, malicious] : rows) {
    ex.push_back({payload, malicious ? detforge::core::Label::malicious
                                     : detforge::core::Label::benign});
  }
  return detforge::core::Dataset(std::move(name), std::move(ex));
}

/// n malicious payloads "<script>i</script>" and n benign "page=i".
inline detforge::core::Dataset balanced(std::size_t n, const std::string& name = "d") {
  std::vector<std::pair<std::string, bool>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({"<script>" + std::to_string(i) + "</script>", true});
    rows.push_back({"page=" + std::to_string(i), false});
  }
  return make_dataset(name, rows);
}

inline std::string fenced_detector(const std::vector<std::string>& directives,
                                   const std::string& entry = "detect_xss") {
  std::string s = "```python\ndef " + entry + "(http_get_request: str) -> bool:\n";
  for (const auto& d : directives) s += "    # df: " + d + "\n";
  return s + "    return False\n```\n";
}

}  // namespace dftest
