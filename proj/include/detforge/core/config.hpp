#pragma once

#include <compare>
#include <string>
#include <vector>

#include "json.hpp"

namespace detforge::core {

enum class Purpose { codegen, datagen };

std::string to_string(Purpose purpose);
Purpose parse_purpose(std::string_view text);

/// One generation setting: model, temperature, few-shot count and RAG switch.
struct Configuration {
  std::string model_id;
  double temperature = 0.0;
  int n_shot = 0;
  bool rag_enabled = false;
  Purpose purpose = Purpose::codegen;

  void validate() const;

  /// Filesystem-safe identifier, unique per (model, temperature, n_shot, rag).
  std::string slug() const;

  /// Short human form, e.g. "(gpt-4-0125-preview, 0.5, 2, T)".
  std::string label() const;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

void to_json(nlohmann::json& j, const Configuration& cfg);
void from_json(const nlohmann::json& j, Configuration& cfg);

/// Sets of values whose cross product forms the configuration grid.
struct ConfigurationDomain {
  std::vector<std::string> codegen_models;
  std::vector<std::string> datagen_models;
  std::vector<double> temperatures;
  std::vector<int> n_shots;
  std::vector<bool> rag_options;

  void validate() const;

  /// The model and parameter grid used for the published XSS/SQLi study.
  static ConfigurationDomain standard();
  static ConfigurationDomain load(const std::string& path);
};

void to_json(nlohmann::json& j, const ConfigurationDomain& dom);
void from_json(const nlohmann::json& j, ConfigurationDomain& dom);

inline constexpr double kMaxTemperature = 2.0;

/// Cross product in canonical order: model, temperature, n_shot, rag.
std::vector<Configuration> enumerate_configurations(const ConfigurationDomain& dom,
                                                    Purpose purpose);

/// Shortest decimal text that round-trips `value`.
std::string format_real(double value);

}  // namespace detforge::core
