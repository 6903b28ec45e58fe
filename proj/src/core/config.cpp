#include "detforge/core/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "detforge/core/dataset_io.hpp"
#include "detforge/core/error.hpp"

namespace detforge::core {

std::string to_string(Purpose purpose) {
  return purpose == Purpose::codegen ? "codegen" : "datagen";
}

Purpose parse_purpose(std::string_view text) {
  if (text == "codegen") return Purpose::codegen;
  if (text == "datagen") return Purpose::datagen;
  throw InvalidArgument("unknown purpose '" + std::string(text) + "'");
}

std::string format_real(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  std::string out(buf, end);
  // Integers keep a decimal point.
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

void Configuration::validate() const {
  if (model_id.empty()) throw InvalidArgument("configuration has an empty model id");
  if (!(temperature >= 0.0 && temperature <= kMaxTemperature)) {
    throw InvalidArgument("temperature " + format_real(temperature) + " outside [0, 2]");
  }
  if (n_shot < 0 || n_shot % 2 != 0) {
    throw InvalidArgument("n_shot must be a non-negative even integer, got " +
                          std::to_string(n_shot));
  }
}

std::string Configuration::slug() const {
  std::string model;
  for (char c : model_id) {
    bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.';
    model += keep ? c : '_';
  }
  return model + "__t" + format_real(temperature) + "__s" + std::to_string(n_shot) + "__rag" +
         (rag_enabled ? "1" : "0");
}

std::string Configuration::label() const {
  return "(" + model_id + ", " + format_real(temperature) + ", " + std::to_string(n_shot) +
         ", " + (rag_enabled ? "T" : "F") + ")";
}

void to_json(nlohmann::json& j, const Configuration& cfg) {
  j = nlohmann::json{{"model_id", cfg.model_id},
                     {"temperature", cfg.temperature},
                     {"n_shot", cfg.n_shot},
                     {"rag_enabled", cfg.rag_enabled},
                     {"purpose", to_string(cfg.purpose)}};
}

void from_json(const nlohmann::json& j, Configuration& cfg) {
  j.at("model_id").get_to(cfg.model_id);
  j.at("temperature").get_to(cfg.temperature);
  j.at("n_shot").get_to(cfg.n_shot);
  j.at("rag_enabled").get_to(cfg.rag_enabled);
  cfg.purpose = parse_purpose(j.at("purpose").get<std::string>());
}

namespace {

template <typename T>
void require_unique_nonempty(const std::vector<T>& values, const char* what) {
  if (values.empty()) throw InvalidArgument(std::string("configuration domain: empty ") + what);
  std::set<T> seen(values.begin(), values.end());
  if (seen.size() != values.size()) {
    throw InvalidArgument(std::string("configuration domain: duplicate ") + what);
  }
}

}  // namespace

void ConfigurationDomain::validate() const {
  require_unique_nonempty(codegen_models, "codegen_models");
  require_unique_nonempty(datagen_models, "datagen_models");
  require_unique_nonempty(temperatures, "temperatures");
  require_unique_nonempty(n_shots, "n_shots");
  require_unique_nonempty(rag_options, "rag_options");
  for (double t : temperatures) {
    if (!(t >= 0.0 && t <= kMaxTemperature)) {
      throw InvalidArgument("configuration domain: temperature " + format_real(t) +
                            " outside [0, 2]");
    }
  }
  for (int n : n_shots) {
    if (n < 0 || n % 2 != 0) {
      throw InvalidArgument("configuration domain: n_shot " + std::to_string(n) +
                            " is not a non-negative even integer");
    }
  }
}

ConfigurationDomain ConfigurationDomain::standard() {
  return ConfigurationDomain{
      .codegen_models = {"gpt-4-0125-preview", "gpt-4-1106-preview", "anthropic-claude-3-opus",
                         "anthropic-claude-3-sonnet", "gcp-chat-bison-001",
                         "llama3-70b-instruct", "mixtral-8x7b-instruct-v01"},
      .datagen_models = {"gpt-4-0125-preview", "gpt-3.5-turbo-0125", "anthropic-claude-3-opus",
                         "anthropic-claude-3-sonnet", "anthropic-claude-3-haiku"},
      .temperatures = {0.0, 0.5, 1.0},
      .n_shots = {0, 2, 6, 10},
      .rag_options = {true, false},
  };
}

ConfigurationDomain ConfigurationDomain::load(const std::string& path) {
  ConfigurationDomain dom;
  try {
    dom = nlohmann::json::parse(read_file(path)).get<ConfigurationDomain>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path + ": malformed configuration domain: " + e.what());
  }
  dom.validate();
  return dom;
}

void to_json(nlohmann::json& j, const ConfigurationDomain& dom) {
  j = nlohmann::json{{"codegen_models", dom.codegen_models},
                     {"datagen_models", dom.datagen_models},
                     {"temperatures", dom.temperatures},
                     {"n_shots", dom.n_shots},
                     {"rag_options", dom.rag_options}};
}

void from_json(const nlohmann::json& j, ConfigurationDomain& dom) {
  j.at("codegen_models").get_to(dom.codegen_models);
  j.at("datagen_models").get_to(dom.datagen_models);
  j.at("temperatures").get_to(dom.temperatures);
  j.at("n_shots").get_to(dom.n_shots);
  j.at("rag_options").get_to(dom.rag_options);
}

std::vector<Configuration> enumerate_configurations(const ConfigurationDomain& dom,
                                                    Purpose purpose) {
  dom.validate();
  const auto& models = purpose == Purpose::codegen ? dom.codegen_models : dom.datagen_models;
  std::vector<Configuration> out;
  out.reserve(models.size() * dom.temperatures.size() * dom.n_shots.size() *
              dom.rag_options.size());
  for (const auto& model : models) {
    for (double t : dom.temperatures) {
      for (int shots : dom.n_shots) {
        for (bool rag : dom.rag_options) {
          out.push_back(Configuration{model, t, shots, rag, purpose});
        }
      }
    }
  }
  return out;
}

}  // namespace detforge::core
