#include "detforge/core/types.hpp"

#include <algorithm>
#include <cctype>

#include "detforge/core/error.hpp"

namespace detforge::core {

std::string_view to_string(Label label) {
  return label == Label::malicious ? "malicious" : "benign";
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void TaskSpec::validate() const {
  if (id.empty()) throw InvalidArgument("task id is empty");
  if (signature.empty()) throw InvalidArgument("task " + id + ": empty signature");
  if (entrypoint_name.empty()) throw InvalidArgument("task " + id + ": empty entrypoint name");
  if (signature.find(entrypoint_name) == std::string::npos) {
    throw InvalidArgument("task " + id + ": entrypoint '" + entrypoint_name +
                          "' does not appear in the signature");
  }
}

TaskSpec TaskSpec::xss() {
  return TaskSpec{
      .id = "xss",
      .signature = "def detect_xss(http_get_request: str)->bool: ",
      .purpose = "Check if in the given http_get_request there is an XSS exploit, considering "
                 "also the possible evasions that an attacker can perform.",
      .entrypoint_name = "detect_xss",
      .rag_source = "knowledge/xss.md",
  };
}

TaskSpec TaskSpec::sqli() {
  return TaskSpec{
      .id = "sqli",
      .signature = "def detect_sqli(query: str)->bool: ",
      .purpose = "Check if the given SQL query contains some statement injected by an attacker "
                 "to perform SQL injection. Be sure that in the patterns used for the detection, "
                 "no pattern related to normal SQL code (like standard SELECT ... FROM ... WHERE "
                 "..., or standard INSERT ... INTO ...) is considered, since it is not an attack.",
      .entrypoint_name = "detect_sqli",
      .rag_source = "knowledge/sqli.md",
  };
}

void to_json(nlohmann::json& j, const TaskSpec& task) {
  j = nlohmann::json{{"id", task.id},
                     {"signature", task.signature},
                     {"purpose", task.purpose},
                     {"entrypoint_name", task.entrypoint_name},
                     {"rag_source", task.rag_source},
                     {"runtime_id", task.runtime_id}};
}

void from_json(const nlohmann::json& j, TaskSpec& task) {
  j.at("id").get_to(task.id);
  j.at("signature").get_to(task.signature);
  task.purpose = j.value("purpose", std::string{});
  j.at("entrypoint_name").get_to(task.entrypoint_name);
  task.rag_source = j.value("rag_source", std::string{});
  task.runtime_id = j.value("runtime_id", std::string{"python3"});
}

Dataset::Dataset(std::string name, std::vector<LabeledExample> examples)
    : name_(std::move(name)), examples_(std::move(examples)) {
  if (examples_.empty()) throw InvalidArgument("dataset " + name_ + " is empty");
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    if (blank(examples_[i].payload)) {
      throw InvalidArgument("dataset " + name_ + ": example " + std::to_string(i + 1) +
                            " has a blank payload");
    }
  }
}

ClassCounts Dataset::counts() const {
  ClassCounts c;
  for (const auto& e : examples_) {
    (e.label == Label::malicious ? c.malicious : c.benign) += 1;
  }
  return c;
}

std::vector<std::string> Dataset::payloads() const {
  std::vector<std::string> out;
  out.reserve(examples_.size());
  for (const auto& e : examples_) out.push_back(e.payload);
  return out;
}

}  // namespace detforge::core
