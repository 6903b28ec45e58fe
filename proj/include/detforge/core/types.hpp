#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace detforge::core {

enum class Label { benign, malicious };

std::string_view to_string(Label label);

/// A detection task: the entry point the model must complete plus the
/// knowledge document used for retrieval.
struct TaskSpec {
  std::string id;
  std::string signature;
  std::string purpose;
  std::string entrypoint_name;
  std::string rag_source;
  std::string runtime_id = "python3";

  /// Throws InvalidArgument when an invariant is broken.
  void validate() const;

  static TaskSpec xss();
  static TaskSpec sqli();
};

void to_json(nlohmann::json& j, const TaskSpec& task);
void from_json(const nlohmann::json& j, TaskSpec& task);

struct LabeledExample {
  std::string payload;
  Label label = Label::benign;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct ClassCounts {
  std::size_t malicious = 0;
  std::size_t benign = 0;

  std::size_t total() const { return malicious + benign; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Ordered, non-empty list of labeled payloads. Immutable once built.
class Dataset {
 public:
  Dataset(std::string name, std::vector<LabeledExample> examples);

  const std::string& name() const { return name_; }
  const std::vector<LabeledExample>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  const LabeledExample& operator[](std::size_t i) const { return examples_[i]; }
  ClassCounts counts() const;

  /// Payload texts in dataset order.
  std::vector<std::string> payloads() const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.examples_ == b.examples_;
  }

 private:
  std::string name_;
  std::vector<LabeledExample> examples_;
};

}  // namespace detforge::core
