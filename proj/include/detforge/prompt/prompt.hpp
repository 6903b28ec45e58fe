#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detforge/core/error.hpp"
#include "detforge/core/types.hpp"
#include "detforge/rag/rag.hpp"

namespace detforge::prompt {

class InsufficientExamples : public Error {
 public:
  explicit InsufficientExamples(core::Label label)
      : Error(std::string("not enough ") + std::string(core::to_string(label)) +
              " examples for the requested few-shot count"),
        label_(label) {}
  core::Label label() const noexcept { return label_; }

 private:
  core::Label label_;
};

enum class TemplateKind { code_generation, dataset_generation };

struct Template {
  TemplateKind kind = TemplateKind::code_generation;
  std::string body;

  static Template code_generation();
  static Template dataset_generation();
  /// Reads a plain-text template; the body is the file content unchanged.
  static Template load(const std::filesystem::path& path, TemplateKind kind);
};

/// Few-shot demonstrations, equal numbers per class.
struct FewShotSet {
  std::vector<std::string> malicious;
  std::vector<std::string> benign;

  bool empty() const { return malicious.empty() && benign.empty(); }
  std::size_t size() const { return malicious.size() + benign.size(); }
};

enum class PromptKind { basic, few_shot, rag, rag_few_shot };

std::string to_string(PromptKind kind);

struct Prompt {
  std::string system_part;
  std::string user_part;
  PromptKind kind = PromptKind::basic;

  /// SHA-256 over both parts with length framing.
  std::string digest() const;
};

/// Line separating the template from the retrieved chunks.
inline constexpr std::string_view kRetrievedContextLead =
    "Use the following pieces of retrieved context to write a more complete function:";

/// Seeded draw without replacement of n_shot/2 payloads per class.
FewShotSet select_few_shot(const core::Dataset& train, int n_shot, std::uint64_t seed);

/// The task text: signature, purpose docstring and, when present, the
/// demonstrations as `>>> entry('payload')` / `True|False` pairs, benign first
/// and alternating.
std::string render_task(const core::TaskSpec& task, const FewShotSet& fs);

/// Quotes a payload as a single-quoted Python literal.
std::string python_single_quoted(std::string_view payload);

Prompt build_prompt(const Template& tpl, const core::TaskSpec& task, const FewShotSet& fs,
                    std::span<const rag::KnowledgeChunk> chunks);

}  // namespace detforge::prompt
