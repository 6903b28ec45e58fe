#include "detforge/prompt/prompt.hpp"

#include <algorithm>

#include "detforge/core/dataset_io.hpp"
#include "detforge/core/digest.hpp"
#include "detforge/core/rng.hpp"

namespace detforge::prompt {

namespace {

// Shipped verbatim as templates/code_generation.txt.
constexpr std::string_view kCodeGenerationBody =
    "The user will provide the initial part of a python function (function name, parameters "
    "with types, return type and a comment describing the purpose of the function) with some "
    "optional example. \n"
    "You are a coding assistant that writes some python code to create the user's function. Be "
    "sure that the code is syntactically correct, it is a callable function (containing the "
    "initial part provided by the user) and that it returns the correct type. \n"
    "The length of the code should be short, it should be readable, and without redundant "
    "checks on the parameters. \n"
    "Return only python code in Markdown format, e.g.:\n"
    "```python\n"
    "....\n"
    "```";

// Shipped verbatim as templates/dataset_generation.txt.
constexpr std::string_view kDatasetGenerationBody =
    "The user will provide the initial part of the function (function name, parameters with "
    "types, return type and a comment describing the purpose of the function, with some "
    "optional example. \n"
    "You are a testing assistant that generates a dataset to test the function provided by the "
    "user.\n";

std::string framed(std::string_view name, std::string_view value) {
  return std::string(name) + ":" + std::to_string(value.size()) + ":" + std::string(value) + "\n";
}

}  // namespace

Template Template::code_generation() {
  return Template{TemplateKind::code_generation, std::string(kCodeGenerationBody)};
}

Template Template::dataset_generation() {
  return Template{TemplateKind::dataset_generation, std::string(kDatasetGenerationBody)};
}

Template Template::load(const std::filesystem::path& path, TemplateKind kind) {
  auto body = core::read_file(path);
  if (body.empty()) throw InvalidArgument(path.string() + ": empty template");
  return Template{kind, std::move(body)};
}

std::string to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::basic: return "basic";
    case PromptKind::few_shot: return "few_shot";
    case PromptKind::rag: return "rag";
    case PromptKind::rag_few_shot: return "rag_few_shot";
  }
  return "basic";
}

std::string Prompt::digest() const {
  return core::sha256_hex(framed("system", system_part) + framed("user", user_part));
}

FewShotSet select_few_shot(const core::Dataset& train, int n_shot, std::uint64_t seed) {
  if (n_shot < 0 || n_shot % 2 != 0) {
    throw InvalidArgument("n_shot must be a non-negative even integer");
  }
  FewShotSet fs;
  if (n_shot == 0) return fs;
  const auto per_class = static_cast<std::size_t>(n_shot / 2);

  std::vector<std::size_t> malicious, benign;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (train[i].label == core::Label::malicious ? malicious : benign).push_back(i);
  }
  if (malicious.size() < per_class) throw InsufficientExamples(core::Label::malicious);
  if (benign.size() < per_class) throw InsufficientExamples(core::Label::benign);

  core::SeededRng rng(seed);
  auto draw = [&](std::vector<std::size_t>& pool, std::vector<std::string>& out) {
    // Partial Fisher-Yates: the first per_class slots become the sample.
    for (std::size_t i = 0; i < per_class; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      out.push_back(train[pool[i]].payload);
    }
  };
  draw(malicious, fs.malicious);
  draw(benign, fs.benign);
  return fs;
}

std::string python_single_quoted(std::string_view payload) {
  std::string out = "'";
  for (char c : payload) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\'': out += "\\'"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '\'';
  return out;
}

std::string render_task(const core::TaskSpec& task, const FewShotSet& fs) {
  std::string out = task.signature + "\n\"\"\" " + task.purpose + "\n";
  const std::size_t pairs = std::max(fs.malicious.size(), fs.benign.size());
  auto demo = [&](const std::string& payload, bool expected) {
    out += ">>> " + task.entrypoint_name + "(" + python_single_quoted(payload) + ")\n";
    out += expected ? "True\n" : "False\n";
  };
  for (std::size_t i = 0; i < pairs; ++i) {
    if (i < fs.benign.size()) demo(fs.benign[i], false);
    if (i < fs.malicious.size()) demo(fs.malicious[i], true);
  }
  out += "\"\"\"";
  return out;
}

Prompt build_prompt(const Template& tpl, const core::TaskSpec& task, const FewShotSet& fs,
                    std::span<const rag::KnowledgeChunk> chunks) {
  Prompt p;
  p.system_part = tpl.body;
  if (!chunks.empty()) {
    if (!p.system_part.empty() && p.system_part.back() != '\n') p.system_part += '\n';
    p.system_part += kRetrievedContextLead;
    p.system_part += '\n';
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      if (i) p.system_part += "\n\n";
      p.system_part += chunks[i].text;
    }
  }
  p.user_part = render_task(task, fs);
  const bool shots = !fs.empty();
  const bool rag = !chunks.empty();
  p.kind = rag ? (shots ? PromptKind::rag_few_shot : PromptKind::rag)
               : (shots ? PromptKind::few_shot : PromptKind::basic);
  return p;
}

}  // namespace detforge::prompt
