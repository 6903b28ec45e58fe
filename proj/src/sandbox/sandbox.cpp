#include "detforge/sandbox/sandbox.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <thread>

namespace detforge::sandbox {

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::detected: return "detected";
    case Outcome::not_detected: return "not_detected";
    case Outcome::error: return "error";
    case Outcome::timeout: return "timeout";
  }
  return "error";
}

double PredictionSet::error_rate() const {
  if (verdicts.empty()) return 0.0;
  auto failed = std::count_if(verdicts.begin(), verdicts.end(),
                              [](const Verdict& v) { return v.failed(); });
  return static_cast<double>(failed) / static_cast<double>(verdicts.size());
}

PredictionSet evaluate_function(const Candidate& candidate, const core::Dataset& d,
                                std::chrono::milliseconds per_call_timeout, Runner& runner) {
  PredictionSet out{candidate.ref, d.name(), {}};
  const auto loaded = runner.load(candidate);
  if (!loaded.ok) {
    out.verdicts.assign(d.size(), Verdict::error("load failed: " + loaded.error));
    return out;
  }
  const auto payloads = d.payloads();
  out.verdicts = runner.eval(candidate.ref, payloads, per_call_timeout);
  runner.unload(candidate.ref);
  if (out.verdicts.size() != d.size()) {
    throw RunnerCrashed("runner returned " + std::to_string(out.verdicts.size()) +
                        " verdicts for " + std::to_string(d.size()) + " inputs");
  }
  return out;
}

std::vector<std::vector<PredictionSet>> evaluate_all(
    std::span<const Candidate> candidates, std::span<const core::Dataset* const> datasets,
    std::chrono::milliseconds per_call_timeout, const RunnerFactory& factory, int jobs) {
  std::vector<std::vector<PredictionSet>> out(candidates.size());
  if (candidates.empty()) return out;

  std::vector<std::vector<std::string>> payloads;
  payloads.reserve(datasets.size());
  for (const auto* d : datasets) payloads.push_back(d->payloads());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    try {
      auto runner = factory();
      if (!runner) throw RunnerUnavailable("runner factory returned no runner");
      for (std::size_t c = next++; c < candidates.size() && !abort; c = next++) {
        const auto& cand = candidates[c];
        auto& row = out[c];
        row.reserve(datasets.size());
        try {
          const auto loaded = runner->load(cand);
          for (std::size_t k = 0; k < datasets.size(); ++k) {
            PredictionSet ps{cand.ref, datasets[k]->name(), {}};
            if (!loaded.ok) {
              ps.verdicts.assign(datasets[k]->size(),
                                 Verdict::error("load failed: " + loaded.error));
            } else {
              ps.verdicts = runner->eval(cand.ref, payloads[k], per_call_timeout);
              if (ps.verdicts.size() != datasets[k]->size()) {
                throw RunnerCrashed("runner returned a misaligned verdict list for " + cand.ref);
              }
            }
            row.push_back(std::move(ps));
          }
          if (loaded.ok) runner->unload(cand.ref);
        } catch (const RunnerCrashed& e) {
          // The candidate took the runner down twice; it scores as all errors.
          row.clear();
          for (const auto* d : datasets) {
            row.push_back({cand.ref, d->name(),
                           std::vector<Verdict>(d->size(), Verdict::error(e.what()))});
          }
        }
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      abort = true;
    }
  };

  const auto threads =
      static_cast<std::size_t>(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)),
                                                       1, candidates.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ScriptedDetector ScriptedDetector::parse(std::string_view source, std::string_view entrypoint,
                                         std::string* load_error) {
  ScriptedDetector det;
  std::string error;
  if (source.find(entrypoint) == std::string_view::npos) {
    error = "entrypoint not found: " + std::string(entrypoint);
  }
  std::size_t pos = 0;
  while (error.empty() && pos <= source.size()) {
    auto eol = source.find('\n', pos);
    if (eol == std::string_view::npos) eol = source.size();
    auto line = trim(source.substr(pos, eol - pos));
    pos = eol + 1;

    const auto marker = line.find("# df:");
    if (marker == std::string_view::npos) continue;
    auto directive = trim(line.substr(marker + 5));
    const auto space = directive.find(' ');
    const auto op = directive.substr(0, space);
    const auto arg = space == std::string_view::npos ? std::string_view{}
                                                     : trim(directive.substr(space + 1));

    if (op == "load_error") {
      error = arg.empty() ? "load error" : std::string(arg);
    } else if (op == "constant") {
      det.rules_.push_back({arg == "true" ? Action::detect : Action::pass, ""});
    } else if (op == "detect_on") {
      det.rules_.push_back({Action::detect, lower(arg)});
    } else if (op == "raise") {
      det.rules_.push_back({Action::raise, ""});
    } else if (op == "raise_on") {
      det.rules_.push_back({Action::raise, lower(arg)});
    } else if (op == "loop") {
      det.rules_.push_back({Action::loop, ""});
    } else if (op == "loop_on") {
      det.rules_.push_back({Action::loop, lower(arg)});
    } else if (op == "hang") {
      det.rules_.push_back({Action::hang, ""});
    } else if (op == "crash") {
      det.rules_.push_back({Action::crash, ""});
    } else {
      error = "SyntaxError: unknown directive '" + std::string(op) + "'";
    }
  }
  if (error.empty() && det.rules_.empty()) error = "no scripted behavior in source";
  if (load_error) *load_error = error;
  return det;
}

ScriptedDetector::Action ScriptedDetector::apply(std::string_view payload) const {
  const auto text = lower(payload);
  for (const auto& rule : rules_) {
    if (rule.needle.empty() || text.find(rule.needle) != std::string::npos) return rule.action;
  }
  return Action::pass;
}

FixtureRunner::FixtureRunner(Table table, bool scripted_fallback)
    : table_(std::move(table)), scripted_fallback_(scripted_fallback) {}

void FixtureRunner::fail_load(const std::string& ref, std::string error) {
  std::lock_guard lock(mutex_);
  load_failures_[ref] = std::move(error);
}

LoadResult FixtureRunner::load(const Candidate& candidate) {
  std::lock_guard lock(mutex_);
  if (auto it = load_failures_.find(candidate.ref); it != load_failures_.end()) {
    return {false, it->second};
  }
  if (scripted_fallback_) {
    std::string error;
    auto det = ScriptedDetector::parse(candidate.source, candidate.entrypoint, &error);
    if (!error.empty()) return {false, error};
    loaded_[candidate.ref] = std::move(det);
  }
  return {true, {}};
}

std::vector<Verdict> FixtureRunner::eval(const std::string& ref,
                                         std::span<const std::string> inputs,
                                         std::chrono::milliseconds /*per_call_timeout*/) {
  std::lock_guard lock(mutex_);
  std::vector<Verdict> out;
  out.reserve(inputs.size());
  for (const auto& payload : inputs) {
    if (auto it = table_.find({ref, payload}); it != table_.end()) {
      out.push_back(it->second);
      continue;
    }
    auto det = scripted_fallback_ ? loaded_.find(ref) : loaded_.end();
    if (det == loaded_.end()) throw MissingFixture(ref, payload);
    switch (det->second.apply(payload)) {
      case ScriptedDetector::Action::detect: out.push_back(Verdict::detected()); break;
      case ScriptedDetector::Action::pass: out.push_back(Verdict::not_detected()); break;
      case ScriptedDetector::Action::raise: out.push_back(Verdict::error("ValueError")); break;
      case ScriptedDetector::Action::loop:
      case ScriptedDetector::Action::hang: out.push_back(Verdict::timeout()); break;
      case ScriptedDetector::Action::crash: throw RunnerCrashed("scripted crash in " + ref);
    }
  }
  return out;
}

void FixtureRunner::unload(const std::string& ref) {
  std::lock_guard lock(mutex_);
  loaded_.erase(ref);
}

}  // namespace detforge::sandbox
