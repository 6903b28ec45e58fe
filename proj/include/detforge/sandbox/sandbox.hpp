#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

#include "detforge/core/error.hpp"
#include "detforge/core/types.hpp"

namespace detforge::sandbox {

class RunnerCrashed : public Error {
 public:
  using Error::Error;
};

class RunnerUnavailable : public Error {
 public:
  using Error::Error;
};

class MissingFixture : public Error {
 public:
  MissingFixture(const std::string& ref, const std::string& payload)
      : Error("no fixture verdict for (" + ref + ", " + payload.substr(0, 80) + ")") {}
};

enum class Outcome { detected, not_detected, error, timeout };

std::string_view to_string(Outcome outcome);

struct Verdict {
  Outcome outcome = Outcome::not_detected;
  /// Present iff outcome is error or timeout.
  std::optional<std::string> detail;

  static Verdict detected() { return {Outcome::detected, std::nullopt}; }
  static Verdict not_detected() { return {Outcome::not_detected, std::nullopt}; }
  static Verdict error(std::string why) { return {Outcome::error, std::move(why)}; }
  static Verdict timeout() { return {Outcome::timeout, std::string("Timeout")}; }

  /// Metric view: error and timeout count as not detected.
  bool flagged() const { return outcome == Outcome::detected; }
  bool failed() const { return outcome == Outcome::error || outcome == Outcome::timeout; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// What the runner needs to host a detector.
struct Candidate {
  std::string ref;
  std::string entrypoint;
  std::string source;
};

struct PredictionSet {
  std::string function_ref;
  std::string dataset_ref;
  std::vector<Verdict> verdicts;  // positional with the dataset

  double error_rate() const;
  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

struct LoadResult {
  bool ok = false;
  std::string error;
};

class Runner {
 public:
  virtual ~Runner() = default;
  virtual LoadResult load(const Candidate& candidate) = 0;
  /// One verdict per input, in input order.
  virtual std::vector<Verdict> eval(const std::string& ref, std::span<const std::string> inputs,
                                    std::chrono::milliseconds per_call_timeout) = 0;
  virtual void unload(const std::string& /*ref*/) {}
};

using RunnerFactory = std::function<std::unique_ptr<Runner>()>;

inline constexpr std::chrono::milliseconds kDefaultPerCallTimeout{2000};

/// Loads `candidate` once and evaluates every payload of `d`. A load failure
/// turns the whole set into error verdicts.
PredictionSet evaluate_function(const Candidate& candidate, const core::Dataset& d,
                                std::chrono::milliseconds per_call_timeout, Runner& runner);

/// Evaluates every candidate on every dataset with `jobs` runners from
/// `factory`. Result [c][d] is candidate c on dataset d. A candidate that
/// keeps crashing the runner gets error verdicts throughout.
std::vector<std::vector<PredictionSet>> evaluate_all(
    std::span<const Candidate> candidates, std::span<const core::Dataset* const> datasets,
    std::chrono::milliseconds per_call_timeout, const RunnerFactory& factory, int jobs);

/// Test-oriented detector language carried in comment lines of a source:
///   # df: constant true|false     # df: detect_on <needle>
///   # df: raise_on <needle>       # df: raise
///   # df: loop_on <needle>        # df: loop
///   # df: hang                    # df: crash
///   # df: load_error <message>
/// Rules apply in order; the first one that fires decides the result and
/// an input no rule fires on is not detected. Needles match
/// case-insensitively.
class ScriptedDetector {
 public:
  enum class Action { detect, pass, raise, loop, hang, crash };

  /// Parses `source`; returns the load error text on failure.
  static ScriptedDetector parse(std::string_view source, std::string_view entrypoint,
                                std::string* load_error);
  Action apply(std::string_view payload) const;

 private:
  struct Rule {
    Action action;
    std::string needle;  // empty fires unconditionally
  };
  std::vector<Rule> rules_;
};

/// In-process runner answering from a (ref, payload) table, optionally
/// falling back to each loaded source's scripted behavior.
class FixtureRunner final : public Runner {
 public:
  using Table = std::map<std::pair<std::string, std::string>, Verdict>;

  explicit FixtureRunner(Table table, bool scripted_fallback = false);
  /// Runner driven only by scripted sources.
  static std::unique_ptr<FixtureRunner> scripted() {
    return std::make_unique<FixtureRunner>(Table{}, true);
  }

  void fail_load(const std::string& ref, std::string error);

  LoadResult load(const Candidate& candidate) override;
  std::vector<Verdict> eval(const std::string& ref, std::span<const std::string> inputs,
                            std::chrono::milliseconds per_call_timeout) override;
  void unload(const std::string& ref) override;

 private:
  Table table_;
  bool scripted_fallback_;
  std::map<std::string, std::string> load_failures_;
  mutable std::mutex mutex_;
  std::map<std::string, ScriptedDetector> loaded_;
};

struct ProcessRunnerOptions {
  std::chrono::milliseconds startup_timeout{10000};
  std::chrono::milliseconds load_timeout{30000};
  /// Added to per_call_timeout * |inputs| to form the eval watchdog.
  std::chrono::milliseconds watchdog_slack{60000};
};

/// Child process speaking the line-delimited JSON runner protocol on its
/// standard streams. Restarts the child once per failing request.
class ProcessRunner final : public Runner {
 public:
  explicit ProcessRunner(std::vector<std::string> argv, ProcessRunnerOptions options = {});
  ~ProcessRunner() override;
  ProcessRunner(const ProcessRunner&) = delete;
  ProcessRunner& operator=(const ProcessRunner&) = delete;

  LoadResult load(const Candidate& candidate) override;
  std::vector<Verdict> eval(const std::string& ref, std::span<const std::string> inputs,
                            std::chrono::milliseconds per_call_timeout) override;
  void unload(const std::string& ref) override;

  /// Number of child processes started so far.
  int spawn_count() const { return spawns_; }

  // Wire encoding, exposed for protocol tests.
  static std::string encode_load(const Candidate& candidate);
  static std::string encode_eval(const std::string& ref, std::span<const std::string> inputs,
                                 std::chrono::milliseconds per_call_timeout);
  static std::string encode_shutdown();
  /// Decodes a `verdicts` reply; throws RunnerCrashed on a malformed one.
  static std::vector<Verdict> decode_verdicts(std::string_view line, const std::string& ref,
                                              std::size_t expected);

 private:
  void start();
  void stop();
  void write_line(const std::string& line);
  /// Throws RunnerCrashed on EOF or deadline.
  std::string read_line(std::chrono::steady_clock::time_point deadline);
  LoadResult load_once(const Candidate& candidate);

  std::vector<std::string> argv_;
  ProcessRunnerOptions options_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  int spawns_ = 0;
  std::map<std::string, Candidate> loaded_;
};

}  // namespace detforge::sandbox
