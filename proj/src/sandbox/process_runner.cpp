#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "detforge/sandbox/sandbox.hpp"
#include "json.hpp"

namespace detforge::sandbox {

namespace {

using Clock = std::chrono::steady_clock;

std::string dump(const nlohmann::ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void ignore_sigpipe() {
  static const bool once = [] {
    struct sigaction sa {};
    sa.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &sa, nullptr);
    return true;
  }();
  (void)once;
}

}  // namespace

std::string ProcessRunner::encode_load(const Candidate& candidate) {
  nlohmann::ordered_json j;
  j["type"] = "load";
  j["id"] = candidate.ref;
  j["entrypoint"] = candidate.entrypoint;
  j["source"] = candidate.source;
  return dump(j);
}

std::string ProcessRunner::encode_eval(const std::string& ref,
                                       std::span<const std::string> inputs,
                                       std::chrono::milliseconds per_call_timeout) {
  nlohmann::ordered_json j;
  j["type"] = "eval";
  j["id"] = ref;
  j["timeout_ms"] = per_call_timeout.count();
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& in : inputs) j["inputs"].push_back(in);
  return dump(j);
}

std::string ProcessRunner::encode_shutdown() { return R"({"type":"shutdown"})"; }

std::vector<Verdict> ProcessRunner::decode_verdicts(std::string_view line, const std::string& ref,
                                                    std::size_t expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw RunnerCrashed("runner sent a non-JSON line");
  }
  if (j.value("type", "") != "verdicts" || j.value("id", "") != ref) {
    throw RunnerCrashed("unexpected runner reply: " + std::string(line.substr(0, 200)));
  }
  const auto& results = j.at("results");
  if (!results.is_array() || results.size() != expected) {
    throw RunnerCrashed("runner reply has " + std::to_string(results.size()) + " results for " +
                        std::to_string(expected) + " inputs");
  }
  std::vector<Verdict> out;
  out.reserve(expected);
  for (const auto& r : results) {
    if (r.value("ok", false)) {
      const auto& v = r.at("value");
      if (!v.is_boolean()) throw RunnerCrashed("runner result value is not a boolean");
      out.push_back(v.get<bool>() ? Verdict::detected() : Verdict::not_detected());
    } else {
      auto err = r.value("error", std::string("error"));
      out.push_back(err == "Timeout" ? Verdict::timeout() : Verdict::error(std::move(err)));
    }
  }
  return out;
}

ProcessRunner::ProcessRunner(std::vector<std::string> argv, ProcessRunnerOptions options)
    : argv_(std::move(argv)), options_(options) {
  if (argv_.empty()) throw InvalidArgument("ProcessRunner: empty command");
  ignore_sigpipe();
  start();
}

ProcessRunner::~ProcessRunner() { stop(); }

void ProcessRunner::start() {
  int in_pipe[2];   // parent -> child
  int out_pipe[2];  // child -> parent
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw RunnerUnavailable(std::strerror(errno));
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw RunnerUnavailable(std::strerror(errno));
  }

  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw RunnerUnavailable(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
  ++spawns_;

  std::string line;
  try {
    line = read_line(Clock::now() + options_.startup_timeout);
  } catch (const RunnerCrashed& e) {
    stop();
    throw RunnerUnavailable("runner '" + argv_[0] + "' did not start: " + e.what());
  }
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || j.value("type", "") != "ready" || j.value("protocol", 0) != 1) {
    stop();
    throw RunnerUnavailable("runner '" + argv_[0] + "' sent no ready message");
  }
}

void ProcessRunner::stop() {
  if (pid_ <= 0) return;
  if (to_child_ >= 0) {
    const std::string msg = encode_shutdown() + "\n";
    [[maybe_unused]] auto n = ::write(to_child_, msg.data(), msg.size());
    close(to_child_);
    to_child_ = -1;
  }
  int status = 0;
  const auto deadline = Clock::now() + std::chrono::seconds(2);
  while (waitpid(pid_, &status, WNOHANG) == 0) {
    if (Clock::now() > deadline) {
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (from_child_ >= 0) close(from_child_);
  from_child_ = -1;
  pid_ = -1;
}

void ProcessRunner::write_line(const std::string& line) {
  std::string msg = line + "\n";
  std::size_t off = 0;
  while (off < msg.size()) {
    const auto n = ::write(to_child_, msg.data() + off, msg.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw RunnerCrashed(std::string("write to runner failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string ProcessRunner::read_line(Clock::time_point deadline) {
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) throw RunnerCrashed("runner watchdog expired");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw RunnerCrashed(std::string("poll: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    char chunk[65536];
    const auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw RunnerCrashed(std::string("read from runner failed: ") + std::strerror(errno));
    }
    if (n == 0) throw RunnerCrashed("runner exited");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

LoadResult ProcessRunner::load_once(const Candidate& candidate) {
  write_line(encode_load(candidate));
  const auto line = read_line(Clock::now() + options_.load_timeout);
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || j.value("type", "") != "loaded" || j.value("id", "") != candidate.ref) {
    throw RunnerCrashed("unexpected reply to load: " + line.substr(0, 200));
  }
  if (j.value("ok", false)) return {true, {}};
  return {false, j.value("error", std::string("load failed"))};
}

LoadResult ProcessRunner::load(const Candidate& candidate) {
  LoadResult result;
  try {
    result = load_once(candidate);
  } catch (const RunnerCrashed&) {
    stop();
    start();
    result = load_once(candidate);
  }
  if (result.ok) {
    loaded_[candidate.ref] = candidate;
  } else {
    loaded_.erase(candidate.ref);
  }
  return result;
}

std::vector<Verdict> ProcessRunner::eval(const std::string& ref,
                                         std::span<const std::string> inputs,
                                         std::chrono::milliseconds per_call_timeout) {
  if (inputs.empty()) return {};
  const auto message = encode_eval(ref, inputs, per_call_timeout);
  const auto budget = per_call_timeout * static_cast<long>(inputs.size()) + options_.watchdog_slack;
  auto attempt = [&] {
    write_line(message);
    return decode_verdicts(read_line(Clock::now() + budget), ref, inputs.size());
  };
  try {
    return attempt();
  } catch (const RunnerCrashed&) {
    // Fresh process, reload, one retry; a second failure propagates.
    stop();
    start();
    if (auto it = loaded_.find(ref); it != loaded_.end()) {
      if (!load_once(it->second).ok) throw RunnerCrashed("reload of " + ref + " failed");
    }
    return attempt();
  }
}

void ProcessRunner::unload(const std::string& ref) { loaded_.erase(ref); }

}  // namespace detforge::sandbox
