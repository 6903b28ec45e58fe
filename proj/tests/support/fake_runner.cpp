// Stand-in for the detector runner process. Speaks the line protocol and
// executes sources written in the scripted detector language.
//
//   fake_runner [--no-ready] [--bad-ready] [--crash-once <marker>]
//
// --crash-once exits on the first eval while <marker> does not exist, after
// creating it.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include "detforge/sandbox/sandbox.hpp"
#include "json.hpp"

using detforge::sandbox::ScriptedDetector;
using Action = ScriptedDetector::Action;

namespace {

void send(const nlohmann::json& j) { std::cout << j.dump() << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  bool ready = true;
  bool bad_ready = false;
  std::string crash_marker;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--no-ready") ready = false;
    if (a == "--bad-ready") bad_ready = true;
    if (a == "--crash-once" && i + 1 < argc) crash_marker = argv[++i];
  }
  if (!ready) {
    std::this_thread::sleep_for(std::chrono::hours(1));
    return 0;
  }
  if (bad_ready) {
    std::cout << "hello" << std::endl;
  } else {
    send({{"type", "ready"}, {"protocol", 1}});
  }

  std::map<std::string, ScriptedDetector> loaded;
  for (std::string line; std::getline(std::cin, line);) {
    const auto msg = nlohmann::json::parse(line, nullptr, false);
    if (msg.is_discarded()) continue;
    const auto type = msg.value("type", "");
    if (type == "shutdown") return 0;
    const auto id = msg.value("id", "");
    if (type == "load") {
      std::string error;
      auto det = ScriptedDetector::parse(msg.value("source", ""), msg.value("entrypoint", ""), &error);
      if (!error.empty()) {
        send({{"type", "loaded"}, {"id", id}, {"ok", false}, {"error", error}});
      } else {
        loaded.insert_or_assign(id, std::move(det));
        send({{"type", "loaded"}, {"id", id}, {"ok", true}});
      }
    } else if (type == "unload") {
      loaded.erase(id);
    } else if (type == "eval") {
      if (!crash_marker.empty() && !std::filesystem::exists(crash_marker)) {
        std::ofstream(crash_marker) << "crashed\n";
        std::_Exit(3);
      }
      auto results = nlohmann::json::array();
      const auto it = loaded.find(id);
      for (const auto& input : msg.at("inputs")) {
        if (it == loaded.end()) {
          results.push_back({{"ok", false}, {"error", "NotLoaded"}});
          continue;
        }
        switch (it->second.apply(input.get<std::string>())) {
          case Action::detect: results.push_back({{"ok", true}, {"value", true}}); break;
          case Action::pass: results.push_back({{"ok", true}, {"value", false}}); break;
          case Action::raise: results.push_back({{"ok", false}, {"error", "ValueError"}}); break;
          case Action::loop: results.push_back({{"ok", false}, {"error", "Timeout"}}); break;
          case Action::hang: std::this_thread::sleep_for(std::chrono::hours(1)); break;
          case Action::crash: std::_Exit(3);
        }
      }
      send({{"type", "verdicts"}, {"id", id}, {"results", results}});
    }
  }
  return 0;
}
