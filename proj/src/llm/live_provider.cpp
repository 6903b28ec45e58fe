#include <cstdlib>

#include "detforge/llm/llm.hpp"
#include "httplib.h"
#include "json.hpp"

namespace detforge::llm {

LiveProvider::LiveProvider(std::string api_base, std::string api_key, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  while (!api_base.empty() && api_base.back() == '/') api_base.pop_back();
  const auto scheme_end = api_base.find("://");
  if (scheme_end == std::string::npos) {
    throw ProviderError("DF_API_BASE must include a scheme, got '" + api_base + "'");
  }
  const auto path_start = api_base.find('/', scheme_end + 3);
  scheme_host_port_ = api_base.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : api_base.substr(path_start);
}

std::unique_ptr<LiveProvider> LiveProvider::from_environment() {
  const char* base = std::getenv("DF_API_BASE");
  const char* key = std::getenv("DF_API_KEY");
  if (!base || !*base) throw ProviderError("DF_API_BASE is not set");
  return std::make_unique<LiveProvider>(base, key ? key : "");
}

std::string LiveProvider::generate(const GenerationRequest& req) {
  ++calls_;
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  nlohmann::json body = {
      {"model", req.model_id},
      {"temperature", req.temperature},
      {"messages",
       nlohmann::json::array({{{"role", "system"}, {"content", req.system_part}},
                              {{"role", "user"}, {"content", req.user_part}}})},
  };
  auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                         body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                         "application/json");
  if (!res) {
    throw TransientProviderError("request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientProviderError("HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200),
                        req.sample_index);
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string{} : content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed completion body: ") + e.what(), req.sample_index);
  }
}

}  // namespace detforge::llm
