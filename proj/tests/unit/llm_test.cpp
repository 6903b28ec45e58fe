#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "detforge/llm/llm.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace detforge;
using namespace detforge::llm;

namespace {

prompt::Prompt simple_prompt() { return {"system", "user", prompt::PromptKind::basic}; }

core::Configuration cfg() { return {"model-a", 0.5, 0, false, core::Purpose::codegen}; }

// Fails the first `failures` calls with a transient error.
class FlakyProvider : public Provider {
 public:
  explicit FlakyProvider(int failures) : failures_(failures) {}
  std::string id() const override { return "flaky"; }
  std::string generate(const GenerationRequest& req) override {
    if (calls_++ < failures_) throw TransientProviderError("503");
    return "text-" + std::to_string(req.sample_index);
  }
  std::size_t calls() const override { return static_cast<std::size_t>(calls_.load()); }

 private:
  int failures_;
  std::atomic<int> calls_{0};
};

SamplingOptions fast() {
  SamplingOptions o;
  o.initial_backoff = std::chrono::milliseconds(1);
  return o;
}

}  // namespace

TEST(CacheKey, StableAndFieldSensitive) {
  GenerationRequest r{"m", "s", "u", 0.5, 3};
  const auto k = cache_key("p", r);
  EXPECT_EQ(k, cache_key("p", r));
  EXPECT_EQ(k.digest.size(), 64u);
  EXPECT_NE(k, cache_key("q", r));
  auto r2 = r;
  r2.sample_index = 4;
  EXPECT_NE(k, cache_key("p", r2));
  auto r3 = r;
  r3.system_part = "su";
  r3.user_part = "";
  auto r4 = r;
  r4.system_part = "s";
  r4.user_part = "uu";
  EXPECT_NE(cache_key("p", r3), cache_key("p", r4));
}

TEST(Cache, StoreLoadRoundTrip) {
  dftest::TempDir dir;
  ResponseCache cache(dir.path());
  GenerationRequest r{"m", "s", "u", 0.5, 0};
  const auto k = cache_key("p", r);
  EXPECT_FALSE(cache.load(k));
  cache.store(k, r, {"hello", "p", 12, false});
  const auto hit = cache.load(k);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->text, "hello");
  EXPECT_TRUE(hit->cached);
  EXPECT_EQ(cache.path_for(k).parent_path().filename().string(), k.digest.substr(0, 2));
}

TEST(SampleN, OrderAndCaching) {
  dftest::TempDir dir;
  ResponseCache cache(dir.path());
  auto stub = StubProvider::cycling({"a", "b", "c"});
  auto out = sample_n(*stub, &cache, simple_prompt(), cfg(), 5, fast());
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[3].text, "a");
  EXPECT_EQ(out[4].text, "b");
  EXPECT_EQ(stub->calls(), 5u);
  out = sample_n(*stub, &cache, simple_prompt(), cfg(), 5, fast());
  EXPECT_EQ(stub->calls(), 5u);
  EXPECT_TRUE(out[0].cached);
}

TEST(SampleN, ReplayFromRecordedCache) {
  dftest::TempDir dir;
  ResponseCache cache(dir.path());
  StubProvider recorder([](const GenerationRequest& r) { return "r" + std::to_string(r.sample_index); },
                        "live");
  sample_n(recorder, &cache, simple_prompt(), cfg(), 3, fast());
  ReplayProvider replay("live");
  const auto out = sample_n(replay, &cache, simple_prompt(), cfg(), 3, fast());
  EXPECT_EQ(out[2].text, "r2");
  EXPECT_THROW(sample_n(replay, &cache, simple_prompt(), cfg(), 4, fast()), ReplayMiss);
}

TEST(SampleN, RetriesTransientFailures) {
  FlakyProvider flaky(2);
  auto o = fast();
  o.parallelism = 1;
  const auto out = sample_n(flaky, nullptr, simple_prompt(), cfg(), 1, o);
  EXPECT_EQ(out[0].text, "text-0");
  EXPECT_EQ(flaky.calls(), 3u);
}

TEST(SampleN, GivesUpAfterMaxAttempts) {
  FlakyProvider flaky(100);
  auto o = fast();
  o.parallelism = 1;
  try {
    sample_n(flaky, nullptr, simple_prompt(), cfg(), 1, o);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.sample_index(), 0);
  }
  EXPECT_EQ(flaky.calls(), 3u);
}

TEST(SampleN, SampleOffset) {
  auto stub = StubProvider::cycling({"a", "b", "c"});
  auto o = fast();
  o.sample_offset = 1;
  const auto out = sample_n(*stub, nullptr, simple_prompt(), cfg(), 2, o);
  EXPECT_EQ(out[0].text, "b");
}

TEST(StubScript, RulesMatchInOrder) {
  dftest::TempDir dir;
  std::ofstream(dir / "s.json") << R"({"id":"s","rules":[
    {"model":"x","contains":"needle","texts":["X1"]},
    {"model":"x","texts":["X2","X3"]}],"default":["D"]})";
  auto stub = StubProvider::from_file(dir / "s.json");
  EXPECT_EQ(stub->id(), "s");
  EXPECT_EQ(stub->generate({"x", "has needle", "", 0, 0}), "X1");
  EXPECT_EQ(stub->generate({"x", "", "", 0, 1}), "X3");
  EXPECT_EQ(stub->generate({"y", "", "", 0, 1}), "D");
}

TEST(StubScript, Malformed) {
  dftest::TempDir dir;
  std::ofstream(dir / "s.json") << R"({"rules":[{"model":"x"}]})";
  EXPECT_THROW(StubProvider::from_file(dir / "s.json"), InvalidArgument);
}

class LiveServer : public ::testing::Test {
 protected:
  void SetUp() override {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST_F(LiveServer, PostsChatCompletion) {
  nlohmann::json seen;
  std::string auth;
  server_.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"def f(): pass"}}]})",
                    "application/json");
  });
  LiveProvider live(base(), "secret");
  EXPECT_EQ(live.generate({"gpt-x", "sys", "usr", 0.5, 0}), "def f(): pass");
  EXPECT_EQ(seen["model"], "gpt-x");
  EXPECT_EQ(seen["temperature"], 0.5);
  EXPECT_EQ(seen["messages"][0]["role"], "system");
  EXPECT_EQ(seen["messages"][1]["content"], "usr");
  EXPECT_EQ(auth, "Bearer secret");
}

TEST_F(LiveServer, RetriesServerErrors) {
  std::atomic<int> hits{0};
  server_.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
  });
  LiveProvider live(base(), "");
  auto o = fast();
  o.parallelism = 1;
  const auto out = sample_n(live, nullptr, simple_prompt(), cfg(), 1, o);
  EXPECT_EQ(out[0].text, "ok");
  EXPECT_EQ(hits.load(), 2);
}

TEST_F(LiveServer, ClientErrorIsFatal) {
  server_.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  LiveProvider live(base(), "");
  EXPECT_THROW(live.generate({"m", "s", "u", 0.0, 0}), ProviderError);
}

TEST(Live, RequiresScheme) { EXPECT_THROW(LiveProvider("localhost:1", ""), ProviderError); }
