#include <gtest/gtest.h>

#include "detforge/codegen/codegen.hpp"
#include "test_support.hpp"

using namespace detforge;
using namespace detforge::codegen;
using namespace std::chrono_literals;

namespace {

core::Configuration cfg(bool rag = false) { return {"m", 0.5, 0, rag, core::Purpose::codegen}; }

FunctionRunOptions options(int n) {
  FunctionRunOptions o;
  o.n = n;
  o.sampling.parallelism = 2;
  return o;
}

std::vector<std::string> mixed(std::size_t broken, std::size_t n) {
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) {
    texts.push_back(i < broken ? dftest::fenced_detector({"load_error SyntaxError"})
                               : dftest::fenced_detector({"detect_on <script"}));
  }
  return texts;
}

}  // namespace

TEST(Extract, FencedBlockWithTag) {
  const auto ex = extract_code("Sure:\n```python\ndef detect_xss(x):\n    return True\n```\nBye",
                               "detect_xss");
  EXPECT_EQ(ex.path, ExtractionPath::fenced);
  EXPECT_EQ(ex.source, "def detect_xss(x):\n    return True");
}

TEST(Extract, FirstOfSeveralBlocks) {
  const auto ex = extract_code("```\nfirst\n```\n```\nsecond\n```", "detect_xss");
  EXPECT_EQ(ex.source, "first");
}

TEST(Extract, RawFallbackAndFailure) {
  const auto ex = extract_code("  def detect_xss(x): return False  ", "detect_xss");
  EXPECT_EQ(ex.path, ExtractionPath::raw);
  EXPECT_EQ(ex.source, "def detect_xss(x): return False");
  EXPECT_THROW(extract_code("I cannot help with that.", "detect_xss"), ExtractionFailed);
  EXPECT_THROW(extract_code("```python\n\n```", "detect_xss"), ExtractionFailed);
}

TEST(FailureRule, Threshold) {
  EXPECT_TRUE(exceeds_failure_threshold(34, 40));
  EXPECT_FALSE(exceeds_failure_threshold(32, 40));
  EXPECT_FALSE(exceeds_failure_threshold(31, 40));
  EXPECT_TRUE(exceeds_failure_threshold(33, 40));
}

TEST(Smoke, InputsPerClass) {
  const auto train = dftest::balanced(20);
  const auto in = select_smoke_inputs(train, 7);
  ASSERT_EQ(in.size(), 10u);
  EXPECT_EQ(in, select_smoke_inputs(train, 7));
  EXPECT_EQ(select_smoke_inputs(dftest::balanced(2), 7).size(), 4u);
}

TEST(Smoke, ErrorOrTimeoutMarksBroken) {
  auto runner = sandbox::FixtureRunner::scripted();
  const std::vector<std::string> in{"<script>", "page=1"};
  std::string why;
  EXPECT_EQ(smoke_check({"a", "detect_xss", dftest::fenced_detector({"constant true"})}, in, *runner,
                        1000ms, &why),
            Health::ok);
  EXPECT_EQ(smoke_check({"b", "detect_xss", dftest::fenced_detector({"raise_on page"})}, in,
                        *runner, 1000ms, &why),
            Health::broken);
  EXPECT_NE(why.find("ValueError"), std::string::npos);
  EXPECT_EQ(smoke_check({"c", "detect_xss", dftest::fenced_detector({"loop"})}, in, *runner, 1000ms),
            Health::broken);
  EXPECT_EQ(smoke_check({"d", "detect_xss", dftest::fenced_detector({"crash"})}, in, *runner,
                        1000ms),
            Health::broken);
}

TEST(GenerateRun, HealthPerSample) {
  auto stub = llm::StubProvider::cycling({dftest::fenced_detector({"detect_on <script"}),
                                          "no code here", dftest::fenced_detector({"raise"}),
                                          "```python\ndef other(x): pass\n```"});
  auto runner = sandbox::FixtureRunner::scripted();
  const auto run = generate_function_run(core::TaskSpec::xss(), cfg(), *stub, nullptr, {},
                                         dftest::balanced(10), *runner, options(4));
  ASSERT_EQ(run.functions.size(), 4u);
  EXPECT_EQ(run.functions[0].health, Health::ok);
  EXPECT_EQ(run.functions[1].health, Health::extraction_failed);
  EXPECT_EQ(run.functions[2].health, Health::broken);
  EXPECT_EQ(run.functions[3].health, Health::broken);
  EXPECT_EQ(run.functions[0].ref, "xss/" + cfg().slug() + "/0");
  EXPECT_EQ(run.broken_count(), 3u);
  EXPECT_EQ(run.broken(), (std::vector<bool>{false, true, true, true}));
  EXPECT_FALSE(run.failed);
}

TEST(GenerateRun, EightyFivePercentBrokenFails) {
  auto runner = sandbox::FixtureRunner::scripted();
  auto bad = llm::StubProvider::cycling(mixed(34, 40));
  EXPECT_TRUE(generate_function_run(core::TaskSpec::xss(), cfg(), *bad, nullptr, {},
                                    dftest::balanced(10), *runner, options(40))
                  .failed);
  auto ok = llm::StubProvider::cycling(mixed(31, 40));
  EXPECT_FALSE(generate_function_run(core::TaskSpec::xss(), cfg(), *ok, nullptr, {},
                                     dftest::balanced(10), *runner, options(40))
                   .failed);
}

TEST(GenerateRun, RagNeedsIndexAndUsesIt) {
  auto runner = sandbox::FixtureRunner::scripted();
  auto stub = llm::StubProvider::cycling({dftest::fenced_detector({"constant true"})});
  EXPECT_THROW(generate_function_run(core::TaskSpec::xss(), cfg(true), *stub, nullptr, {},
                                     dftest::balanced(10), *runner, options(1)),
               InvalidArgument);
  rag::HashEmbedder e;
  const auto index = rag::VectorIndex::build({{0, "xss script onerror", "k", 0, 1}}, e);
  std::string system_seen;
  llm::StubProvider spy([&](const llm::GenerationRequest& r) {
    system_seen = r.system_part;
    return dftest::fenced_detector({"constant true"});
  });
  const auto run = generate_function_run(core::TaskSpec::xss(), cfg(true), spy, nullptr,
                                         {&index, &e, 4}, dftest::balanced(10), *runner,
                                         options(1));
  EXPECT_NE(system_seen.find("xss script onerror"), std::string::npos);
  EXPECT_EQ(run.functions[0].health, Health::ok);
}

TEST(GenerateRun, SaveLoadRoundTrip) {
  dftest::TempDir dir;
  auto stub = llm::StubProvider::cycling(mixed(1, 3));
  auto runner = sandbox::FixtureRunner::scripted();
  const auto run = generate_function_run(core::TaskSpec::xss(), cfg(), *stub, nullptr, {},
                                         dftest::balanced(10), *runner, options(3));
  save_function_run(run, dir.path());
  const auto loaded = load_function_run(dir.path());
  EXPECT_EQ(function_run_json(loaded), function_run_json(run));
  EXPECT_EQ(loaded.functions[2].source, run.functions[2].source);
  EXPECT_THROW(load_function_run(dir / "missing"), MissingArtifact);
}
