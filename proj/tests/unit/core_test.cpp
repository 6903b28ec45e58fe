#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "detforge/core/config.hpp"
#include "detforge/core/dataset_io.hpp"
#include "detforge/core/digest.hpp"
#include "detforge/core/rng.hpp"
#include "test_support.hpp"

using namespace detforge;
using namespace detforge::core;

namespace {

void write(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

TEST(Csv, QuotedFieldsWithCommasAndNewlines) {
  const auto rows = parse_csv("payload,label\n\"a,b\",1\n\"line\nbreak \"\"q\"\"\",0\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "a,b");
  EXPECT_EQ(rows[2][0], "line\nbreak \"q\"");
}

TEST(Csv, FieldQuotingRoundTrips) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Csv, StrictRejectsUnterminatedQuote) {
  EXPECT_THROW(parse_csv("a,\"b\n"), InvalidArgument);
  EXPECT_NO_THROW(parse_csv("a,\"b\n", true));
}

TEST(Dataset, LoadCountsClasses) {
  dftest::TempDir dir;
  write(dir / "d.csv", "payload,label\n<script>,1\nhello,0\n\"x,y\",0\n");
  const auto d = load_labeled_dataset(dir / "d.csv");
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.counts(), (ClassCounts{1, 2}));
  EXPECT_EQ(d[2].payload, "x,y");
}

TEST(Dataset, MissingHeader) {
  dftest::TempDir dir;
  write(dir / "d.csv", "x,y\n<script>,1\n");
  EXPECT_THROW(load_labeled_dataset(dir / "d.csv"), MissingHeader);
}

TEST(Dataset, BadLabelNamesRow) {
  dftest::TempDir dir;
  write(dir / "d.csv", "payload,label\na,1\nb,yes\n");
  try {
    load_labeled_dataset(dir / "d.csv");
    FAIL();
  } catch (const BadLabel& e) {
    EXPECT_EQ(e.row(), 2u);
  }
}

TEST(Dataset, UnreadableFile) {
  EXPECT_THROW(load_labeled_dataset("/nonexistent/file.csv"), UnreadableFile);
}

TEST(Dataset, SaveLoadRoundTrip) {
  dftest::TempDir dir;
  const auto d = dftest::make_dataset("d", {{"a,\"b\"", true}, {"line\nbreak", false}});
  save_labeled_dataset(d, dir / "d.csv");
  EXPECT_EQ(load_labeled_dataset(dir / "d.csv"), d);
}

TEST(Dataset, BlankPayloadRejected) {
  EXPECT_THROW(dftest::make_dataset("d", {{"  ", true}}), InvalidArgument);
}

TEST(Split, StratifiedSizes) {
  const auto d = dftest::balanced(50);
  const auto s = split_dataset(d, {}, 7);
  EXPECT_EQ(s.train.size(), 64u);
  EXPECT_EQ(s.val.size(), 16u);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_EQ(s.train.counts().malicious, 32u);
  EXPECT_EQ(s.val.counts().malicious, 8u);
  EXPECT_EQ(s.test.counts().malicious, 10u);
}

TEST(Split, PartitionAndDeterminism) {
  const auto d = dftest::balanced(37);
  const auto a = split_dataset(d, {}, 3);
  const auto b = split_dataset(d, {}, 3);
  EXPECT_EQ(a.val, b.val);
  std::multiset<std::string> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) {
    for (const auto& e : part->examples()) all.insert(e.payload);
  }
  const auto original = d.payloads();
  EXPECT_EQ(all, std::multiset<std::string>(original.begin(), original.end()));
  EXPECT_NE(split_dataset(d, {}, 4).val, a.val);
}

TEST(Split, EmptyClass) {
  const auto d = dftest::make_dataset("d", {{"a", true}, {"b", true}});
  EXPECT_THROW(split_dataset(d, {}, 1), EmptyClass);
}

TEST(Config, StandardDomainSizes) {
  const auto dom = ConfigurationDomain::standard();
  EXPECT_EQ(enumerate_configurations(dom, Purpose::codegen).size(), 168u);
  EXPECT_EQ(enumerate_configurations(dom, Purpose::datagen).size(), 120u);
}

TEST(Config, CanonicalOrder) {
  ConfigurationDomain dom{{"a", "b"}, {"c"}, {0.0, 1.0}, {0, 2}, {true, false}};
  const auto cfgs = enumerate_configurations(dom, Purpose::codegen);
  ASSERT_EQ(cfgs.size(), 16u);
  EXPECT_EQ(cfgs[0], (Configuration{"a", 0.0, 0, true, Purpose::codegen}));
  EXPECT_EQ(cfgs[1], (Configuration{"a", 0.0, 0, false, Purpose::codegen}));
  EXPECT_EQ(cfgs[2], (Configuration{"a", 0.0, 2, true, Purpose::codegen}));
  EXPECT_EQ(cfgs[15], (Configuration{"b", 1.0, 2, false, Purpose::codegen}));
}

TEST(Config, SlugsAreUnique) {
  std::set<std::string> slugs;
  for (const auto& c : enumerate_configurations(ConfigurationDomain::standard(), Purpose::codegen)) {
    slugs.insert(c.slug());
  }
  EXPECT_EQ(slugs.size(), 168u);
}

TEST(Config, Label) {
  EXPECT_EQ((Configuration{"gpt-4-0125-preview", 0.5, 2, true}).label(),
            "(gpt-4-0125-preview, 0.5, 2, T)");
}

TEST(Config, Validation) {
  EXPECT_THROW((Configuration{"m", 2.5, 0, false}).validate(), InvalidArgument);
  EXPECT_THROW((Configuration{"m", 0.5, 3, false}).validate(), InvalidArgument);
  EXPECT_THROW((Configuration{"", 0.5, 0, false}).validate(), InvalidArgument);
  ConfigurationDomain dup{{"a", "a"}, {"c"}, {0.0}, {0}, {true}};
  EXPECT_THROW(enumerate_configurations(dup, Purpose::codegen), InvalidArgument);
}

TEST(Config, JsonRoundTrip) {
  const Configuration c{"m", 0.5, 6, true, Purpose::datagen};
  nlohmann::json j = c;
  EXPECT_EQ(j.get<Configuration>(), c);
}

TEST(Config, FormatReal) {
  EXPECT_EQ(format_real(0.5), "0.5");
  EXPECT_EQ(format_real(1.0), "1.0");
  EXPECT_EQ(format_real(0.1), "0.1");
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Rng, Deterministic) {
  SeededRng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.below(17), b.below(17));
  SeededRng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, BelowIsRoughlyUniform) {
  SeededRng r(9);
  std::vector<int> hist(5, 0);
  for (int i = 0; i < 50000; ++i) ++hist[r.below(5)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

TEST(Task, BuiltinsValidate) {
  EXPECT_NO_THROW(TaskSpec::xss().validate());
  EXPECT_NO_THROW(TaskSpec::sqli().validate());
  EXPECT_EQ(TaskSpec::sqli().entrypoint_name, "detect_sqli");
}
