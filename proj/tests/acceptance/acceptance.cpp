// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "detforge/codegen/codegen.hpp"
#include "detforge/core/dataset_io.hpp"
#include "detforge/datagen/datagen.hpp"
#include "detforge/eval/eval.hpp"
#include "detforge/experiment/analysis.hpp"
#include "detforge/llm/llm.hpp"
#include "detforge/rag/rag.hpp"
#include "e2e.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace detforge;
using Rational = boost::multiprecision::cpp_rational;

namespace {

struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

void expect_near(double got, double want, double tol, const std::string& what) {
  if (!(std::fabs(got - want) <= tol)) {
    std::ostringstream s;
    s.precision(17);
    s << what << ": got " << got << ", want " << want << " (tolerance " << tol << ")";
    throw Failure{s.str()};
  }
}

int failures = 0;

void criterion(const std::string& name, double limit_ms, const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    body();
  } catch (const Failure& f) {
    ok = false;
    detail = f.what;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (ok && ms >= limit_ms) {
    ok = false;
    detail = "runtime over limit";
  }
  std::cout << (ok ? "PASS " : "FAIL ") << name << " (" << static_cast<long>(ms) << " ms, limit "
            << static_cast<long>(limit_ms) << " ms)";
  if (!ok) std::cout << ": " << detail;
  std::cout << std::endl;
  if (!ok) ++failures;
}

// ---- metric ----

Rational oracle_metric(const eval::ConfusionCounts& c, eval::MetricKind kind) {
  using R = Rational;
  if (kind == eval::MetricKind::accuracy) {
    return c.total() == 0 ? R(0) : R(c.tp + c.tn) / R(c.total());
  }
  const R p = c.tp + c.fp == 0 ? R(0) : R(c.tp) / R(c.tp + c.fp);
  const R r = c.tp + c.fn == 0 ? R(0) : R(c.tp) / R(c.tp + c.fn);
  if (p == 0 && r == 0) return R(0);
  if (kind == eval::MetricKind::f2) return R(5) * p * r / (R(4) * p + r);
  return R(2) * p * r / (p + r);
}

void metric_oracle() {
  std::mt19937_64 rng(20240601);
  const eval::MetricKind kinds[] = {eval::MetricKind::f2, eval::MetricKind::f1,
                                    eval::MetricKind::accuracy};
  for (int i = 0; i < 1000; ++i) {
    std::uniform_int_distribution<std::uint64_t> small(0, 60), large(0, 100000);
    auto draw = [&] { return i % 4 == 0 ? large(rng) : small(rng); };
    eval::ConfusionCounts c{draw(), draw(), draw(), draw()};
    if (c.total() == 0) c.tn = 1;
    for (const auto kind : kinds) {
      const double want = static_cast<double>(oracle_metric(c, kind));
      expect_near(eval::metric(c, kind), want, 1e-12,
                  "counts #" + std::to_string(i) + " " + std::string(eval::to_string(kind)));
    }
  }
  // tp=50 fp=10 fn=0 tn=40: 25/26; tp=5 fp=5: 5/6; perfect: 1.
  expect(eval::metric({50, 10, 40, 0}, eval::MetricKind::f2) == 25.0 / 26.0, "25/26 exact");
  expect(eval::metric({5, 5, 0, 0}, eval::MetricKind::f2) == 2.5 / 3.0, "2.5/3 exact");
  expect(eval::metric({5, 0, 5, 0}, eval::MetricKind::f2) == 1.0, "perfect f2");
}

// ---- self-ranking ----

void self_ranking_oracle() {
  std::mt19937_64 rng(77);
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(5, 40)(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    // Eighths keep every sum exact, and the coarse grid forces ties.
    const int levels = inst % 3 == 0 ? 3 : 9;
    std::vector<std::vector<double>> per_dataset(m, std::vector<double>(n));
    std::vector<long> sums(n, 0);
    for (std::size_t d = 0; d < m; ++d) {
      for (std::size_t f = 0; f < n; ++f) {
        const int q = std::uniform_int_distribution<int>(0, levels - 1)(rng);
        per_dataset[d][f] = q / 8.0;
        sums[f] += q;
      }
    }
    const auto scores = eval::mean_scores(per_dataset);
    std::vector<long> sorted = sums;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::uint64_t seed = 1000 + inst;
    for (const std::size_t k : {1, 3, 5}) {
      if (k > n) continue;
      const auto picked = eval::top_k_select(scores, k, seed);
      const std::string where = "instance " + std::to_string(inst) + " k=" + std::to_string(k);
      expect(picked.size() == k, where + ": size");
      expect(std::set<std::size_t>(picked.begin(), picked.end()).size() == k, where + ": duplicates");
      std::vector<long> got;
      for (const auto i : picked) got.push_back(sums[i]);
      std::vector<long> got_sorted = got;
      std::sort(got_sorted.begin(), got_sorted.end(), std::greater<>());
      expect(std::equal(got_sorted.begin(), got_sorted.end(), sorted.begin()),
             where + ": selected scores differ from the sorted prefix");
      expect(std::is_sorted(got.begin(), got.end(), std::greater<>()), where + ": not rank order");
      const long boundary = sorted[k - 1];
      for (std::size_t f = 0; f < n; ++f) {
        if (sums[f] > boundary) {
          expect(std::find(picked.begin(), picked.end(), f) != picked.end(),
                 where + ": above-boundary function dropped");
        }
      }
      for (int rerun = 0; rerun < 10; ++rerun) {
        expect(eval::top_k_select(scores, k, seed) == picked, where + ": rerun differs");
      }
    }
  }
}

// ---- statistics ----

double mw_enumerated_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto n = pooled.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    ranks[i] = 1.0 + static_cast<double>(
                         std::count_if(pooled.begin(), pooled.end(), [&](double v) { return v < pooled[i]; }));
  }
  auto u_of = [&](unsigned mask) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) sum += ranks[i];
    }
    const double n1 = static_cast<double>(a.size());
    return sum - n1 * (n1 + 1) / 2;
  };
  unsigned observed_mask = (1u << a.size()) - 1;
  const double n1n2 = static_cast<double>(a.size() * b.size());
  const double u_obs = std::min(u_of(observed_mask), n1n2 - u_of(observed_mask));
  long total = 0, extreme = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != a.size()) continue;
    ++total;
    if (u_of(mask) <= u_obs + 1e-9) ++extreme;
  }
  return std::min(1.0, 2.0 * static_cast<double>(extreme) / static_cast<double>(total));
}

double wilcoxon_enumerated_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  }
  const auto n = d.size();
  if (n == 0) return 1.0;
  std::vector<double> mag(n), ranks(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::fabs(d[i]);
  for (std::size_t i = 0; i < n; ++i) {
    const auto less = std::count_if(mag.begin(), mag.end(), [&](double v) { return v < mag[i]; });
    const auto equal = std::count(mag.begin(), mag.end(), mag[i]);
    ranks[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  const double total = std::accumulate(ranks.begin(), ranks.end(), 0.0);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w_plus += ranks[i];
  }
  const double w_obs = std::min(w_plus, total - w_plus);
  long extreme = 0;
  for (unsigned signs = 0; signs < (1u << n); ++signs) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (signs >> i & 1u) w += ranks[i];
    }
    if (w <= w_obs + 1e-9) ++extreme;
  }
  return std::min(1.0, 2.0 * static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n)));
}

void statistics_oracles() {
  const auto fixed = eval::mann_whitney_u(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6});
  expect(fixed.exact, "a=[1,2,3], b=[4,5,6] should be exact");
  expect_near(fixed.statistic, 0.0, 0.0, "U for [1,2,3] vs [4,5,6]");
  expect_near(fixed.p, 0.1, 1e-9, "p for [1,2,3] vs [4,5,6]");

  std::mt19937_64 rng(5);
  for (std::size_t n1 = 1; n1 <= 6; ++n1) {
    for (std::size_t n2 = 1; n2 <= 6; ++n2) {
      for (int rep = 0; rep < 4; ++rep) {
        // Distinct values: a random permutation of 1..n1+n2, shifted per sample.
        std::vector<double> pool(n1 + n2);
        std::iota(pool.begin(), pool.end(), 1.0);
        std::shuffle(pool.begin(), pool.end(), rng);
        if (rep == 0) std::sort(pool.begin(), pool.end());
        const std::vector<double> a(pool.begin(), pool.begin() + static_cast<long>(n1));
        const std::vector<double> b(pool.begin() + static_cast<long>(n1), pool.end());
        const auto r = eval::mann_whitney_u(a, b);
        const std::string where = "MW " + std::to_string(n1) + "x" + std::to_string(n2);
        expect(r.exact, where + ": expected exact");
        expect_near(r.p, mw_enumerated_p(a, b), 1e-9, where);
      }
    }
  }

  const auto all_minus =
      eval::wilcoxon_signed_rank(std::vector<double>{1, 2, 3}, std::vector<double>{2, 3, 4});
  expect(all_minus.exact, "all -1 fixture should be exact");
  expect_near(all_minus.p, 0.25, 1e-9, "Wilcoxon all -1 fixture");
  for (std::size_t n = 1; n <= 10; ++n) {
    for (int rep = 0; rep < 6; ++rep) {
      std::vector<double> x(n), y(n, 0.0);
      for (auto& v : x) {
        // Small integer differences give tied magnitudes; rep 5 allows zeros.
        int d = 0;
        while (d == 0) {
          d = std::uniform_int_distribution<int>(-4, 4)(rng);
          if (rep == 5) break;
        }
        v = d;
      }
      const auto r = eval::wilcoxon_signed_rank(x, y);
      const std::string where = "Wilcoxon n=" + std::to_string(n) + " rep " + std::to_string(rep);
      expect(r.exact, where + ": expected exact");
      expect_near(r.p, wilcoxon_enumerated_p(x, y), 1e-9, where);
    }
  }
}

// ---- RAG ----

void rag_oracle() {
  const char* words[] = {"script", "alert", "onerror", "iframe", "svg", "onload", "img", "src",
                         "javascript", "cookie", "document", "eval", "href", "body", "style",
                         "encode", "escape", "payload", "query", "param", "html", "tag",
                         "attribute", "event", "handler", "url", "redirect", "input"};
  std::mt19937_64 rng(128);
  std::uniform_int_distribution<std::size_t> word(0, std::size(words) - 1);
  std::vector<rag::KnowledgeChunk> chunks;
  for (int i = 0; i < 128; ++i) {
    std::string text;
    for (int w = 0; w < 30; ++w) text += std::string(words[word(rng)]) + " ";
    chunks.push_back({i, text, "corpus.md", static_cast<std::size_t>(i) * 100,
                      static_cast<std::size_t>(i) * 100 + 100});
  }
  rag::HashEmbedder embedder;
  const auto index = rag::VectorIndex::build(chunks, embedder);
  expect(index.entries().size() == 128, "index size");
  std::vector<rag::EmbeddingVector> chunk_vectors;
  for (const auto& c : chunks) chunk_vectors.push_back(embedder.embed(c.text));
  for (int q = 0; q < 50; ++q) {
    std::string query;
    for (int w = 0; w < 5; ++w) query += std::string(words[word(rng)]) + " ";
    const auto qv = embedder.embed(query);
    std::vector<std::pair<double, int>> all;
    for (const auto& c : chunks) {
      // Cosine from raw vectors, independent of the index's stored entries.
      const auto& cv = chunk_vectors[static_cast<std::size_t>(c.chunk_id)];
      double dot = 0.0, nq = 0.0, nc = 0.0;
      for (std::size_t i = 0; i < qv.dimension(); ++i) {
        dot += qv.values()[i] * cv.values()[i];
        nq += qv.values()[i] * qv.values()[i];
        nc += cv.values()[i] * cv.values()[i];
      }
      all.push_back({dot / std::sqrt(nq * nc), c.chunk_id});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& l, const auto& r) { return l.first > r.first; });
    const auto top4 = index.retrieve(embedder, query, 4);
    expect(top4.size() == 4, "k=4 size");
    std::map<int, double> cosine;
    for (const auto& [c, id] : all) cosine[id] = c;
    for (std::size_t i = 0; i < 4; ++i) {
      // A different chunk is only acceptable at an equal cosine.
      expect(top4[i].chunk_id == all[i].second ||
                 std::fabs(cosine[top4[i].chunk_id] - all[i].first) < 1e-12,
             "query " + std::to_string(q) + ": rank " + std::to_string(i) +
                 " differs from exhaustive scan");
    }
    const auto top8 = index.retrieve(embedder, query, 8);
    for (std::size_t k = 1; k <= 8; ++k) {
      const auto topk = index.retrieve(embedder, query, k);
      expect(std::equal(topk.begin(), topk.end(), top8.begin()),
             "query " + std::to_string(q) + ": prefix property fails at k=" + std::to_string(k));
    }
  }
}

// ---- hermetic end-to-end ----

const std::vector<std::string> kGoldenFiles{"reports/xss/ntd.json", "reports/xss/rq1.json",
                                            "reports/xss/rq2.json", "reports/xss/rq3.json",
                                            "scores/xss/rankings/val.json"};

std::string golden_name(const std::string& rel) {
  std::string s = rel;
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

void hermetic_e2e() {
  const fs::path golden = fs::path(DF_SOURCE_DIR) / "tests" / "golden";
  const bool update = std::getenv("DF_UPDATE_GOLDEN") != nullptr;
  std::vector<std::vector<std::string>> outputs;
  for (int pass = 0; pass < 2; ++pass) {
    dftest::TempDir ws("df-e2e");
    dftest::prepare_workspace(ws.path());
    const auto r = dftest::run_pipeline(ws.path());
    expect(r.code == 0, "pipeline pass " + std::to_string(pass) + " failed: " + r.err);
    std::vector<std::string> files;
    for (const auto& rel : kGoldenFiles) files.push_back(core::read_file(ws / rel));
    outputs.push_back(std::move(files));
  }
  for (std::size_t i = 0; i < kGoldenFiles.size(); ++i) {
    expect(outputs[0][i] == outputs[1][i], kGoldenFiles[i] + " differs between runs");
    const auto path = golden / golden_name(kGoldenFiles[i]);
    if (update) {
      fs::create_directories(golden);
      std::ofstream(path, std::ios::binary) << outputs[0][i];
      continue;
    }
    expect(fs::exists(path), "missing golden " + path.string() + " (run with DF_UPDATE_GOLDEN=1)");
    expect(core::read_file(path) == outputs[0][i], kGoldenFiles[i] + " differs from golden");
  }
  const auto rq2 = nlohmann::json::parse(outputs[0][2]);
  bool has_tda = false;
  for (const auto& t : rq2.at("tables")) has_tda = has_tda || t.at("name") == "tda";
  expect(has_tda, "rq2 report lacks the TDA table");
  const auto ntd = nlohmann::json::parse(outputs[0][0]);
  expect(ntd.at("summary").at("runs") == 2, "NTD summary should cover 2 Function Runs");
}

// ---- failure rules ----

std::vector<std::string> mixed(std::size_t broken, std::size_t n) {
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) {
    texts.push_back(i < broken ? dftest::fenced_detector({"load_error SyntaxError"})
                               : dftest::fenced_detector({"detect_on <script"}));
  }
  return texts;
}

void failure_rules() {
  const core::Configuration coder{"stub", 0.5, 0, false, core::Purpose::codegen};
  codegen::FunctionRunOptions options;
  options.n = 40;
  for (const auto& [broken, should_fail] : {std::pair{34, true}, std::pair{31, false}}) {
    auto stub = llm::StubProvider::cycling(mixed(static_cast<std::size_t>(broken), 40));
    auto runner = sandbox::FixtureRunner::scripted();
    const auto run = codegen::generate_function_run(core::TaskSpec::xss(), coder, *stub, nullptr,
                                                    {}, dftest::balanced(10), *runner, options);
    expect(run.broken_count() == static_cast<std::size_t>(broken),
           std::to_string(broken) + "/40: broken count " + std::to_string(run.broken_count()));
    expect(run.failed == should_fail, std::to_string(broken) + "/40: wrong failed flag");
  }

  const core::Configuration tester{"stub", 0.5, 0, false, core::Purpose::datagen};
  const std::string same = "```csv\npayload,label\n<script>1</script>,1\nq=2,0\n```\n";
  auto dup = llm::StubProvider::cycling({same});
  bool timed_out = false;
  try {
    datagen::generate_synthetic_dataset(core::TaskSpec::xss(), tester, 0, *dup, nullptr, {},
                                        dftest::balanced(5));
  } catch (const datagen::DatasetTimeout&) {
    timed_out = true;
  }
  expect(timed_out, "duplicate-only generation did not raise DatasetTimeout");

  datagen::DatasetOptions slow;
  double now = 0.0;
  slow.clock = [&] { return now += 60.0; };
  auto dup2 = llm::StubProvider::cycling({same});
  const auto run = datagen::generate_dataset_run(core::TaskSpec::xss(), tester, 3, *dup2, nullptr,
                                                 {}, dftest::balanced(5), slow);
  expect(run.failed, "duplicate-only dataset run not marked failed");
  expect(run.datasets.size() == 1 && run.datasets[0].timed_out, "run should stop at the first timeout");
  expect(run.datasets[0].examples.size() == 2, "partial dataset keeps the distinct rows");
}

// ---- transferability ----

experiment::TaskScores load_scores(const fs::path& path) {
  const auto j = nlohmann::json::parse(core::read_file(path));
  experiment::TaskScores s;
  s.task_id = j.at("task_id").get<std::string>();
  s.kind = eval::parse_metric(j.at("metric").get<std::string>());
  s.dataset_configs = j.at("dataset_configs").get<std::vector<core::Configuration>>();
  for (const auto& r : j.at("runs")) {
    s.runs.push_back({r.at("config").get<core::Configuration>(),
                      r.at("val").get<std::vector<double>>(), r.at("test").get<std::vector<double>>(),
                      r.at("synthetic").get<std::vector<std::vector<double>>>()});
  }
  return s;
}

// Plain sorting; the fixture has no tied scores, so top_k is unique.
std::vector<std::size_t> brute_top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  idx.resize(k);
  return idx;
}

double brute_mean(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (const auto i : idx) s += v[i];
  return s / static_cast<double>(idx.size());
}

double brute_cell(const experiment::RunScores& u, std::size_t s, std::size_t k) {
  return brute_mean(u.test, brute_top_k(u.synthetic[s], k));
}

double plain_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Best {
  std::size_t u;
  std::size_t s;
};

Best brute_best(const experiment::TaskScores& t, std::size_t k) {
  std::size_t u = 0;
  for (std::size_t i = 1; i < t.runs.size(); ++i) {
    if (plain_mean(t.runs[i].val) > plain_mean(t.runs[u].val)) u = i;
  }
  const auto& run = t.runs[u];
  const double by_val = brute_mean(run.val, brute_top_k(run.val, k));
  std::size_t s = 0;
  double best = 1e300;
  for (std::size_t j = 0; j < t.dataset_configs.size(); ++j) {
    const double diff = by_val - brute_mean(run.val, brute_top_k(run.synthetic[j], k));
    if (diff < best) {
      best = diff;
      s = j;
    }
  }
  return {u, s};
}

void transferability() {
  const fs::path dir = fs::path(DF_SOURCE_DIR) / "tests" / "fixtures" / "transfer";
  const auto xss = load_scores(dir / "xss.json");
  const auto sqli = load_scores(dir / "sqli.json");
  const std::vector<std::size_t> ks{1, 3, 5};
  const auto report = experiment::rq4_transfer(xss, sqli, ks, 7, true);
  expect(report.directions.size() == 2, "two directions");
  const experiment::TaskScores* targets[] = {&xss, &sqli};
  const experiment::TaskScores* sources[] = {&sqli, &xss};
  for (std::size_t d = 0; d < 2; ++d) {
    const auto& target = *targets[d];
    const auto& source = *sources[d];
    const auto& dir_report = report.directions[d];
    expect(dir_report.target_task == target.task_id, "direction order");
    expect(dir_report.rows.size() == ks.size(), "one row per k");
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto k = ks[i];
      const auto& row = dir_report.rows[i];
      const std::string where = target.task_id + " k=" + std::to_string(k);
      const auto tb = brute_best(target, k);
      expect(row.best == brute_cell(target.runs[tb.u], tb.s, k), where + ": best");
      double sum = 0.0;
      for (const auto& u : target.runs) {
        for (std::size_t s = 0; s < target.dataset_configs.size(); ++s) sum += brute_cell(u, s, k);
      }
      const double avg = sum / static_cast<double>(target.runs.size() * target.dataset_configs.size());
      expect(row.average == avg, where + ": average");
      const auto sb = brute_best(source, k);
      const auto u_cfg = source.runs[sb.u].config;
      const auto s_cfg = source.dataset_configs[sb.s];
      std::size_t tu = 0, ts = 0;
      while (!(target.runs[tu].config == u_cfg)) ++tu;
      while (!(target.dataset_configs[ts] == s_cfg)) ++ts;
      expect(row.transferred.has_value(), where + ": transferred missing");
      expect(*row.transferred == brute_cell(target.runs[tu], ts, k), where + ": transferred");
    }
  }
  const auto table = report.to_report();
  expect(table.tables.size() == 2, "one table per direction");
  for (const auto& t : table.tables) {
    expect(t.rows.size() == ks.size(), "one row per k");
    const std::vector<std::string> three{"best", "average", "transferred"};
    expect(std::equal(three.begin(), three.end(), t.columns.begin() + 1),
           "columns best/average/transferred");
  }

  // Documentation fixture: published XSS k=1 values. Not reproducible
  // without the recorded model outputs; only its shape is checked.
  const auto doc = nlohmann::json::parse(core::read_file(dir / "published_xss_k1.json"));
  expect(doc.at("reproducible") == false, "documentation fixture must be labelled non-reproducible");
  expect(doc.at("best") == 0.965 && doc.at("average") == 0.809 && doc.at("transferred") == 0.949,
         "documentation fixture values");
}

}  // namespace

int main() {
  criterion("metric oracle: f2/f1/accuracy vs exact rationals, 1000 counts, tol 1e-12", 1000,
            metric_oracle);
  criterion("self-ranking oracle: top_k vs brute-force sort, 200 instances, k in {1,3,5}, 10 reruns",
            5000, self_ranking_oracle);
  criterion("statistics oracles: Mann-Whitney |a|,|b|<=6 and Wilcoxon n<=10 vs enumeration, tol 1e-9",
            10000, statistics_oracles);
  criterion("RAG oracle: 128 chunks, 50 queries, k=4 vs exhaustive cosine, prefix k=1..8", 1000,
            rag_oracle);
  criterion("hermetic end-to-end: reports byte-identical across two runs and to golden files", 30000,
            hermetic_e2e);
  criterion("failure rules: 34/40 broken fails, 31/40 does not, duplicate-only dataset times out",
            30000, failure_rules);
  criterion("transferability: rq4 best/average/transferred vs brute force on the fixture grid", 5000,
            transferability);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
