#include <algorithm>
#include <numeric>

#include "detforge/core/rng.hpp"
#include "detforge/eval/eval.hpp"

namespace detforge::eval {

ConfusionCounts confusion(const sandbox::PredictionSet& preds, const core::Dataset& d) {
  if (preds.verdicts.size() != d.size()) throw LengthMismatch(preds.verdicts.size(), d.size());
  ConfusionCounts c;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool malicious = d[i].label == core::Label::malicious;
    if (preds.verdicts[i].flagged()) {
      ++(malicious ? c.tp : c.fp);
    } else {
      ++(malicious ? c.fn : c.tn);
    }
  }
  return c;
}

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::f2: return "f2";
    case MetricKind::f1: return "f1";
    case MetricKind::accuracy: return "accuracy";
  }
  return "f2";
}

MetricKind parse_metric(std::string_view text) {
  if (text == "f2") return MetricKind::f2;
  if (text == "f1") return MetricKind::f1;
  if (text == "accuracy") return MetricKind::accuracy;
  throw InvalidArgument("unknown metric '" + std::string(text) + "' (expected f2, f1, accuracy)");
}

double precision(const ConfusionCounts& c) {
  const auto den = c.tp + c.fp;
  return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
}

double recall(const ConfusionCounts& c) {
  const auto den = c.tp + c.fn;
  return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
}

bool degenerate(const ConfusionCounts& c) { return c.tp + c.fp == 0 || c.tp + c.fn == 0; }

double metric(const ConfusionCounts& c, MetricKind kind) {
  if (kind == MetricKind::accuracy) {
    const auto total = c.total();
    return total == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
  }
  // (1+b^2) tp / ((1+b^2) tp + b^2 fn + fp), the count form of the p/r formula.
  if (c.tp == 0) return 0.0;
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  if (kind == MetricKind::f2) return 5.0 * tp / (5.0 * tp + 4.0 * fn + fp);
  return 2.0 * tp / (2.0 * tp + fn + fp);
}

RankedRun rank(std::string run_ref, std::string selector, std::vector<double> scores) {
  RankedRun r{std::move(run_ref), std::move(selector), std::move(scores), {}};
  r.order.resize(r.scores.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
  return r;
}

std::vector<std::size_t> top_k_select(const RankedRun& r, std::size_t k, std::uint64_t seed) {
  const auto n = r.scores.size();
  if (k < 1 || k > n) {
    throw InvalidArgument("top_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) +
                          "]");
  }
  const double boundary = r.scores[r.order[k - 1]];
  std::vector<std::size_t> out;
  std::vector<std::size_t> tied;
  for (const auto i : r.order) {
    if (r.scores[i] > boundary) {
      out.push_back(i);
    } else if (r.scores[i] == boundary) {
      tied.push_back(i);
    }
  }
  const auto slots = k - out.size();
  if (slots < tied.size()) {
    core::SeededRng rng(seed);
    // Partial Fisher-Yates: the first `slots` entries become a uniform draw.
    for (std::size_t i = 0; i < slots; ++i) {
      std::swap(tied[i], tied[i + rng.below(tied.size() - i)]);
    }
    tied.resize(slots);
    std::sort(tied.begin(), tied.end());
  }
  out.insert(out.end(), tied.begin(), tied.end());
  return out;
}

std::vector<std::size_t> top_k_select(std::span<const double> scores, std::size_t k,
                                      std::uint64_t seed) {
  return top_k_select(rank({}, {}, {scores.begin(), scores.end()}), k, seed);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double mean_at(std::span<const double> values, std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  double sum = 0.0;
  for (const auto i : indices) sum += values[i];
  return sum / static_cast<double>(indices.size());
}

double top_k_improvement(std::span<const double> selector_scores,
                         std::span<const double> test_scores, std::size_t k, std::uint64_t seed) {
  if (selector_scores.size() != test_scores.size()) {
    throw LengthMismatch(selector_scores.size(), test_scores.size());
  }
  const auto picked = top_k_select(selector_scores, k, seed);
  return mean_at(test_scores, picked) - mean(test_scores);
}

double performance_difference(std::span<const double> truth_scores,
                              std::span<const double> synthetic_scores, std::size_t k,
                              std::uint64_t seed) {
  if (truth_scores.size() != synthetic_scores.size()) {
    throw LengthMismatch(synthetic_scores.size(), truth_scores.size());
  }
  const auto by_truth = top_k_select(truth_scores, k, seed);
  const auto by_synthetic = top_k_select(synthetic_scores, k, seed);
  return mean_at(truth_scores, by_truth) - mean_at(truth_scores, by_synthetic);
}

std::vector<double> score_on_dataset(std::span<const sandbox::PredictionSet> preds,
                                     const core::Dataset& d, std::span<const bool> broken,
                                     MetricKind kind) {
  if (preds.size() != broken.size()) throw LengthMismatch(preds.size(), broken.size());
  std::vector<double> out(preds.size(), 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!broken[i]) out[i] = metric(confusion(preds[i], d), kind);
  }
  return out;
}

std::vector<double> mean_scores(std::span<const std::vector<double>> per_dataset) {
  if (per_dataset.empty()) return {};
  std::vector<double> out(per_dataset.front().size(), 0.0);
  for (const auto& scores : per_dataset) {
    if (scores.size() != out.size()) throw LengthMismatch(scores.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += scores[i];
  }
  for (auto& v : out) v /= static_cast<double>(per_dataset.size());
  return out;
}

std::vector<double> score_candidates(std::span<const sandbox::Candidate> candidates,
                                     std::span<const bool> broken, const core::Dataset& d,
                                     MetricKind kind, sandbox::Runner& runner,
                                     std::chrono::milliseconds per_call_timeout) {
  if (candidates.size() != broken.size()) throw LengthMismatch(candidates.size(), broken.size());
  std::vector<double> out(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (broken[i]) continue;
    const auto preds = sandbox::evaluate_function(candidates[i], d, per_call_timeout, runner);
    out[i] = metric(confusion(preds, d), kind);
  }
  return out;
}

}  // namespace detforge::eval
