#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detforge/core/error.hpp"
#include "detforge/core/types.hpp"
#include "detforge/sandbox/sandbox.hpp"

namespace detforge::eval {

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t verdicts, std::size_t examples)
      : Error("prediction set has " + std::to_string(verdicts) + " verdicts for " +
              std::to_string(examples) + " examples") {}
};

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Error and timeout verdicts count as not detected.
ConfusionCounts confusion(const sandbox::PredictionSet& preds, const core::Dataset& d);

enum class MetricKind { f2, f1, accuracy };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric(std::string_view text);

/// 0 when tp + fp = 0.
double precision(const ConfusionCounts& c);
/// 0 when tp + fn = 0.
double recall(const ConfusionCounts& c);
/// f2 = 5pr/(4p+r), f1 = 2pr/(p+r), accuracy = (tp+tn)/total. F-scores are
/// 0 when p = r = 0; accuracy of an empty count is 0.
double metric(const ConfusionCounts& c, MetricKind kind);
/// True when precision or recall hit a zero denominator.
bool degenerate(const ConfusionCounts& c);

/// Per-function scores of one run under one selector, with the descending
/// order (stable in function index).
struct RankedRun {
  std::string run_ref;
  std::string selector;
  std::vector<double> scores;
  std::vector<std::size_t> order;
};

RankedRun rank(std::string run_ref, std::string selector, std::vector<double> scores);

/// Indices of the k selected functions, in ranking order. Functions scoring
/// above the k-th score are always kept; the slots left at that score are
/// filled by a seeded uniform draw among the tied functions.
std::vector<std::size_t> top_k_select(const RankedRun& r, std::size_t k, std::uint64_t seed);
std::vector<std::size_t> top_k_select(std::span<const double> scores, std::size_t k,
                                      std::uint64_t seed);

double mean(std::span<const double> values);
double mean_at(std::span<const double> values, std::span<const std::size_t> indices);

/// mean(test[top_k by selector]) - mean(test).
double top_k_improvement(std::span<const double> selector_scores,
                         std::span<const double> test_scores, std::size_t k, std::uint64_t seed);

/// mean(truth[top_k by truth]) - mean(truth[top_k by synthetic]).
double performance_difference(std::span<const double> truth_scores,
                              std::span<const double> synthetic_scores, std::size_t k,
                              std::uint64_t seed);

/// Metric of each function on one dataset; `broken[i]` forces score 0.
std::vector<double> score_on_dataset(std::span<const sandbox::PredictionSet> preds,
                                     const core::Dataset& d, std::span<const bool> broken,
                                     MetricKind kind);

/// Element-wise mean of per-dataset score vectors.
std::vector<double> mean_scores(std::span<const std::vector<double>> per_dataset);

/// Runs every non-broken candidate on `d` and scores it.
std::vector<double> score_candidates(std::span<const sandbox::Candidate> candidates,
                                     std::span<const bool> broken, const core::Dataset& d,
                                     MetricKind kind, sandbox::Runner& runner,
                                     std::chrono::milliseconds per_call_timeout =
                                         sandbox::kDefaultPerCallTimeout);

struct TestResult {
  std::string name;
  double statistic = 0.0;
  double p = 1.0;
  bool exact = false;
  /// Observations left after dropping zero differences (Wilcoxon) or n1+n2.
  std::size_t n = 0;
};

inline constexpr std::uint64_t kMannWhitneyExactLimit = 20000;
inline constexpr std::size_t kWilcoxonExactMaxN = 12;

/// automatic applies the size rules below; exact and normal force one path.
enum class PValueMethod { automatic, exact, normal };

/// Two-sided. Exact null distribution when C(n1+n2, n1) <= 20000 and there
/// are no ties, otherwise the tie- and continuity-corrected normal
/// approximation. The statistic is min(U_a, U_b).
/// Forcing exact with tied values throws InvalidArgument.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          PValueMethod method = PValueMethod::automatic);

/// Two-sided on x - y. Zero differences are dropped and tied magnitudes get
/// average ranks. Exact for n <= 12, else normal approximation with tie
/// correction. All-zero differences give W = 0, p = 1. The statistic is
/// min(W+, W-).
TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                PValueMethod method = PValueMethod::automatic);

}  // namespace detforge::eval
