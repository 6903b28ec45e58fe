#include <algorithm>
#include <cmath>
#include <numeric>

#include "detforge/eval/eval.hpp"

namespace detforge::eval {

namespace {

struct Ranking {
  std::vector<double> ranks;  // average ranks, 1-based
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
  bool ties = false;
};

Ranking average_ranks(std::span<const double> values) {
  const auto n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  Ranking r;
  r.ranks.resize(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[idx[j]] == values[idx[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) r.ranks[idx[t]] = avg;
    const auto t = static_cast<double>(j - i);
    if (j - i > 1) {
      r.ties = true;
      r.tie_term += t * t * t - t;
    }
    i = j;
  }
  return r;
}

double normal_two_sided(double z) { return std::min(1.0, std::erfc(z / std::sqrt(2.0))); }

/// C(n, k) capped at `cap + 1` so large arguments cannot overflow.
std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  k = std::min(k, n - k);
  std::uint64_t c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;
    if (c > cap) return cap + 1;
  }
  return c;
}

/// Counts of U = 0..n1*n2 over all C(n1+n2, n1) arrangements: the
/// coefficients of the Gaussian binomial [n1+n2 choose n1]_q.
std::vector<double> mann_whitney_counts(std::size_t n1, std::size_t n2) {
  if (n1 > n2) std::swap(n1, n2);
  std::vector<double> poly(n1 * n2 + n1 + 1, 0.0);
  poly[0] = 1.0;
  std::size_t degree = 0;
  for (std::size_t i = 1; i <= n1; ++i) {
    // Multiply by (1 - q^(n2+i)), then divide by (1 - q^i).
    const auto up = n2 + i;
    for (std::size_t u = degree + up; u >= up; --u) poly[u] -= poly[u - up];
    degree += n2;
    for (std::size_t u = i; u <= degree; ++u) poly[u] += poly[u - i];
    std::fill(poly.begin() + static_cast<std::ptrdiff_t>(degree) + 1, poly.end(), 0.0);
  }
  poly.resize(n1 * n2 + 1);
  return poly;
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          PValueMethod method) {
  if (a.empty() || b.empty()) throw InvalidArgument("mann_whitney_u: both samples must be non-empty");
  const auto n1 = a.size();
  const auto n2 = b.size();
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  const auto ranking = average_ranks(all);
  const double rank_sum_a = std::accumulate(ranking.ranks.begin(), ranking.ranks.begin() + n1, 0.0);
  const double d1 = static_cast<double>(n1);
  const double d2 = static_cast<double>(n2);
  const double u_a = rank_sum_a - d1 * (d1 + 1.0) / 2.0;
  const double u_min = std::min(u_a, d1 * d2 - u_a);

  TestResult out{"mann_whitney_u", u_min, 1.0, false, n1 + n2};
  const bool small = binomial_capped(n1 + n2, n1, kMannWhitneyExactLimit) <= kMannWhitneyExactLimit;
  if (method == PValueMethod::exact && ranking.ties) {
    throw InvalidArgument("mann_whitney_u: no exact distribution with tied values");
  }
  const bool exact = method == PValueMethod::exact ||
                     (method == PValueMethod::automatic && small && !ranking.ties);
  if (exact) {
    const auto counts = mann_whitney_counts(n1, n2);
    const auto total = std::accumulate(counts.begin(), counts.end(), 0.0);
    double tail = 0.0;
    for (std::size_t u = 0; static_cast<double>(u) <= u_min; ++u) tail += counts[u];
    out.p = std::min(1.0, 2.0 * tail / total);
    out.exact = true;
    return out;
  }
  const double n = d1 + d2;
  const double var = d1 * d2 / 12.0 * ((n + 1.0) - ranking.tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return out;
  const double z = (d1 * d2 / 2.0 - u_min - 0.5) / std::sqrt(var);
  out.p = z <= 0.0 ? 1.0 : normal_two_sided(z);
  return out;
}

TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                PValueMethod method) {
  if (x.size() != y.size()) throw LengthMismatch(x.size(), y.size());
  if (x.empty()) throw InvalidArgument("wilcoxon_signed_rank: samples must be non-empty");
  std::vector<double> magnitude;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d == 0.0) continue;
    magnitude.push_back(std::fabs(d));
    positive.push_back(d > 0.0);
  }
  TestResult out{"wilcoxon_signed_rank", 0.0, 1.0, false, magnitude.size()};
  if (magnitude.empty()) {
    out.exact = true;
    return out;
  }
  const auto ranking = average_ranks(magnitude);
  const auto n = magnitude.size();
  // Average ranks are multiples of 1/2, so doubled ranks are exact integers.
  std::vector<std::size_t> doubled(n);
  std::size_t doubled_plus = 0;
  std::size_t doubled_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    doubled[i] = static_cast<std::size_t>(std::lround(2.0 * ranking.ranks[i]));
    doubled_total += doubled[i];
    if (positive[i]) doubled_plus += doubled[i];
  }
  const auto doubled_min = std::min(doubled_plus, doubled_total - doubled_plus);
  out.statistic = static_cast<double>(doubled_min) / 2.0;

  const bool exact = method == PValueMethod::exact ||
                     (method == PValueMethod::automatic && n <= kWilcoxonExactMaxN);
  if (exact) {
    std::vector<double> counts(doubled_total + 1, 0.0);
    counts[0] = 1.0;
    for (const auto r : doubled) {
      for (std::size_t s = doubled_total; s >= r; --s) counts[s] += counts[s - r];
    }
    double tail = 0.0;
    for (std::size_t s = 0; s <= doubled_min; ++s) tail += counts[s];
    out.p = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
    out.exact = true;
    return out;
  }
  const double dn = static_cast<double>(n);
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - ranking.tie_term / 48.0;
  if (var <= 0.0) return out;
  const double z = (dn * (dn + 1.0) / 4.0 - out.statistic - 0.5) / std::sqrt(var);
  out.p = z <= 0.0 ? 1.0 : normal_two_sided(z);
  return out;
}

}  // namespace detforge::eval
