#pragma once

// Pairwise comparison of per-seed samples: Welch's unequal-variance t test
// with Holm's step-down adjustment over the family of pairs.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace motorlab::stats {

struct WelchResult {
  double mean_difference = 0.0;  // mean(a) - mean(b)
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Empty when either sample has fewer than two values. When both variances
/// vanish the test degenerates: equal means give t = 0 and p = 1, different
/// means t = +-inf and p = 0.
std::optional<WelchResult> welch(std::span<const double> a, std::span<const double> b);

/// Holm-adjusted p-values in input order.
std::vector<double> holm(std::span<const double> p);

struct PairwiseRow {
  std::string a;
  std::string b;
  bool computable = false;
  WelchResult test;
  double p_holm = 1.0;
};

using NamedSample = std::pair<std::string, std::vector<double>>;

/// Every unordered pair (i < j) in input order. Pairs that cannot be
/// computed are reported and left out of the Holm family.
std::vector<PairwiseRow> pairwise_stats(const std::vector<NamedSample>& groups);

}  // namespace motorlab::stats
