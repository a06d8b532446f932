#include "motorlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "motorlab/error.hpp"

namespace motorlab::stats {

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // unbiased
};

Moments moments(std::span<const double> x) {
  Moments m;
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m.mean) * (v - m.mean);
  m.var = ss / static_cast<double>(x.size() - 1);
  return m;
}

}  // namespace

std::optional<WelchResult> welch(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  const auto ma = moments(a);
  const auto mb = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = ma.var / na;
  const double sb = mb.var / nb;
  WelchResult r;
  r.mean_difference = ma.mean - mb.mean;
  const double se2 = sa + sb;
  if (se2 == 0.0) {
    r.df = na + nb - 2.0;
    if (r.mean_difference == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
      r.p = 0.0;
    }
    return r;
  }
  r.t = r.mean_difference / std::sqrt(se2);
  r.df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
  return r;
}

std::vector<double> holm(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double v = std::min(1.0, static_cast<double>(m - k) * p[order[k]]);
    running = std::max(running, v);
    adjusted[order[k]] = running;
  }
  return adjusted;
}

std::vector<PairwiseRow> pairwise_stats(const std::vector<NamedSample>& groups) {
  if (groups.size() < 2) throw ContractError("stats: pairwise comparison needs at least two groups");
  std::vector<PairwiseRow> rows;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      PairwiseRow row;
      row.a = groups[i].first;
      row.b = groups[j].first;
      if (const auto t = welch(groups[i].second, groups[j].second)) {
        row.computable = true;
        row.test = *t;
      }
      rows.push_back(row);
    }
  }
  std::vector<double> family;
  for (const auto& r : rows) {
    if (r.computable) family.push_back(r.test.p);
  }
  const auto adjusted = holm(family);
  std::size_t k = 0;
  for (auto& r : rows) {
    if (r.computable) r.p_holm = adjusted[k++];
  }
  return rows;
}

}  // namespace motorlab::stats
