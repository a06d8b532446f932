#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "motorlab/rng.hpp"
#include "motorlab/stats.hpp"

using namespace motorlab;
using namespace motorlab::stats;
using doctest::Approx;

// Reference values computed with scipy.stats.ttest_ind(equal_var=False) and
// statsmodels multipletests(method="holm").

TEST_CASE("welch against reference values") {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8};
  const auto r = welch(a, b).value();
  CHECK(r.mean_difference == Approx(-2.5).epsilon(1e-14));
  CHECK(r.t == Approx(-1.7320508075688774).epsilon(1e-12));
  CHECK(r.df == Approx(4.411764705882353).epsilon(1e-12));
  CHECK(r.p == Approx(0.15158050484530383).epsilon(1e-9));

  const std::vector<double> c{0.3, 0.1, 0.4, 0.15, 0.9}, d{1.2, 0.8, 1.1};
  const auto s = welch(c, d).value();
  CHECK(s.t == Approx(-3.5535714285714297).epsilon(1e-12));
  CHECK(s.df == Approx(5.827075991098071).epsilon(1e-12));
  CHECK(s.p == Approx(0.012623689499191121).epsilon(1e-9));
}

TEST_CASE("welch is antisymmetric in its arguments") {
  Rng rng(1);
  std::vector<double> a(7), b(5);
  for (auto& v : a) v = rng.uniform(0, 2);
  for (auto& v : b) v = rng.uniform(1, 3);
  const auto ab = welch(a, b).value();
  const auto ba = welch(b, a).value();
  CHECK(ab.t == Approx(-ba.t));
  CHECK(ab.mean_difference == Approx(-ba.mean_difference));
  CHECK(ab.p == Approx(ba.p));
  CHECK(ab.df == Approx(ba.df));
}

TEST_CASE("identical samples give t = 0 and p = 1") {
  const std::vector<double> a{0.2, 0.5, 0.9, 1.4};
  const auto r = welch(a, a).value();
  CHECK(r.t == 0.0);
  CHECK(r.p == 1.0);
  const std::vector<double> flat{3, 3, 3};
  const auto f = welch(flat, flat).value();
  CHECK(f.t == 0.0);
  CHECK(f.p == 1.0);
}

TEST_CASE("constant samples with different means") {
  const std::vector<double> ones{1, 1, 1, 1}, twos{2, 2, 2, 2};
  const auto r = welch(twos, ones).value();
  CHECK(r.mean_difference == 1.0);
  CHECK(r.p < 0.01);
  CHECK(r.t == std::numeric_limits<double>::infinity());
}

TEST_CASE("too few values are not computable") {
  const std::vector<double> one{1.0}, many{1, 2, 3};
  CHECK_FALSE(welch(one, many).has_value());
  CHECK_FALSE(welch(many, std::vector<double>{}).has_value());
}

TEST_CASE("holm against reference values") {
  const std::vector<double> p{0.01, 0.04, 0.03, 0.005, 0.5};
  const auto adj = holm(p);
  const std::vector<double> expected{0.04, 0.09, 0.09, 0.025, 0.5};
  REQUIRE(adj.size() == expected.size());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(adj[i] == Approx(expected[i]).epsilon(1e-12));
  CHECK(holm(std::vector<double>{}).empty());
  CHECK(holm(std::vector<double>{0.7})[0] == 0.7);
}

TEST_CASE("holm never decreases a p-value and caps at one") {
  Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> p(1 + rep % 12);
    for (auto& v : p) v = rng.uniform() * rng.uniform();
    const auto adj = holm(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(adj[i] >= p[i]);
      CHECK(adj[i] <= 1.0);
    }
  }
}

TEST_CASE("pairwise table") {
  const std::vector<NamedSample> groups{
      {"A", {1.0, 1.2, 0.9, 1.1}}, {"B", {2.0, 2.1, 1.8, 2.2}}, {"C", {1.5}}, {"D", {1.0, 1.1, 1.2}}};
  const auto rows = pairwise_stats(groups);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].a == "A");
  CHECK(rows[0].b == "B");
  int computable = 0;
  for (const auto& r : rows) {
    CHECK(r.computable == (r.a != "C" && r.b != "C"));
    if (!r.computable) continue;
    ++computable;
    CHECK(r.p_holm >= r.test.p);
  }
  CHECK(computable == 3);
  // the family is the three computable pairs
  std::vector<double> raw;
  for (const auto& r : rows) {
    if (r.computable) raw.push_back(r.test.p);
  }
  const auto adj = holm(raw);
  std::size_t k = 0;
  for (const auto& r : rows) {
    if (r.computable) CHECK(r.p_holm == adj[k++]);
  }
}
