#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "motorlab/diff/gradcheck.hpp"
#include "motorlab/error.hpp"
#include "motorlab/network.hpp"
#include "motorlab/rng.hpp"

using namespace motorlab;
using namespace motorlab::network;

namespace {

ArchitectureConfig make(Kind kind, std::size_t units = 10, std::size_t layers = 2) {
  ArchitectureConfig a;
  a.kind = kind;
  a.units = units;
  a.layers = layers;
  return a;
}

std::vector<double> random_input(Rng& rng, std::size_t n = 16) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(-1.5, 1.5);
  return x;
}

void randomise(NetworkParams& p, Rng& rng, double scale = 1.0) {
  for (auto& v : p.values) v = rng.uniform(-scale, scale);
}

// Straight-line reference: y = act(W x + b) with W stored row-major.
std::vector<double> layer(const NetworkParams& p, const std::string& name, const std::vector<double>& x,
                          bool sigmoid) {
  const auto& info = p.tensor(name + ".weight");
  const auto w = p.data(name + ".weight");
  const auto b = p.data(name + ".bias");
  std::vector<double> y(info.rows);
  for (std::size_t r = 0; r < info.rows; ++r) {
    double s = b[r];
    for (std::size_t c = 0; c < info.cols; ++c) s += w[r * info.cols + c] * x[c];
    y[r] = sigmoid ? 1.0 / (1.0 + std::exp(-s)) : std::tanh(s);
  }
  return y;
}

std::vector<double> reference_unilateral(const NetworkParams& p, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (std::size_t k = 1; k <= p.arch.layers; ++k) h = layer(p, "hidden" + std::to_string(k), h, false);
  return layer(p, "output", h, true);
}

std::vector<double> reference_bilateral(const NetworkParams& p, const std::vector<double>& x, bool cc) {
  std::vector<double> d = x, n = x;
  for (std::size_t k = 1; k <= p.arch.layers; ++k) {
    auto hd = layer(p, "dominant.hidden" + std::to_string(k), d, false);
    auto hn = layer(p, "nondominant.hidden" + std::to_string(k), n, false);
    d = hd;
    n = hn;
    if (cc && k < p.arch.layers) {
      for (std::size_t i = 0; i < hd.size() / 2; ++i) {
        d[i] += 0.5 * (hn[2 * i] + hn[2 * i + 1]);
        n[i] += 0.5 * (hd[2 * i] + hd[2 * i + 1]);
      }
    }
  }
  const double wd = p.data("mix.dominant")[0];
  const double wn = p.data("mix.nondominant")[0];
  std::vector<double> c(d.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = wd * d[i] + wn * n[i];
  return layer(p, "output", c, true);
}

// Counts by enumerating each dense layer as fan_in * fan_out + fan_out.
std::size_t enumerate_count(const ArchitectureConfig& a) {
  auto dense = [](std::size_t in, std::size_t out) { return in * out + out; };
  if (a.kind == Kind::Unilateral) {
    std::size_t n = dense(a.inputs, a.units);
    for (std::size_t k = 1; k < a.layers; ++k) n += dense(a.units, a.units);
    return n + dense(a.units, a.outputs);
  }
  const std::size_t h = a.units / 2;
  std::size_t n = 2 * dense(a.inputs, h);
  for (std::size_t k = 1; k < a.layers; ++k) n += 2 * dense(h, h);
  return n + 2 + dense(h, a.outputs);
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(param_count(make(Kind::Unilateral)) == 346);
  CHECK(param_count(make(Kind::Bilateral)) == 268);
  CHECK(param_count(make(Kind::BilateralCC)) == 268);

  for (std::size_t units = 4; units <= 24; units += 2) {
    for (std::size_t layers = 1; layers <= 4; ++layers) {
      const auto u = make(Kind::Unilateral, units, layers);
      const auto b = make(Kind::Bilateral, units, layers);
      const auto c = make(Kind::BilateralCC, units, layers);
      CHECK(param_count(u) == enumerate_count(u));
      CHECK(param_count(b) == enumerate_count(b));
      CHECK(param_count(b) < param_count(u));
      CHECK(param_count(c) == param_count(b));
    }
  }
}

TEST_CASE("architecture validation") {
  CHECK_THROWS_AS(make_layout(make(Kind::Bilateral, 9)), ContractError);
  CHECK_THROWS_AS(make_layout(make(Kind::Unilateral, 10, 0)), ContractError);
  CHECK_THROWS_AS(make_layout(make(Kind::BilateralCC, 2)), ContractError);
  CHECK_NOTHROW(make_layout(make(Kind::Unilateral, 9)));
}

TEST_CASE("layout groups") {
  const auto uni = make_layout(make(Kind::Unilateral));
  for (const auto& t : uni) CHECK(t.group == Group::Shared);

  const auto bi = make_layout(make(Kind::Bilateral));
  std::size_t offset = 0;
  for (const auto& t : bi) {
    CHECK(t.offset == offset);
    offset += t.size();
    if (t.name.starts_with("dominant.")) CHECK(t.group == Group::Dominant);
    else if (t.name.starts_with("nondominant.")) CHECK(t.group == Group::NonDominant);
    else CHECK(t.group == Group::Shared);
  }
}

TEST_CASE("init") {
  for (auto kind : {Kind::Unilateral, Kind::Bilateral, Kind::BilateralCC}) {
    const auto a = init(make(kind), 7);
    const auto b = init(make(kind), 7);
    CHECK(a == b);
    CHECK(a.values != init(make(kind), 8).values);
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
      const auto& t = a.tensors[i];
      const auto d = a.data(i);
      if (t.role == Role::Bias) {
        for (double v : d) CHECK(v == 0.0);
      } else if (t.role == Role::Mix) {
        CHECK(d[0] == 0.5);
      } else {
        const double bound = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
        for (double v : d) CHECK(std::fabs(v) <= bound);
      }
    }
  }
  CHECK(init(make(Kind::BilateralCC), 0).callosum);
  CHECK_FALSE(init(make(Kind::Bilateral), 0).callosum);
}

TEST_CASE("zero parameters give half excitation") {
  Rng rng(1);
  for (auto kind : {Kind::Unilateral, Kind::Bilateral, Kind::BilateralCC}) {
    const auto p = zeros(make(kind));
    const auto y = forward(p, random_input(rng));
    for (double v : y) CHECK(v == 0.5);
  }
}

TEST_CASE("outputs stay strictly inside the unit interval") {
  Rng rng(2);
  for (auto kind : {Kind::Unilateral, Kind::Bilateral, Kind::BilateralCC}) {
    auto p = zeros(make(kind));
    for (int i = 0; i < 200; ++i) {
      randomise(p, rng, 3.0);
      for (double v : forward(p, random_input(rng))) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
    }
  }
}

TEST_CASE("forward matches a hand-rolled reference") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    auto uni = zeros(make(Kind::Unilateral));
    auto bi = zeros(make(Kind::Bilateral));
    auto cc = zeros(make(Kind::BilateralCC));
    randomise(uni, rng);
    randomise(bi, rng);
    randomise(cc, rng);
    const auto x = random_input(rng);
    const auto yu = forward(uni, x);
    const auto ru = reference_unilateral(uni, x);
    const auto yb = forward(bi, x);
    const auto rb = reference_bilateral(bi, x, false);
    const auto yc = forward(cc, x);
    const auto rc = reference_bilateral(cc, x, true);
    for (std::size_t m = 0; m < 6; ++m) {
      CHECK(std::fabs(yu[m] - ru[m]) < 1e-12);
      CHECK(std::fabs(yb[m] - rb[m]) < 1e-12);
      CHECK(std::fabs(yc[m] - rc[m]) < 1e-12);
    }
  }
  // Three layers exercise the callosum between every pair of hidden layers.
  auto deep = zeros(make(Kind::BilateralCC, 12, 3));
  randomise(deep, rng);
  const auto x = random_input(rng);
  const auto y = forward(deep, x);
  const auto r = reference_bilateral(deep, x, true);
  for (std::size_t m = 0; m < 6; ++m) CHECK(std::fabs(y[m] - r[m]) < 1e-12);
}

TEST_CASE("pool_half") {
  diff::Tape tape;
  const auto p = pool_half(tape.leaf(std::vector<double>{1, 2, 3, 4, 5})).value();
  REQUIRE(p.size() == 2);
  CHECK(p[0] == 1.5);
  CHECK(p[1] == 3.5);
  const auto q = pool_half(tape.leaf(std::vector<double>{0.7, 0.7, 0.7, 0.7})).value();
  CHECK(q[0] == 0.7);
  CHECK(q[1] == 0.7);
  CHECK_THROWS_AS(pool_half(tape.leaf(1.0)), ContractError);

  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> h(7);
    for (auto& v : h) v = rng.uniform(-1, 1);
    const double c = rng.uniform(-1, 1);
    std::vector<double> shifted = h;
    for (auto& v : shifted) v += c;
    const auto a = pool_half(tape.leaf(h)).value();
    const auto b = pool_half(tape.leaf(shifted)).value();
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(a[k] + c).epsilon(1e-14));
  }
}

TEST_CASE("bilateral structural properties") {
  Rng rng(5);
  auto p = zeros(make(Kind::Bilateral));
  randomise(p, rng);
  p.data("mix.nondominant")[0] = 0.0;
  const auto x = random_input(rng);
  const auto before = forward(p, x);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (p.tensors[i].group == Group::NonDominant) {
      for (auto& v : p.data(i)) v = rng.uniform(-2, 2);
    }
  }
  CHECK(forward(p, x) == before);

  // Identical hemispheres with equal mixing reduce to one hemisphere.
  auto twin = zeros(make(Kind::Bilateral));
  randomise(twin, rng);
  for (std::size_t k = 1; k <= 2; ++k) {
    for (const char* part : {".weight", ".bias"}) {
      const auto src = twin.data("dominant.hidden" + std::to_string(k) + part);
      auto dst = twin.data("nondominant.hidden" + std::to_string(k) + part);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  twin.data("mix.dominant")[0] = 0.5;
  twin.data("mix.nondominant")[0] = 0.5;
  auto single = twin;
  single.data("mix.dominant")[0] = 1.0;
  single.data("mix.nondominant")[0] = 0.0;
  const auto ya = forward(twin, x);
  const auto yb = forward(single, x);
  for (std::size_t m = 0; m < 6; ++m) CHECK(ya[m] == doctest::Approx(yb[m]).epsilon(1e-15));
}

TEST_CASE("callosum invariants") {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    auto cc = zeros(make(Kind::BilateralCC));
    randomise(cc, rng);
    auto plain = cc;
    plain.callosum = false;
    const auto x = random_input(rng);
    ForwardOptions off;
    off.callosum_gain = 0.0;
    CHECK(forward(cc, x, off) == forward(plain, x));
    CHECK(forward(cc, x) != forward(plain, x));
  }

  // A silent opposing hemisphere contributes nothing through the callosum.
  auto cc = zeros(make(Kind::BilateralCC));
  randomise(cc, rng);
  for (std::size_t i = 0; i < cc.tensors.size(); ++i) {
    if (cc.tensors[i].group == Group::NonDominant) {
      for (auto& v : cc.data(i)) v = 0.0;
    }
  }
  auto plain = cc;
  plain.callosum = false;
  const auto x = random_input(rng);
  CHECK(forward(cc, x) == forward(plain, x));
}

TEST_CASE("output gradients match finite differences") {
  Rng rng(8);
  for (auto kind : {Kind::Unilateral, Kind::Bilateral, Kind::BilateralCC}) {
    const auto base = init(make(kind), 3);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_input(rng);
      std::vector<double> w(6);
      for (auto& v : w) v = rng.uniform(-1, 1);
      const diff::ScalarProgram f = [&](diff::Tape& tape, diff::Var theta) {
        const auto bound = bind(base, theta);
        return diff::sum(forward(base, bound, tape.leaf(x)) * tape.leaf(w));
      };
      auto theta = base.values;
      for (auto& v : theta) v += rng.uniform(-0.3, 0.3);
      CHECK(diff::check_gradient(f, theta).max_relative_error < 1e-5);
    }
  }
}

TEST_CASE("serialisation round-trips bit-exactly") {
  Rng rng(9);
  for (auto kind : {Kind::Unilateral, Kind::Bilateral, Kind::BilateralCC}) {
    auto p = init(make(kind, 12, 3), 11);
    for (auto& v : p.values) v = rng.uniform(-1, 1) * std::pow(10.0, rng.uniform(-12, 3));
    p.frozen[1] = 1;
    if (kind == Kind::BilateralCC) p.callosum = false;
    std::stringstream s;
    save(p, s);
    const auto q = load(s);
    CHECK(q == p);
  }
}

TEST_CASE("malformed checkpoints are rejected") {
  std::stringstream bad_header("motorlab-network 2\n");
  CHECK_THROWS_AS(load(bad_header), ContractError);

  auto p = init(make(Kind::Unilateral), 1);
  std::stringstream s;
  save(p, s);
  std::string text = s.str();
  text.resize(text.size() / 2);
  std::stringstream truncated(text);
  CHECK_THROWS_AS(load(truncated), ContractError);
}
