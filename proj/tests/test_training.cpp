#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "motorlab/error.hpp"
#include "motorlab/training.hpp"

using namespace motorlab;
using namespace motorlab::training;
using network::Group;
using doctest::Approx;

namespace {

network::ArchitectureConfig arch_of(network::Kind kind) {
  network::ArchitectureConfig a;
  a.kind = kind;
  return a;
}

Environment short_env(int timesteps = 8) {
  Environment env;
  env.task.timesteps = timesteps;
  return env;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.batches_per_epoch = 2;
  cfg.val_trials = 4;
  cfg.max_epochs = 2;
  return cfg;
}

std::vector<double> filled(std::size_t n, double v) { return std::vector<double>(n, v); }

bool group_equal(const network::NetworkParams& a, const network::NetworkParams& b, Group g) {
  for (std::size_t t = 0; t < a.tensors.size(); ++t) {
    if (a.tensors[t].group != g) continue;
    const auto x = a.data(t);
    const auto y = b.data(t);
    if (!std::equal(x.begin(), x.end(), y.begin())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  auto p = network::init(arch_of(network::Kind::Unilateral), 1);
  const auto before = p.values;
  auto s = make_adam_state(p);
  adam_step(p, filled(p.values.size(), 0.0), s, 0.001);
  CHECK(p.values == before);
  CHECK(s.step == 1);
}

TEST_CASE("adam first step is lr over one plus epsilon") {
  auto p = network::zeros(arch_of(network::Kind::Unilateral));
  auto s = make_adam_state(p);
  adam_step(p, filled(p.values.size(), 1.0), s, 0.001);
  // m_hat = v_hat = 1 after bias correction
  const double expected = -0.001 / (1.0 + 1e-8);
  CHECK(p.values[0] == Approx(expected).epsilon(1e-15));
  CHECK(p.values[0] == Approx(-0.000999999).epsilon(1e-6));

  auto q = network::zeros(arch_of(network::Kind::Unilateral));
  auto t = make_adam_state(q);
  adam_step(q, filled(q.values.size(), 1.0), t, 0.001);
  CHECK(q.values == p.values);
  CHECK(t.m == s.m);
  CHECK(t.v == s.v);
}

TEST_CASE("adam rejects non-finite gradients by tensor name") {
  auto p = network::zeros(arch_of(network::Kind::Unilateral));
  auto s = make_adam_state(p);
  auto g = filled(p.values.size(), 0.0);
  g[p.tensor("output.bias").offset] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(p, g, s, 0.001);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("output.bias") != std::string::npos);
  }
  CHECK_THROWS_AS(adam_step(p, filled(3, 0.0), s, 0.001), ContractError);
}

TEST_CASE("adam skips frozen tensors") {
  auto p = network::zeros(arch_of(network::Kind::Bilateral));
  const auto mix = p.index_of("mix.dominant");
  p.frozen[mix] = 1;
  auto s = make_adam_state(p);
  adam_step(p, filled(p.values.size(), 1.0), s, 0.01);
  CHECK(p.data(mix)[0] == 0.0);
  CHECK(p.data("mix.nondominant")[0] != 0.0);
}

TEST_CASE("gradient routing by group") {
  const auto p = network::init(arch_of(network::Kind::Bilateral), 2);
  const auto n = p.values.size();
  const auto routed = route_gradients(filled(n, 0.2), filled(n, -0.2), p);
  for (const auto& t : p.tensors) {
    for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) {
      switch (t.group) {
        case Group::Dominant: CHECK(routed[i] == 0.2); break;
        case Group::NonDominant: CHECK(routed[i] == -0.2); break;
        case Group::Shared: CHECK(routed[i] == 0.0); break;
      }
    }
  }
}

TEST_CASE("routing is idempotent and averages on unilateral nets") {
  Rng rng(3);
  for (auto kind : {network::Kind::Unilateral, network::Kind::Bilateral, network::Kind::BilateralCC}) {
    const auto p = network::init(arch_of(kind), 4);
    std::vector<double> a(p.values.size()), b(p.values.size());
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    CHECK(route_gradients(a, a, p) == a);
    const auto routed = route_gradients(a, b, p);
    for (const auto& t : p.tensors) {
      if (t.group != Group::Shared) continue;
      for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) CHECK(routed[i] == 0.5 * a[i] + 0.5 * b[i]);
    }
  }
  auto bad = network::init(arch_of(network::Kind::Unilateral), 4);
  bad.tensors[0].group = static_cast<Group>(9);
  const auto g = filled(bad.values.size(), 1.0);
  CHECK_THROWS_AS(route_gradients(g, g, bad), ContractError);
  CHECK_THROWS_AS(route_gradients(filled(2, 0.0), g, bad), ContractError);
}

TEST_CASE("dominant tensors ignore the non-dominant loss") {
  const auto p0 = network::init(arch_of(network::Kind::BilateralCC), 5);
  const auto n = p0.values.size();
  Rng rng(6);
  std::vector<double> dl(n), ndl1(n), ndl2(n);
  for (auto& v : dl) v = rng.uniform(-1, 1);
  for (auto& v : ndl1) v = rng.uniform(-1, 1);
  ndl2 = ndl1;
  for (const auto& t : p0.tensors) {
    if (t.group != Group::NonDominant) continue;
    for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) ndl2[i] = rng.uniform(-3, 3);
  }
  auto a = p0, b = p0;
  auto sa = make_adam_state(a), sb = make_adam_state(b);
  for (int k = 0; k < 3; ++k) {
    adam_step(a, route_gradients(dl, ndl1, a), sa, 0.01);
    adam_step(b, route_gradients(dl, ndl2, b), sb, 0.01);
  }
  CHECK(group_equal(a, b, Group::Dominant));
  CHECK(group_equal(a, b, Group::Shared));
  CHECK_FALSE(group_equal(a, b, Group::NonDominant));
}

TEST_CASE("specialised epoch: a changed non-dominant loss leaves dominant tensors bit-identical") {
  auto cfg = tiny_config();
  cfg.mode = LossMode::Specialised;
  cfg.batches_per_epoch = 1;
  const auto env_a = short_env();
  auto env_b = short_env();
  env_b.loss.non_dominant = {1.0, 0.0, 0.0, 7.0};
  auto a = network::init(arch_of(network::Kind::Bilateral), 8);
  auto b = a;
  auto sa = make_adam_state(a), sb = make_adam_state(b);
  const Rng stream(77);
  train_epoch(a, sa, cfg, env_a, stream, 1);
  train_epoch(b, sb, cfg, env_b, stream, 1);
  CHECK(group_equal(a, b, Group::Dominant));
  CHECK_FALSE(group_equal(a, b, Group::NonDominant));
}

TEST_CASE("specialised epoch with a silent non-dominant loss leaves that hemisphere untouched") {
  auto cfg = tiny_config();
  cfg.mode = LossMode::Specialised;
  auto env = short_env();
  env.loss.non_dominant = {0.0, 0.0, 0.0, 0.0};
  const auto p0 = network::init(arch_of(network::Kind::BilateralCC), 9);
  auto p = p0;
  auto s = make_adam_state(p);
  train_epoch(p, s, cfg, env, Rng(1), 1);
  CHECK(group_equal(p, p0, Group::NonDominant));
  CHECK_FALSE(group_equal(p, p0, Group::Dominant));
}

TEST_CASE("zero learning rate trains nothing but still reports a loss") {
  auto cfg = tiny_config();
  cfg.lr = 0.0;
  const auto env = short_env();
  const auto p0 = network::init(arch_of(network::Kind::Unilateral), 10);
  auto p = p0;
  auto s = make_adam_state(p);
  const auto r = train_epoch(p, s, cfg, env, Rng(2), 1);
  CHECK(p.values == p0.values);
  CHECK(r.mean_loss > 0.0);
}

TEST_CASE("batch gradients do not depend on the thread count") {
  const auto env = short_env();
  const auto p = network::init(arch_of(network::Kind::BilateralCC), 12);
  const auto trials = training_batch(env, tasks::TaskKind::Hold, Rng(3), 1, 0, 5);
  for (auto mode : {LossMode::Single, LossMode::Specialised}) {
    const auto one = batch_gradient(p, env, trials, mode, losses::Profile::Combined, 1);
    const auto three = batch_gradient(p, env, trials, mode, losses::Profile::Combined, 3);
    CHECK(one.loss == three.loss);
    CHECK(one.primary == three.primary);
    CHECK(one.secondary == three.secondary);
  }
}

TEST_CASE("early stopping on a synthetic validation curve") {
  const std::vector<double> curve{1.0, 0.9, 0.95, 0.96, 0.97, 0.5, 0.4};
  const auto start = network::zeros(arch_of(network::Kind::Unilateral));
  int epochs_run = 0;
  const auto res = early_stopping(
      start, 100, 3,
      [&](network::NetworkParams& p, int epoch) {
        ++epochs_run;
        p.values[0] = epoch;
        return 0.0;
      },
      [&](const network::NetworkParams& p) { return curve.at(static_cast<std::size_t>(p.values[0]) - 1); });
  CHECK(epochs_run == 5);
  CHECK(res.record.epochs.size() == 5);
  CHECK(res.record.best_epoch == 2);
  CHECK(res.params.values[0] == 2.0);
  CHECK(res.record.best_val_loss == 0.9);
  for (const auto& e : res.record.epochs) CHECK(res.record.best_val_loss <= e.val_loss);
}

TEST_CASE("early stopping respects max_epochs") {
  const auto start = network::zeros(arch_of(network::Kind::Unilateral));
  int epochs_run = 0;
  const auto res = early_stopping(
      start, 1, 3, [&](network::NetworkParams&, int) { return ++epochs_run, 0.0; },
      [](const network::NetworkParams&) { return 1.0; });
  CHECK(epochs_run == 1);
  CHECK(res.record.best_epoch == 1);
}

TEST_CASE("fit is deterministic and returns the best validation epoch") {
  auto cfg = tiny_config();
  cfg.max_epochs = 3;
  cfg.task = tasks::TaskKind::Hold;
  const auto env = short_env();
  const auto a = fit(arch_of(network::Kind::Bilateral), cfg, env);
  cfg.threads = 2;
  const auto b = fit(arch_of(network::Kind::Bilateral), cfg, env);
  CHECK(a.params == b.params);
  REQUIRE(a.record.epochs.size() == b.record.epochs.size());
  for (std::size_t i = 0; i < a.record.epochs.size(); ++i) {
    CHECK(a.record.epochs[i].val_loss == b.record.epochs[i].val_loss);
    CHECK(a.record.best_val_loss <= a.record.epochs[i].val_loss);
  }
  CHECK(a.record.epochs.size() <= 3);
  const auto val = validation_set(env, cfg.task, cfg.seed, cfg.val_trials);
  CHECK(validation_loss(a.params, env, val, validation_profile(cfg)) == a.record.best_val_loss);
}

TEST_CASE("configuration validation") {
  TrainConfig cfg;
  cfg.validate();
  CHECK(cfg.lr == 0.001);
  CHECK(cfg.max_epochs == 100);
  CHECK(cfg.patience == 3);
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = {};
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("summaries of per-trial metrics") {
  std::vector<tasks::TrialMetrics> m(4);
  m[0] = {true, 0.01, 10};
  m[1] = {true, 0.03, 20};
  m[2] = {false, std::nullopt, 0};
  m[3] = {false, std::nullopt, 2};
  const auto s = summarize(m);
  CHECK(s.trials == 4);
  CHECK(s.completed == 2);
  CHECK(s.goal_completion == 0.5);
  CHECK(s.speed_mean.value() == Approx(0.02));
  CHECK(s.speed_sd == Approx(std::sqrt(2e-4)));
  CHECK(s.time_in_goal_mean == 8.0);
  CHECK(s.time_in_goal_sd == Approx(std::sqrt((4.0 + 144.0 + 64.0 + 36.0) / 3.0)));
  CHECK_FALSE(summarize(std::vector<tasks::TrialMetrics>(2)).speed_mean.has_value());
}
