#include "motorlab/training.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "motorlab/error.hpp"

namespace motorlab::training {

using diff::Var;
using network::Group;
using network::NetworkParams;

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ContractError("training: lr must be non-negative");
  if (max_epochs < 1) throw ContractError("training: max_epochs must be at least 1");
  if (patience < 1) throw ContractError("training: patience must be at least 1");
  if (batch_size < 1 || batches_per_epoch < 1 || val_trials < 1) {
    throw ContractError("training: batch_size, batches_per_epoch and val_trials must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw ContractError("training: invalid Adam hyperparameters");
  }
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

AdamState make_adam_state(const NetworkParams& params) {
  AdamState s;
  s.m.assign(params.values.size(), 0.0);
  s.v.assign(params.values.size(), 0.0);
  return s;
}

void adam_step(NetworkParams& params, std::span<const double> grads, AdamState& state, double lr, double beta1,
               double beta2, double epsilon) {
  if (grads.size() != params.values.size() || state.m.size() != params.values.size() ||
      state.v.size() != params.values.size()) {
    throw ContractError("training: gradient or optimiser state does not match the parameter vector");
  }
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    const auto& info = params.tensors[t];
    for (std::size_t i = info.offset; i < info.offset + info.size(); ++i) {
      if (!std::isfinite(grads[i])) throw NumericError("training: non-finite gradient for tensor " + info.name);
    }
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    if (params.frozen[t]) continue;
    const auto& info = params.tensors[t];
    for (std::size_t i = info.offset; i < info.offset + info.size(); ++i) {
      const double g = grads[i];
      state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
      state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
      const double m_hat = state.m[i] / correction1;
      const double v_hat = state.v[i] / correction2;
      params.values[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
    }
  }
}

std::vector<double> route_gradients(std::span<const double> grad_dl, std::span<const double> grad_ndl,
                                    const NetworkParams& params) {
  if (grad_dl.size() != params.values.size() || grad_ndl.size() != params.values.size()) {
    throw ContractError("training: gradient maps must cover every parameter");
  }
  std::vector<double> out(params.values.size(), 0.0);
  for (const auto& t : params.tensors) {
    for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) {
      switch (t.group) {
        case Group::Dominant: out[i] = grad_dl[i]; break;
        case Group::NonDominant: out[i] = grad_ndl[i]; break;
        case Group::Shared: out[i] = 0.5 * grad_dl[i] + 0.5 * grad_ndl[i]; break;
        default: throw ContractError("training: unknown group label on tensor " + t.name);
      }
    }
  }
  return out;
}

namespace {

struct TrialGradient {
  double loss = 0.0;
  std::vector<double> primary;
  std::vector<double> secondary;
};

TrialGradient trial_gradient(const NetworkParams& params, const Environment& env, const tasks::TrialSpec& spec,
                             LossMode mode, losses::Profile profile) {
  thread_local diff::Tape tape;
  thread_local diff::Gradients grads;
  tape.clear();
  const Var theta = tape.leaf(params.values);
  const auto bound = network::bind(params, theta);
  const auto run = tasks::rollout(tape, env.plant, params, bound, spec);
  const double lambda = env.loss.penalty_lambda;

  TrialGradient out;
  auto take = [&](Var loss, std::vector<double>& into) {
    tape.backward(loss, grads);
    const auto g = grads[theta];
    into.assign(g.begin(), g.end());
  };

  if (mode == LossMode::Single) {
    const auto terms = losses::loss_terms(run, params, bound, losses::penalty_scope(profile, params.arch), lambda);
    const Var loss = losses::weighted(terms, env.loss.weights(profile));
    out.loss = loss.scalar();
    take(loss, out.primary);
    return out;
  }

  auto terms = losses::loss_terms(run, params, bound, losses::GroupSet::all(), lambda);
  const Var dl = losses::weighted(terms, env.loss.dominant);
  terms.wp = losses::weight_penalty(params, bound,
                                    losses::penalty_scope(losses::Profile::NonDominant, params.arch), lambda);
  const Var ndl = losses::weighted(terms, env.loss.non_dominant);
  out.loss = 0.5 * (dl.scalar() + ndl.scalar());
  take(dl, out.primary);
  take(ndl, out.secondary);
  return out;
}

void accumulate(std::vector<double>& acc, const std::vector<double>& g) {
  if (acc.empty()) acc.assign(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
}

void scale_in_place(std::vector<double>& v, double c) {
  for (auto& x : v) x *= c;
}

}  // namespace

BatchGradient batch_gradient(const NetworkParams& params, const Environment& env,
                             std::span<const tasks::TrialSpec> trials, LossMode mode, losses::Profile profile,
                             int threads) {
  if (trials.empty()) throw ContractError("training: empty batch");
  std::vector<TrialGradient> per_trial(trials.size());
  parallel_for(trials.size(), threads,
               [&](std::size_t i) { per_trial[i] = trial_gradient(params, env, trials[i], mode, profile); });

  // Summed in trial order so the result does not depend on the thread count.
  BatchGradient out;
  for (const auto& t : per_trial) {
    out.loss += t.loss;
    accumulate(out.primary, t.primary);
    if (mode == LossMode::Specialised) accumulate(out.secondary, t.secondary);
  }
  const double inv = 1.0 / static_cast<double>(trials.size());
  out.loss *= inv;
  scale_in_place(out.primary, inv);
  scale_in_place(out.secondary, inv);
  return out;
}

std::vector<double> applied_gradient(const BatchGradient& g, const NetworkParams& params, LossMode mode) {
  if (mode == LossMode::Single) return g.primary;
  return route_gradients(g.primary, g.secondary, params);
}

std::vector<tasks::TrialSpec> training_batch(const Environment& env, tasks::TaskKind task, Rng stream, int epoch,
                                             int batch, int batch_size) {
  const tasks::TrialStream trials(task, stream.split({static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch)}),
                                  env.task, env.plant.config().arm);
  return trials.take(0, static_cast<std::size_t>(batch_size));
}

EpochResult train_epoch(NetworkParams& params, AdamState& opt, const TrainConfig& cfg, const Environment& env,
                        Rng stream, int epoch) {
  double total = 0.0;
  for (int b = 0; b < cfg.batches_per_epoch; ++b) {
    try {
      const auto trials = training_batch(env, cfg.task, stream, epoch, b, cfg.batch_size);
      const auto g = batch_gradient(params, env, trials, cfg.mode, cfg.profile, cfg.threads);
      const auto step = applied_gradient(g, params, cfg.mode);
      adam_step(params, step, opt, cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon);
      total += g.loss;
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what());
    }
  }
  return {total / cfg.batches_per_epoch};
}

losses::Profile validation_profile(const TrainConfig& cfg) {
  return cfg.mode == LossMode::Single ? cfg.profile : losses::Profile::Combined;
}

double validation_loss(const NetworkParams& params, const Environment& env,
                       std::span<const tasks::TrialSpec> trials, losses::Profile profile, int threads) {
  std::vector<double> per_trial(trials.size());
  const auto scope = losses::penalty_scope(profile, params.arch);
  const auto& weights = env.loss.weights(profile);
  parallel_for(trials.size(), threads, [&](std::size_t i) {
    const auto traj = tasks::simulate(env.plant, params, trials[i]);
    per_trial[i] = losses::composite_loss(traj, params, weights, scope, env.loss.penalty_lambda);
  });
  double total = 0.0;
  for (double v : per_trial) total += v;
  return total / static_cast<double>(trials.size());
}

std::vector<tasks::TrialSpec> validation_set(const Environment& env, tasks::TaskKind task, std::uint64_t seed,
                                             int count) {
  const tasks::TrialStream stream(
      task, Rng(seed).split({tag(StreamTag::Validation), static_cast<std::uint64_t>(task)}), env.task,
      env.plant.config().arm);
  return stream.take(0, static_cast<std::size_t>(count));
}

std::vector<tasks::TrialSpec> test_set(const Environment& env, tasks::TaskKind task, int count, std::uint64_t seed) {
  const tasks::TrialStream stream(task, Rng(seed).split({tag(StreamTag::Test), static_cast<std::uint64_t>(task)}),
                                  env.task, env.plant.config().arm);
  return stream.take(0, static_cast<std::size_t>(count));
}

std::vector<tasks::TrialMetrics> evaluate(const NetworkParams& params, const Environment& env,
                                          std::span<const tasks::TrialSpec> trials, int threads) {
  std::vector<tasks::TrialMetrics> out(trials.size());
  parallel_for(trials.size(), threads,
               [&](std::size_t i) { out[i] = tasks::measure(tasks::simulate(env.plant, params, trials[i])); });
  return out;
}

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return m;
}

}  // namespace

MetricSummary summarize(std::span<const tasks::TrialMetrics> metrics) {
  MetricSummary s;
  s.trials = static_cast<int>(metrics.size());
  std::vector<double> speeds, times;
  for (const auto& m : metrics) {
    if (m.goal_completed) ++s.completed;
    if (m.speed_to_goal) speeds.push_back(*m.speed_to_goal);
    times.push_back(static_cast<double>(m.time_in_goal));
  }
  if (s.trials > 0) s.goal_completion = static_cast<double>(s.completed) / s.trials;
  if (!speeds.empty()) {
    const auto sp = moments(speeds);
    s.speed_mean = sp.mean;
    s.speed_sd = sp.sd;
  }
  const auto tg = moments(times);
  s.time_in_goal_mean = tg.mean;
  s.time_in_goal_sd = tg.sd;
  return s;
}

FitResult early_stopping(NetworkParams params, int max_epochs, int patience,
                         const std::function<double(NetworkParams&, int)>& run_epoch,
                         const std::function<double(const NetworkParams&)>& validate) {
  using clock = std::chrono::steady_clock;
  FitResult result;
  result.record.best_val_loss = std::numeric_limits<double>::infinity();
  result.params = params;
  int since_best = 0;
  const auto start = clock::now();
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = run_epoch(params, epoch);
    rec.val_loss = validate(params);
    rec.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
    result.record.epochs.push_back(rec);
    if (rec.val_loss < result.record.best_val_loss) {
      result.record.best_val_loss = rec.val_loss;
      result.record.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= patience) {
      break;
    }
  }
  return result;
}

FitResult fit(NetworkParams params, const TrainConfig& cfg, const Environment& env) {
  cfg.validate();
  const auto val = validation_set(env, cfg.task, cfg.seed, cfg.val_trials);
  const Rng stream = Rng(cfg.seed).split({tag(StreamTag::Training), static_cast<std::uint64_t>(cfg.task)});
  AdamState opt = make_adam_state(params);
  return early_stopping(
      std::move(params), cfg.max_epochs, cfg.patience,
      [&](NetworkParams& p, int epoch) { return train_epoch(p, opt, cfg, env, stream, epoch).mean_loss; },
      [&](const NetworkParams& p) { return validation_loss(p, env, val, validation_profile(cfg), cfg.threads); });
}

FitResult fit(const network::ArchitectureConfig& arch, const TrainConfig& cfg, const Environment& env) {
  return fit(network::init(arch, cfg.seed), cfg, env);
}

}  // namespace motorlab::training
