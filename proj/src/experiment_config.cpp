#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "motorlab/error.hpp"
#include "motorlab/experiment.hpp"

namespace motorlab::experiment {

using nlohmann::json;

std::string_view to_string(Model m) {
  switch (m) {
    case Model::UniB: return "Uni-B";
    case Model::UniDL: return "Uni-DL";
    case Model::UniNDL: return "Uni-NDL";
    case Model::BiNS: return "Bi-NS";
    case Model::BiS: return "Bi-S";
    case Model::CCNS: return "CC-NS";
    case Model::CCS: return "CC-S";
  }
  return "?";
}

Model parse_model(std::string_view s) {
  for (auto m : kAllModels) {
    if (to_string(m) == s) return m;
  }
  throw ContractError("experiment: unknown model '" + std::string(s) + "'");
}

ModelSetup setup_of(Model m) {
  using network::Kind;
  using training::LossMode;
  switch (m) {
    case Model::UniB: return {Kind::Unilateral, LossMode::Single, losses::Profile::Combined};
    case Model::UniDL: return {Kind::Unilateral, LossMode::Single, losses::Profile::Dominant};
    case Model::UniNDL: return {Kind::Unilateral, LossMode::Single, losses::Profile::NonDominant};
    case Model::BiNS: return {Kind::Bilateral, LossMode::Single, losses::Profile::Combined};
    case Model::BiS: return {Kind::Bilateral, LossMode::Specialised, losses::Profile::Combined};
    case Model::CCNS: return {Kind::BilateralCC, LossMode::Single, losses::Profile::Combined};
    case Model::CCS: return {Kind::BilateralCC, LossMode::Specialised, losses::Profile::Combined};
  }
  throw ContractError("experiment: unknown model");
}

bool specialised(Model m) { return setup_of(m).mode == training::LossMode::Specialised; }

void ExperimentConfig::validate() const {
  if (models.empty() || tasks.empty() || seeds.empty()) {
    throw ContractError("experiment: models, tasks and seeds must be non-empty");
  }
  if (test_trials < 1) throw ContractError("experiment: test_trials must be positive");
  if (workers < 1 || threads < 1) throw ContractError("experiment: workers and threads must be positive");
  plant.validate();
  task.validate();
  train.validate();
  for (auto m : models) architecture(m).validate();
}

training::Environment ExperimentConfig::environment() const {
  training::Environment env;
  env.plant = plant::Plant(plant);
  env.task = task;
  env.loss = loss;
  return env;
}

network::ArchitectureConfig ExperimentConfig::architecture(Model m) const {
  network::ArchitectureConfig a;
  a.kind = setup_of(m).kind;
  a.units = units;
  a.layers = layers;
  return a;
}

training::TrainConfig ExperimentConfig::train_config(Model m, tasks::TaskKind t, std::uint64_t seed) const {
  training::TrainConfig c = train;
  const auto s = setup_of(m);
  c.mode = s.mode;
  c.profile = s.profile;
  c.task = t;
  c.seed = seed;
  c.threads = threads;
  return c;
}

namespace {

json weights_json(const losses::LossWeights& w) {
  return {{"cart1", w.cart1}, {"cart2", w.cart2}, {"act", w.act}, {"wp", w.wp}};
}

losses::LossWeights weights_from(const json& j) {
  return {j.at("cart1").get<double>(), j.at("cart2").get<double>(), j.at("act").get<double>(),
          j.at("wp").get<double>()};
}

json to_json(const ExperimentConfig& c) {
  json models = json::array();
  for (auto m : c.models) models.push_back(std::string(to_string(m)));
  json task_list = json::array();
  for (auto t : c.tasks) task_list.push_back(std::string(tasks::to_string(t)));
  const auto& a = c.plant.arm;
  const auto& m = c.plant.muscles;
  return {
      {"models", models},
      {"tasks", task_list},
      {"seeds", c.seeds},
      {"network", {{"units", c.units}, {"layers", c.layers}}},
      {"plant",
       {{"arm",
         {{"l1", a.l1},
          {"l2", a.l2},
          {"m1", a.m1},
          {"m2", a.m2},
          {"d1", a.d1},
          {"d2", a.d2},
          {"i1", a.i1},
          {"i2", a.i2},
          {"damping", a.damping},
          {"dt", a.dt}}},
        {"muscles",
         {{"f_max", m.f_max},
          {"r_shoulder", m.r_shoulder},
          {"r_elbow", m.r_elbow},
          {"l0", m.l0},
          {"q0", m.q0},
          {"tau_act", m.tau_act},
          {"tau_deact", m.tau_deact},
          {"v_max", m.v_max}}}}},
      {"task",
       {{"threshold", c.task.threshold},
        {"timesteps", c.task.timesteps},
        {"force_bound", c.task.force_bound},
        {"shoulder_range_deg", c.task.shoulder_range_deg},
        {"elbow_range_deg", c.task.elbow_range_deg},
        {"max_attempts", c.task.max_attempts}}},
      {"loss",
       {{"dl", weights_json(c.loss.dominant)},
        {"ndl", weights_json(c.loss.non_dominant)},
        {"combined", weights_json(c.loss.combined)},
        {"lambda", c.loss.penalty_lambda}}},
      {"train",
       {{"lr", c.train.lr},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"batch_size", c.train.batch_size},
        {"batches_per_epoch", c.train.batches_per_epoch},
        {"val_trials", c.train.val_trials},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"epsilon", c.train.epsilon}}},
      {"test_trials", c.test_trials},
      {"test_seed", c.test_seed},
      {"lesions", c.lesions},
      {"workers", c.workers},
      {"threads", c.threads},
  };
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.models.clear();
  for (const auto& m : j.at("models")) c.models.push_back(parse_model(m.get<std::string>()));
  c.tasks.clear();
  for (const auto& t : j.at("tasks")) c.tasks.push_back(tasks::parse_task(t.get<std::string>()));
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.units = j.at("network").at("units").get<std::size_t>();
  c.layers = j.at("network").at("layers").get<std::size_t>();

  const auto& a = j.at("plant").at("arm");
  auto& arm = c.plant.arm;
  arm.l1 = a.at("l1");
  arm.l2 = a.at("l2");
  arm.m1 = a.at("m1");
  arm.m2 = a.at("m2");
  arm.d1 = a.at("d1");
  arm.d2 = a.at("d2");
  arm.i1 = a.at("i1");
  arm.i2 = a.at("i2");
  arm.damping = a.at("damping");
  arm.dt = a.at("dt");
  const auto& m = j.at("plant").at("muscles");
  auto& mus = c.plant.muscles;
  mus.f_max = m.at("f_max").get<plant::Vec6>();
  mus.r_shoulder = m.at("r_shoulder").get<plant::Vec6>();
  mus.r_elbow = m.at("r_elbow").get<plant::Vec6>();
  mus.l0 = m.at("l0").get<plant::Vec6>();
  mus.q0 = m.at("q0").get<plant::Vec2>();
  mus.tau_act = m.at("tau_act");
  mus.tau_deact = m.at("tau_deact");
  mus.v_max = m.at("v_max");

  const auto& t = j.at("task");
  c.task.threshold = t.at("threshold");
  c.task.timesteps = t.at("timesteps");
  c.task.force_bound = t.at("force_bound");
  c.task.shoulder_range_deg = t.at("shoulder_range_deg").get<plant::Vec2>();
  c.task.elbow_range_deg = t.at("elbow_range_deg").get<plant::Vec2>();
  c.task.max_attempts = t.at("max_attempts");

  const auto& l = j.at("loss");
  c.loss.dominant = weights_from(l.at("dl"));
  c.loss.non_dominant = weights_from(l.at("ndl"));
  c.loss.combined = weights_from(l.at("combined"));
  c.loss.penalty_lambda = l.at("lambda");

  const auto& tr = j.at("train");
  c.train.lr = tr.at("lr");
  c.train.max_epochs = tr.at("max_epochs");
  c.train.patience = tr.at("patience");
  c.train.batch_size = tr.at("batch_size");
  c.train.batches_per_epoch = tr.at("batches_per_epoch");
  c.train.val_trials = tr.at("val_trials");
  c.train.beta1 = tr.at("beta1");
  c.train.beta2 = tr.at("beta2");
  c.train.epsilon = tr.at("epsilon");

  c.test_trials = j.at("test_trials");
  c.test_seed = j.at("test_seed");
  c.lesions = j.at("lesions");
  c.workers = j.at("workers");
  c.threads = j.at("threads");
  return c;
}

// Overlays `patch` onto `base`, refusing keys the base does not have.
void merge_known(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ContractError("experiment: configuration root must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ContractError("experiment: unknown configuration key '" + where + "'");
    if (base[key].is_object() && value.is_object()) {
      merge_known(base[key], value, where);
    } else {
      base[key] = value;
    }
  }
}

ExperimentConfig checked(const json& j) {
  try {
    auto c = from_json(j);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ContractError(std::string("experiment: malformed configuration: ") + e.what());
  }
}

}  // namespace

std::string to_json_text(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ExperimentConfig parse_config(std::string_view json_text) {
  json patch;
  try {
    patch = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ContractError(std::string("experiment: configuration is not valid JSON: ") + e.what());
  }
  json base = to_json(ExperimentConfig{});
  merge_known(base, patch, "");
  return checked(base);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("experiment: cannot open configuration " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ContractError("experiment: override must look like key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json j = to_json(cfg);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw ContractError("experiment: unknown configuration key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  cfg = checked(j);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace motorlab::experiment
