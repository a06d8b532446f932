#include "motorlab/network.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "motorlab/error.hpp"
#include "motorlab/rng.hpp"

namespace motorlab::network {

using diff::Var;

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::Unilateral: return "unilateral";
    case Kind::Bilateral: return "bilateral";
    case Kind::BilateralCC: return "bilateral_cc";
  }
  return "?";
}

std::string_view to_string(Group g) {
  switch (g) {
    case Group::Dominant: return "dominant";
    case Group::NonDominant: return "nondominant";
    case Group::Shared: return "shared";
  }
  return "?";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Weight: return "weight";
    case Role::Bias: return "bias";
    case Role::Mix: return "mix";
  }
  return "?";
}

Kind parse_kind(std::string_view s) {
  for (auto k : {Kind::Unilateral, Kind::Bilateral, Kind::BilateralCC}) {
    if (s == to_string(k)) return k;
  }
  throw ContractError("network: unknown architecture kind '" + std::string(s) + "'");
}

Group parse_group(std::string_view s) {
  for (auto g : {Group::Dominant, Group::NonDominant, Group::Shared}) {
    if (s == to_string(g)) return g;
  }
  throw ContractError("network: unknown group '" + std::string(s) + "'");
}

Role parse_role(std::string_view s) {
  for (auto r : {Role::Weight, Role::Bias, Role::Mix}) {
    if (s == to_string(r)) return r;
  }
  throw ContractError("network: unknown role '" + std::string(s) + "'");
}

void ArchitectureConfig::validate() const {
  if (layers < 1) throw ContractError("network: at least one hidden layer required");
  if (inputs < 1 || outputs < 1) throw ContractError("network: empty input or output");
  if (units < 1) throw ContractError("network: units must be positive");
  if (bilateral()) {
    if (units % 2 != 0) throw ContractError("network: bilateral networks need an even unit count");
    if (units / 2 < 2) throw ContractError("network: hemisphere width below 2 cannot be pooled");
  }
}

namespace {

void push_dense(std::vector<TensorInfo>& out, const std::string& prefix, Group group, std::size_t rows,
                std::size_t cols) {
  out.push_back({prefix + ".weight", group, Role::Weight, rows, cols, 0});
  out.push_back({prefix + ".bias", group, Role::Bias, rows, 1, 0});
}

void push_hemisphere(std::vector<TensorInfo>& out, const ArchitectureConfig& arch, const std::string& side,
                     Group group) {
  const std::size_t w = arch.width();
  for (std::size_t k = 0; k < arch.layers; ++k) {
    push_dense(out, side + ".hidden" + std::to_string(k + 1), group, w, k == 0 ? arch.inputs : w);
  }
}

// Tensor indices inside the layout.
std::size_t hidden_weight(const ArchitectureConfig& arch, std::size_t hemisphere, std::size_t layer) {
  return hemisphere * 2 * arch.layers + 2 * layer;
}

std::size_t output_weight(const ArchitectureConfig& arch) {
  return arch.bilateral() ? 4 * arch.layers + 2 : 2 * arch.layers;
}

std::size_t mix_index(const ArchitectureConfig& arch, std::size_t hemisphere) { return 4 * arch.layers + hemisphere; }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ContractError("network: malformed number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<TensorInfo> make_layout(const ArchitectureConfig& arch) {
  arch.validate();
  std::vector<TensorInfo> out;
  if (!arch.bilateral()) {
    for (std::size_t k = 0; k < arch.layers; ++k) {
      push_dense(out, "hidden" + std::to_string(k + 1), Group::Shared, arch.units, k == 0 ? arch.inputs : arch.units);
    }
  } else {
    push_hemisphere(out, arch, "dominant", Group::Dominant);
    push_hemisphere(out, arch, "nondominant", Group::NonDominant);
    out.push_back({"mix.dominant", Group::Shared, Role::Mix, 1, 1, 0});
    out.push_back({"mix.nondominant", Group::Shared, Role::Mix, 1, 1, 0});
  }
  push_dense(out, "output", Group::Shared, arch.outputs, arch.width());

  std::size_t offset = 0;
  for (auto& t : out) {
    t.offset = offset;
    offset += t.size();
  }
  return out;
}

std::size_t param_count(const ArchitectureConfig& arch) {
  std::size_t n = 0;
  for (const auto& t : make_layout(arch)) n += t.size();
  return n;
}

std::size_t NetworkParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name == name) return i;
  }
  throw ContractError("network: no tensor named '" + std::string(name) + "'");
}

std::span<double> NetworkParams::data(std::size_t i) {
  return {values.data() + tensors.at(i).offset, tensors[i].size()};
}

std::span<const double> NetworkParams::data(std::size_t i) const {
  return {values.data() + tensors.at(i).offset, tensors[i].size()};
}

NetworkParams zeros(const ArchitectureConfig& arch) {
  NetworkParams p;
  p.arch = arch;
  p.tensors = make_layout(arch);
  p.values.assign(param_count(arch), 0.0);
  p.callosum = arch.kind == Kind::BilateralCC;
  p.frozen.assign(p.tensors.size(), 0);
  return p;
}

NetworkParams init(const ArchitectureConfig& arch, std::uint64_t seed) {
  NetworkParams p = zeros(arch);
  const Rng root = Rng(seed).split(tag(StreamTag::Init));
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const auto& t = p.tensors[i];
    auto data = p.data(i);
    if (t.role == Role::Mix) {
      data[0] = 0.5;
    } else if (t.role == Role::Weight) {
      const double bound = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
      Rng rng = root.split(i);
      for (auto& w : data) w = rng.uniform(-bound, bound);
    }
  }
  return p;
}

BoundParams bind(const NetworkParams& params, Var theta) {
  if (theta.size() != params.values.size()) {
    throw ContractError("network: parameter vector has " + std::to_string(theta.size()) + " elements, expected " +
                        std::to_string(params.values.size()));
  }
  BoundParams b;
  b.tensors.reserve(params.tensors.size());
  for (const auto& t : params.tensors) b.tensors.push_back(diff::slice(theta, t.offset, t.size()));
  return b;
}

Var pool_half(Var h) {
  if (h.size() < 2) throw ContractError("network: cannot pool a layer narrower than 2");
  return diff::avg_pool2(h);
}

namespace {

Var dense(const BoundParams& b, const std::vector<TensorInfo>& layout, std::size_t weight_index, Var x) {
  return diff::matvec(b.tensors[weight_index], layout[weight_index].rows, x) + b.tensors[weight_index + 1];
}

// Adds the pooled opposing layer onto the leading components of `home`.
Var receive(Var home, Var opposing, double gain) {
  Var pooled = pool_half(opposing);
  if (gain != 1.0) pooled = diff::scale(pooled, gain);
  const std::size_t n = pooled.size();
  const Var head = diff::slice(home, 0, n) + pooled;
  if (n == home.size()) return head;
  return diff::concat(head, diff::slice(home, n, home.size() - n));
}

}  // namespace

Var forward(const NetworkParams& params, const BoundParams& bound, Var x, const ForwardOptions& opts) {
  const auto& arch = params.arch;
  if (x.size() != arch.inputs) {
    throw ContractError("network: expected " + std::to_string(arch.inputs) + " inputs, got " +
                        std::to_string(x.size()));
  }
  const auto& layout = params.tensors;

  if (!arch.bilateral()) {
    Var h = x;
    for (std::size_t k = 0; k < arch.layers; ++k) h = diff::tanh(dense(bound, layout, 2 * k, h));
    return diff::sigmoid(dense(bound, layout, output_weight(arch), h));
  }

  Var in_d = x;
  Var in_n = x;
  Var h_d, h_n;
  for (std::size_t k = 0; k < arch.layers; ++k) {
    h_d = diff::tanh(dense(bound, layout, hidden_weight(arch, 0, k), in_d));
    h_n = diff::tanh(dense(bound, layout, hidden_weight(arch, 1, k), in_n));
    if (params.callosum && k + 1 < arch.layers) {
      in_d = receive(h_d, h_n, opts.callosum_gain);
      in_n = receive(h_n, h_d, opts.callosum_gain);
    } else {
      in_d = h_d;
      in_n = h_n;
    }
  }
  const Var combined = h_d * bound.tensors[mix_index(arch, 0)] + h_n * bound.tensors[mix_index(arch, 1)];
  return diff::sigmoid(dense(bound, layout, output_weight(arch), combined));
}

plant::Vec6 forward(const NetworkParams& params, std::span<const double> x, const ForwardOptions& opts) {
  if (params.arch.outputs != plant::kMuscles) throw ContractError("network: plain forward expects 6 outputs");
  diff::Tape tape;
  const BoundParams bound = bind(params, tape.leaf(params.values));
  const auto y = forward(params, bound, tape.leaf(x), opts).value();
  plant::Vec6 out{};
  std::copy(y.begin(), y.end(), out.begin());
  return out;
}

void save(const NetworkParams& p, std::ostream& out) {
  const auto& a = p.arch;
  out << "motorlab-network 1\n";
  out << "kind " << to_string(a.kind) << "\n";
  out << "units " << a.units << "\nlayers " << a.layers << "\ninputs " << a.inputs << "\noutputs " << a.outputs
      << "\n";
  out << "callosum " << (p.callosum ? 1 : 0) << "\n";
  out << "tensors " << p.tensors.size() << "\n";
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const auto& t = p.tensors[i];
    out << "tensor " << t.name << ' ' << to_string(t.group) << ' ' << to_string(t.role) << ' ' << t.rows << ' '
        << t.cols << ' ' << static_cast<int>(p.frozen[i]) << "\n";
    const auto d = p.data(i);
    for (std::size_t j = 0; j < d.size(); ++j) out << (j ? " " : "") << format_double(d[j]);
    out << "\n";
  }
}

NetworkParams load(std::istream& in) {
  auto expect = [&](const std::string& key) {
    std::string k;
    if (!(in >> k) || k != key) throw ContractError("network: expected '" + key + "' in checkpoint");
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "motorlab-network" || version != 1) {
    throw ContractError("network: not a motorlab-network v1 checkpoint");
  }
  ArchitectureConfig arch;
  std::string word;
  expect("kind");
  in >> word;
  arch.kind = parse_kind(word);
  expect("units");
  in >> arch.units;
  expect("layers");
  in >> arch.layers;
  expect("inputs");
  in >> arch.inputs;
  expect("outputs");
  in >> arch.outputs;
  int callosum = 0;
  expect("callosum");
  in >> callosum;
  std::size_t count = 0;
  expect("tensors");
  in >> count;
  if (!in) throw ContractError("network: truncated checkpoint header");

  NetworkParams p = zeros(arch);
  p.callosum = callosum != 0;
  if (count != p.tensors.size()) throw ContractError("network: tensor count does not match architecture");
  for (std::size_t i = 0; i < count; ++i) {
    std::string name, group, role;
    std::size_t rows = 0, cols = 0;
    int frozen = 0;
    expect("tensor");
    in >> name >> group >> role >> rows >> cols >> frozen;
    const auto& t = p.tensors[i];
    if (!in || name != t.name || parse_group(group) != t.group || parse_role(role) != t.role || rows != t.rows ||
        cols != t.cols) {
      throw ContractError("network: tensor " + std::to_string(i) + " does not match the architecture layout");
    }
    p.frozen[i] = static_cast<std::uint8_t>(frozen != 0);
    for (auto& v : p.data(i)) {
      if (!(in >> word)) throw ContractError("network: truncated tensor " + name);
      v = parse_double(word);
    }
  }
  return p;
}

void save_file(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("network: cannot write " + path);
  save(params, out);
}

NetworkParams load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("network: cannot read " + path);
  return load(in);
}

}  // namespace motorlab::network
