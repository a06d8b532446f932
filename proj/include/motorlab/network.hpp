#pragma once

// Controller architectures mapping a 16-element observation to six muscle
// excitations in (0, 1).
//
//  * Unilateral: L dense tanh layers of width U, sigmoid output.
//  * Bilateral: two hemispheres of L tanh layers of width U/2, each seeing
//    the full input. Their last layers are mixed by two trainable scalars
//    (w_D h_D + w_N h_N) and fed to a shared sigmoid output layer.
//  * BilateralCC: Bilateral plus a corpus callosum. After every hidden
//    layer except the last, the opposing hemisphere's activations are
//    average-pooled (window 2) and added onto the leading components of the
//    home hemisphere's activations before the next dense layer.
//
// All trainable scalars live in one flat vector; a layout describes the
// named tensors within it and which gradient group each belongs to.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motorlab/diff/tape.hpp"
#include "motorlab/plant.hpp"

namespace motorlab::network {

enum class Kind { Unilateral, Bilateral, BilateralCC };
enum class Group { Dominant, NonDominant, Shared };
enum class Role { Weight, Bias, Mix };

std::string_view to_string(Kind k);
std::string_view to_string(Group g);
std::string_view to_string(Role r);
Kind parse_kind(std::string_view s);
Group parse_group(std::string_view s);
Role parse_role(std::string_view s);

struct ArchitectureConfig {
  Kind kind = Kind::Unilateral;
  std::size_t units = 10;
  std::size_t layers = 2;
  std::size_t inputs = plant::kObservationSize;
  std::size_t outputs = plant::kMuscles;

  [[nodiscard]] bool bilateral() const { return kind != Kind::Unilateral; }
  /// Width of one hidden layer (of one hemisphere for bilateral kinds).
  [[nodiscard]] std::size_t width() const { return bilateral() ? units / 2 : units; }
  void validate() const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct TensorInfo {
  std::string name;
  Group group = Group::Shared;
  Role role = Role::Weight;
  std::size_t rows = 0;
  std::size_t cols = 1;
  std::size_t offset = 0;

  [[nodiscard]] std::size_t size() const { return rows * cols; }

  friend bool operator==(const TensorInfo&, const TensorInfo&) = default;
};

/// Tensors of an architecture in flat-vector order. For bilateral kinds:
/// dominant hidden layers, non-dominant hidden layers, the two mixing
/// scalars, then the output layer.
std::vector<TensorInfo> make_layout(const ArchitectureConfig& arch);
std::size_t param_count(const ArchitectureConfig& arch);

struct NetworkParams {
  ArchitectureConfig arch;
  std::vector<TensorInfo> tensors;
  std::vector<double> values;
  /// Cross-hemisphere pooling enabled. True only for an intact BilateralCC.
  bool callosum = false;
  /// Per tensor; frozen tensors receive no updates.
  std::vector<std::uint8_t> frozen;

  [[nodiscard]] std::size_t index_of(std::string_view name) const;
  [[nodiscard]] const TensorInfo& tensor(std::string_view name) const { return tensors[index_of(name)]; }
  [[nodiscard]] std::span<double> data(std::size_t tensor_index);
  [[nodiscard]] std::span<const double> data(std::size_t tensor_index) const;
  [[nodiscard]] std::span<double> data(std::string_view name) { return data(index_of(name)); }
  [[nodiscard]] std::span<const double> data(std::string_view name) const { return data(index_of(name)); }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Glorot-uniform weights, zero biases, mixing scalars 0.5.
NetworkParams init(const ArchitectureConfig& arch, std::uint64_t seed);
/// All-zero parameters for the given architecture.
NetworkParams zeros(const ArchitectureConfig& arch);

/// Per-tensor views of a flat parameter leaf.
struct BoundParams {
  std::vector<diff::Var> tensors;
};
BoundParams bind(const NetworkParams& params, diff::Var theta);

struct ForwardOptions {
  /// Multiplier on the pooled cross-hemisphere addition.
  double callosum_gain = 1.0;
};

/// Average pooling with window 2 over the first 2 * floor(n / 2) elements.
diff::Var pool_half(diff::Var h);

diff::Var forward(const NetworkParams& params, const BoundParams& bound, diff::Var x, const ForwardOptions& opts = {});

/// Plain evaluation for a single observation.
plant::Vec6 forward(const NetworkParams& params, std::span<const double> x, const ForwardOptions& opts = {});

/// Text container: header with the architecture, then each tensor with its
/// group, role, shape, frozen flag and values in shortest round-trip form.
void save(const NetworkParams& params, std::ostream& out);
NetworkParams load(std::istream& in);
void save_file(const NetworkParams& params, const std::string& path);
NetworkParams load_file(const std::string& path);

}  // namespace motorlab::network
