#pragma once

// Tensor-level reverse-mode automatic differentiation.
//
// A Tape records primitive operations on real vectors in evaluation order.
// Each node owns a contiguous slice of the tape's value arena, so recording
// a 50-step closed-loop rollout allocates nothing once the arena has grown
// to size. Matrices are stored row-major and carry their row count in the
// consuming matvec node.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace motorlab::diff {

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  MatVec,
  Tanh,
  Sigmoid,
  Exp,
  Reciprocal,
  Relu,
  Clamp,
  Abs,
  Sin,
  Cos,
  Slice,
  Concat,
  AvgPool2,
  Scale,
  Shift,
  Sum,
  Linearised,
};

std::string_view op_name(Op op);

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;

  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] std::int32_t id() const { return id_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::span<const double> value() const;
  /// Value of a size-1 node.
  [[nodiscard]] double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

/// Adjoints of every node after a backward pass.
class Gradients {
 public:
  [[nodiscard]] std::span<const double> operator[](Var v) const;
  [[nodiscard]] double scalar(Var v) const { return (*this)[v][0]; }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<double> adjoint_;
};

class Tape {
 public:
  struct Node {
    Op op;
    std::int32_t lhs;
    std::int32_t rhs;
    std::uint32_t offset;
    std::uint32_t size;
    std::uint32_t aux;  // matvec rows, slice start, Jacobian offset
    double c0;          // scale factor, shift, clamp low
    double c1;          // clamp high
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(std::span<const double> values);
  Var leaf(double value);

  /// Drops all nodes; keeps allocated capacity.
  void clear();
  void reserve(std::size_t nodes, std::size_t values);

  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
  [[nodiscard]] const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  [[nodiscard]] std::span<const double> value(Var v) const;

  /// Reverse sweep from a scalar output. Visits every node at or below
  /// output.id() exactly once, in decreasing id order.
  [[nodiscard]] Gradients backward(Var output) const;
  /// Same, reusing the storage of `into`.
  void backward(Var output, Gradients& into) const;

  // Recording entry point used by the free-function primitives below.
  Var record(Op op, Var lhs, Var rhs, std::size_t size, std::uint32_t aux = 0, double c0 = 0.0,
             double c1 = 0.0);
  Var record_linearised(Var input, std::span<const double> value, std::span<const double> jacobian);

 private:
  void evaluate(std::int32_t id);
  void check_finite(std::int32_t id) const;
  std::uint32_t allocate(std::size_t n);

  std::vector<Node> nodes_;
  std::vector<double> values_;  // grows in chunks; only the first used_ are live
  std::size_t used_ = 0;
  std::vector<double> jacobians_;
  std::size_t jacobians_used_ = 0;
};

// Elementwise binary ops. Either operand may have size 1, in which case it
// is broadcast against the other.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

/// y = W x with W stored row-major as a rows x (x.size()) matrix.
Var matvec(Var w, std::size_t rows, Var x);

Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var reciprocal(Var x);
/// max(x, 0). Derivative is 1 at and above zero, 0 below.
Var relu(Var x);
/// min(max(x, lo), hi). Derivative is 1 on the closed interval [lo, hi].
Var clamp(Var x, double lo, double hi);
/// |x|. Derivative at 0 is taken as 0.
Var abs(Var x);
Var sin(Var x);
Var cos(Var x);

Var slice(Var x, std::size_t start, std::size_t length);
Var concat(Var a, Var b);
/// Non-overlapping mean over windows of two; a trailing odd element is dropped.
Var avg_pool2(Var x);

Var scale(Var x, double factor);
Var shift(Var x, double offset);
inline Var operator*(double c, Var x) { return scale(x, c); }
inline Var operator-(Var x) { return scale(x, -1.0); }

/// Sum of all elements, producing a scalar.
Var sum(Var x);

/// Node whose value and local Jacobian (row-major, value.size() rows by
/// input.size() columns) were computed by the caller. Lets a fused kernel
/// enter the tape as one operation.
Var linearised(Var input, std::span<const double> value, std::span<const double> jacobian);

}  // namespace motorlab::diff
