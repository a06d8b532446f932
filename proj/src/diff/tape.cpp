#include "motorlab/diff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "motorlab/error.hpp"

namespace motorlab::diff {

namespace {

[[noreturn]] void shape_error(Op op, const std::string& what) {
  std::ostringstream msg;
  msg << "diff: shape mismatch in " << op_name(op) << ": " << what;
  throw ContractError(msg.str());
}

void require_same_tape(Op op, Var a, Var b) {
  if (!a.valid() || (b.valid() && a.tape() != b.tape())) {
    shape_error(op, "operands are not on the same tape");
  }
}

std::size_t broadcast_size(Op op, Var a, Var b) {
  require_same_tape(op, a, b);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  if (na == nb || nb == 1) return na;
  if (na == 1) return nb;
  shape_error(op, std::to_string(na) + " vs " + std::to_string(nb));
}

Var unary(Op op, Var x, double c0 = 0.0, double c1 = 0.0) {
  if (!x.valid()) shape_error(op, "invalid operand");
  return x.tape()->record(op, x, Var{}, x.size(), 0, c0, c1);
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::MatVec: return "matvec";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Reciprocal: return "reciprocal";
    case Op::Relu: return "relu";
    case Op::Clamp: return "clamp";
    case Op::Abs: return "abs";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Slice: return "slice";
    case Op::Concat: return "concat";
    case Op::AvgPool2: return "avg_pool2";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::Sum: return "sum";
    case Op::Linearised: return "linearised";
  }
  return "unknown";
}

std::size_t Var::size() const { return tape_->node(id_).size; }

std::span<const double> Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  if (size() != 1) throw ContractError("diff: scalar() on a node of size " + std::to_string(size()));
  return value()[0];
}

std::span<const double> Gradients::operator[](Var v) const {
  const auto& n = tape_->node(v.id());
  return {adjoint_.data() + n.offset, n.size};
}

void Tape::clear() {
  nodes_.clear();
  used_ = 0;
  jacobians_used_ = 0;
}

void Tape::reserve(std::size_t nodes, std::size_t values) {
  nodes_.reserve(nodes);
  if (values > values_.size()) values_.resize(values);
}

std::uint32_t Tape::allocate(std::size_t n) {
  const std::size_t offset = used_;
  if (used_ + n > values_.size()) values_.resize(std::max(2 * values_.size(), used_ + n + 1024));
  used_ += n;
  return static_cast<std::uint32_t>(offset);
}

std::span<const double> Tape::value(Var v) const {
  const auto& n = node(v.id());
  return {values_.data() + n.offset, n.size};
}

Var Tape::leaf(std::span<const double> values) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  const auto offset = allocate(values.size());
  nodes_.push_back({Op::Leaf, -1, -1, offset, static_cast<std::uint32_t>(values.size()), 0, 0.0, 0.0});
  std::copy(values.begin(), values.end(), values_.begin() + offset);
  check_finite(id);
  return {this, id};
}

Var Tape::leaf(double value) { return leaf(std::span<const double>(&value, 1)); }

Var Tape::record(Op op, Var lhs, Var rhs, std::size_t size, std::uint32_t aux, double c0, double c1) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  const auto offset = allocate(size);
  nodes_.push_back({op, lhs.id(), rhs.valid() ? rhs.id() : -1, offset, static_cast<std::uint32_t>(size), aux,
                    c0, c1});
  evaluate(id);
  check_finite(id);
  return {this, id};
}

Var Tape::record_linearised(Var input, std::span<const double> value, std::span<const double> jacobian) {
  if (input.tape() != this) shape_error(Op::Linearised, "input is not on this tape");
  const std::size_t rows = value.size();
  const std::size_t cols = input.size();
  if (rows == 0 || jacobian.size() != rows * cols) {
    shape_error(Op::Linearised, "Jacobian of " + std::to_string(jacobian.size()) + " elements is not " +
                                    std::to_string(rows) + " x " + std::to_string(cols));
  }
  if (jacobians_used_ + jacobian.size() > jacobians_.size()) {
    jacobians_.resize(std::max(2 * jacobians_.size(), jacobians_used_ + jacobian.size() + 1024));
  }
  const auto jac_offset = static_cast<std::uint32_t>(jacobians_used_);
  std::copy(jacobian.begin(), jacobian.end(), jacobians_.begin() + jac_offset);
  jacobians_used_ += jacobian.size();

  const auto id = static_cast<std::int32_t>(nodes_.size());
  const auto offset = allocate(rows);
  nodes_.push_back({Op::Linearised, input.id(), -1, offset, static_cast<std::uint32_t>(rows), jac_offset, 0.0, 0.0});
  std::copy(value.begin(), value.end(), values_.begin() + offset);
  check_finite(id);
  for (double j : jacobian) {
    if (!std::isfinite(j)) {
      throw NumericError("diff: non-finite Jacobian entry in linearised node " + std::to_string(id));
    }
  }
  return {this, id};
}

void Tape::check_finite(std::int32_t id) const {
  const auto& n = node(id);
  const double* v = values_.data() + n.offset;
  // x * 0 is NaN exactly when x is not finite.
  double probe = 0.0;
  for (std::uint32_t i = 0; i < n.size; ++i) probe += v[i] * 0.0;
  if (probe == 0.0) return;
  for (std::uint32_t i = 0; i < n.size; ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream msg;
      msg << "diff: non-finite value produced by " << op_name(n.op) << " at node " << id << " (element " << i
          << ")";
      throw NumericError(msg.str());
    }
  }
}

void Tape::evaluate(std::int32_t id) {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  double* out = values_.data() + n.offset;
  const Node* a = n.lhs >= 0 ? &nodes_[static_cast<std::size_t>(n.lhs)] : nullptr;
  const Node* b = n.rhs >= 0 ? &nodes_[static_cast<std::size_t>(n.rhs)] : nullptr;
  const double* x = a ? values_.data() + a->offset : nullptr;
  const double* y = b ? values_.data() + b->offset : nullptr;
  const std::size_t size = n.size;

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      const std::size_t sa = a->size == 1 ? 0 : 1;
      const std::size_t sb = b->size == 1 ? 0 : 1;
      for (std::size_t i = 0; i < size; ++i) {
        const double u = x[i * sa];
        const double v = y[i * sb];
        out[i] = n.op == Op::Add ? u + v : n.op == Op::Sub ? u - v : u * v;
      }
      break;
    }
    case Op::MatVec: {
      const std::size_t cols = b->size;
      for (std::size_t r = 0; r < size; ++r) {
        const double* row = x + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * y[c];
        out[r] = acc;
      }
      break;
    }
    case Op::Tanh:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::tanh(x[i]);
      break;
    case Op::Sigmoid:
      for (std::size_t i = 0; i < size; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
    case Op::Exp:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::exp(x[i]);
      break;
    case Op::Reciprocal:
      for (std::size_t i = 0; i < size; ++i) out[i] = 1.0 / x[i];
      break;
    case Op::Relu:
      for (std::size_t i = 0; i < size; ++i) out[i] = x[i] >= 0.0 ? x[i] : 0.0;
      break;
    case Op::Clamp:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::min(std::max(x[i], n.c0), n.c1);
      break;
    case Op::Abs:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::fabs(x[i]);
      break;
    case Op::Sin:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::sin(x[i]);
      break;
    case Op::Cos:
      for (std::size_t i = 0; i < size; ++i) out[i] = std::cos(x[i]);
      break;
    case Op::Slice:
      std::copy_n(x + n.aux, size, out);
      break;
    case Op::Concat:
      std::copy_n(x, a->size, out);
      std::copy_n(y, b->size, out + a->size);
      break;
    case Op::AvgPool2:
      for (std::size_t i = 0; i < size; ++i) out[i] = 0.5 * (x[2 * i] + x[2 * i + 1]);
      break;
    case Op::Scale:
      for (std::size_t i = 0; i < size; ++i) out[i] = n.c0 * x[i];
      break;
    case Op::Shift:
      for (std::size_t i = 0; i < size; ++i) out[i] = x[i] + n.c0;
      break;
    case Op::Sum: {
      double acc = 0.0;
      for (std::size_t i = 0; i < a->size; ++i) acc += x[i];
      out[0] = acc;
      break;
    }
    case Op::Linearised:
      break;
  }
}

Gradients Tape::backward(Var output) const {
  Gradients g;
  backward(output, g);
  return g;
}

void Tape::backward(Var output, Gradients& into) const {
  if (output.tape() != this) throw ContractError("diff: backward on a node from another tape");
  const Node& root = node(output.id());
  if (root.size != 1) {
    throw ContractError("diff: backward requires a scalar output, got size " + std::to_string(root.size));
  }
  into.tape_ = this;
  into.adjoint_.assign(used_, 0.0);
  double* adj = into.adjoint_.data();
  const double* val = values_.data();
  adj[root.offset] = 1.0;

  for (std::int32_t id = output.id(); id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == Op::Leaf) continue;
    const double* g = adj + n.offset;
    const double* out = val + n.offset;
    const Node& a = nodes_[static_cast<std::size_t>(n.lhs)];
    double* ga = adj + a.offset;
    const double* x = val + a.offset;
    const std::size_t size = n.size;

    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul: {
        const Node& b = nodes_[static_cast<std::size_t>(n.rhs)];
        double* gb = adj + b.offset;
        const double* y = val + b.offset;
        const std::size_t sa = a.size == 1 ? 0 : 1;
        const std::size_t sb = b.size == 1 ? 0 : 1;
        for (std::size_t i = 0; i < size; ++i) {
          if (n.op == Op::Add) {
            ga[i * sa] += g[i];
            gb[i * sb] += g[i];
          } else if (n.op == Op::Sub) {
            ga[i * sa] += g[i];
            gb[i * sb] -= g[i];
          } else {
            ga[i * sa] += g[i] * y[i * sb];
            gb[i * sb] += g[i] * x[i * sa];
          }
        }
        break;
      }
      case Op::MatVec: {
        const Node& b = nodes_[static_cast<std::size_t>(n.rhs)];
        double* gx = adj + b.offset;
        const double* v = val + b.offset;
        const std::size_t cols = b.size;
        for (std::size_t r = 0; r < size; ++r) {
          const double gr = g[r];
          double* gw = ga + r * cols;
          const double* w = x + r * cols;
          for (std::size_t c = 0; c < cols; ++c) {
            gw[c] += gr * v[c];
            gx[c] += gr * w[c];
          }
        }
        break;
      }
      case Op::Tanh:
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * (1.0 - out[i] * out[i]);
        break;
      case Op::Sigmoid:
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * out[i] * (1.0 - out[i]);
        break;
      case Op::Exp:
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * out[i];
        break;
      case Op::Reciprocal:
        for (std::size_t i = 0; i < size; ++i) ga[i] -= g[i] * out[i] * out[i];
        break;
      case Op::Relu:
        for (std::size_t i = 0; i < size; ++i) ga[i] += x[i] >= 0.0 ? g[i] : 0.0;
        break;
      case Op::Clamp:
        for (std::size_t i = 0; i < size; ++i) ga[i] += (x[i] >= n.c0 && x[i] <= n.c1) ? g[i] : 0.0;
        break;
      case Op::Abs:
        for (std::size_t i = 0; i < size; ++i) ga[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
        break;
      case Op::Sin:
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i] * std::cos(x[i]);
        break;
      case Op::Cos:
        for (std::size_t i = 0; i < size; ++i) ga[i] -= g[i] * std::sin(x[i]);
        break;
      case Op::Slice:
        for (std::size_t i = 0; i < size; ++i) ga[n.aux + i] += g[i];
        break;
      case Op::Concat: {
        const Node& b = nodes_[static_cast<std::size_t>(n.rhs)];
        double* gb = adj + b.offset;
        for (std::size_t i = 0; i < a.size; ++i) ga[i] += g[i];
        for (std::size_t i = 0; i < b.size; ++i) gb[i] += g[a.size + i];
        break;
      }
      case Op::AvgPool2:
        for (std::size_t i = 0; i < size; ++i) {
          ga[2 * i] += 0.5 * g[i];
          ga[2 * i + 1] += 0.5 * g[i];
        }
        break;
      case Op::Scale:
        for (std::size_t i = 0; i < size; ++i) ga[i] += n.c0 * g[i];
        break;
      case Op::Shift:
        for (std::size_t i = 0; i < size; ++i) ga[i] += g[i];
        break;
      case Op::Sum:
        for (std::size_t i = 0; i < a.size; ++i) ga[i] += g[0];
        break;
      case Op::Linearised: {
        const double* jac = jacobians_.data() + n.aux;
        const std::size_t cols = a.size;
        for (std::size_t r = 0; r < size; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          const double* row = jac + r * cols;
          for (std::size_t c = 0; c < cols; ++c) ga[c] += gr * row[c];
        }
        break;
      }
    }
  }
}

Var add(Var a, Var b) { return a.tape()->record(Op::Add, a, b, broadcast_size(Op::Add, a, b)); }
Var sub(Var a, Var b) { return a.tape()->record(Op::Sub, a, b, broadcast_size(Op::Sub, a, b)); }
Var mul(Var a, Var b) { return a.tape()->record(Op::Mul, a, b, broadcast_size(Op::Mul, a, b)); }

Var matvec(Var w, std::size_t rows, Var x) {
  require_same_tape(Op::MatVec, w, x);
  if (rows == 0 || w.size() != rows * x.size()) {
    shape_error(Op::MatVec, "matrix of " + std::to_string(w.size()) + " elements is not " + std::to_string(rows) +
                                " x " + std::to_string(x.size()));
  }
  return w.tape()->record(Op::MatVec, w, x, rows);
}

Var tanh(Var x) { return unary(Op::Tanh, x); }
Var sigmoid(Var x) { return unary(Op::Sigmoid, x); }
Var exp(Var x) { return unary(Op::Exp, x); }
Var reciprocal(Var x) { return unary(Op::Reciprocal, x); }
Var relu(Var x) { return unary(Op::Relu, x); }
Var clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) shape_error(Op::Clamp, "empty interval");
  return unary(Op::Clamp, x, lo, hi);
}
Var abs(Var x) { return unary(Op::Abs, x); }
Var sin(Var x) { return unary(Op::Sin, x); }
Var cos(Var x) { return unary(Op::Cos, x); }
Var scale(Var x, double factor) { return unary(Op::Scale, x, factor); }
Var shift(Var x, double offset) { return unary(Op::Shift, x, offset); }

Var linearised(Var input, std::span<const double> value, std::span<const double> jacobian) {
  if (!input.valid()) shape_error(Op::Linearised, "invalid input");
  return input.tape()->record_linearised(input, value, jacobian);
}

Var slice(Var x, std::size_t start, std::size_t length) {
  if (!x.valid() || length == 0 || start + length > x.size()) {
    shape_error(Op::Slice, "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                               ") outside size " + std::to_string(x.valid() ? x.size() : 0));
  }
  return x.tape()->record(Op::Slice, x, Var{}, length, static_cast<std::uint32_t>(start));
}

Var concat(Var a, Var b) {
  require_same_tape(Op::Concat, a, b);
  return a.tape()->record(Op::Concat, a, b, a.size() + b.size());
}

Var avg_pool2(Var x) {
  if (!x.valid() || x.size() < 2) shape_error(Op::AvgPool2, "needs at least two elements");
  return x.tape()->record(Op::AvgPool2, x, Var{}, x.size() / 2);
}

Var sum(Var x) {
  if (!x.valid()) shape_error(Op::Sum, "invalid operand");
  return x.tape()->record(Op::Sum, x, Var{}, 1);
}

}  // namespace motorlab::diff
