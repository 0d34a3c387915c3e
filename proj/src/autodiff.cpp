#include "tife/autodiff.hpp"

#include <initializer_list>
#include <string>

namespace tife {

namespace {

void accumulate(Matrix& into, Matrix&& g) {
  if (into.empty()) {
    into = std::move(g);
    return;
  }
  auto dst = into.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Matrix column_sums(const Matrix& g) {
  Matrix s(1, g.cols());
  auto out = s.row(0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    auto r = g.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
  return s;
}

bool is_leaf(OpKind k) { return k == OpKind::constant || k == OpKind::parameter; }

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("Tape: unknown node " + std::to_string(v.id));
  return nodes_[v.id];
}

const Matrix& Tape::value(Var v) const { return node(v).value(); }

Var Tape::constant(Matrix value) {
  Node n;
  n.kind = OpKind::constant;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(const Matrix& value) {
  Node n;
  n.kind = OpKind::parameter;
  n.borrowed = &value;
  n.needs_grad = true;
  Var v = push(std::move(n));
  params_.push_back(v.id);
  return v;
}

Matrix Tape::evaluate(const Node& n, std::span<const Matrix* const> in) const {
  switch (n.kind) {
    case OpKind::constant:
    case OpKind::parameter:
      return n.value();
    case OpKind::matmul:
      return tife::matmul(*in[0], *in[1]);
    case OpKind::transpose:
      return tife::transpose(*in[0]);
    case OpKind::row_softmax:
      return tife::row_softmax(*in[0]);
    case OpKind::add:
      return tife::add(*in[0], *in[1]);
    case OpKind::sub:
      return tife::sub(*in[0], *in[1]);
    case OpKind::mul:
      return tife::hadamard(*in[0], *in[1]);
    case OpKind::scale:
      return tife::scale(*in[0], n.scalar);
    case OpKind::affine:
      return tife::affine(*in[0], *in[1], *in[2]);
    case OpKind::relu:
      return tife::relu(*in[0]);
    case OpKind::vstack: {
      std::vector<Matrix> parts;
      parts.reserve(in.size());
      for (const Matrix* m : in) parts.push_back(*m);
      return tife::vstack(parts);
    }
    case OpKind::reshape:
      return tife::reshape(*in[0], n.rows, n.cols);
    case OpKind::mean_square:
      return Matrix(1, 1, tife::mean_square(*in[0]));
  }
  throw ContractError("Tape: unhandled op");
}

Var Tape::record(OpKind kind, std::initializer_list<Var> inputs, double scalar) {
  Node n;
  n.kind = kind;
  n.scalar = scalar;
  std::vector<const Matrix*> in;
  for (Var v : inputs) {
    const Node& src = node(v);
    n.inputs.push_back(v.id);
    n.needs_grad = n.needs_grad || src.needs_grad;
    in.push_back(&src.value());
  }
  n.owned = evaluate(n, in);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) { return record(OpKind::matmul, {a, b}); }
Var Tape::transpose(Var a) { return record(OpKind::transpose, {a}); }
Var Tape::row_softmax(Var a) { return record(OpKind::row_softmax, {a}); }
Var Tape::add(Var a, Var b) { return record(OpKind::add, {a, b}); }
Var Tape::sub(Var a, Var b) { return record(OpKind::sub, {a, b}); }
Var Tape::mul(Var a, Var b) { return record(OpKind::mul, {a, b}); }
Var Tape::scale(Var a, double s) { return record(OpKind::scale, {a}, s); }
Var Tape::affine(Var x, Var w, Var b) { return record(OpKind::affine, {x, w, b}); }
Var Tape::relu(Var a) { return record(OpKind::relu, {a}); }
Var Tape::mean_square(Var a) { return record(OpKind::mean_square, {a}); }

Var Tape::dense(Var x, Var w, Var b, Activation act) {
  Var out = affine(x, w, b);
  return act == Activation::relu ? relu(out) : out;
}

Var Tape::vstack(std::span<const Var> parts) {
  Node n;
  n.kind = OpKind::vstack;
  std::vector<const Matrix*> in;
  for (Var p : parts) {
    const Node& src = node(p);
    n.inputs.push_back(p.id);
    n.needs_grad = n.needs_grad || src.needs_grad;
    in.push_back(&src.value());
  }
  n.owned = evaluate(n, in);
  return push(std::move(n));
}

Var Tape::reshape(Var a, std::size_t rows, std::size_t cols) {
  Node n;
  n.kind = OpKind::reshape;
  n.rows = rows;
  n.cols = cols;
  const Node& src = node(a);
  n.inputs.push_back(a.id);
  n.needs_grad = src.needs_grad;
  n.owned = tife::reshape(src.value(), rows, cols);
  return push(std::move(n));
}

std::vector<Matrix> Tape::backward(Var loss) const {
  const Node& root = node(loss);
  if (root.value().rows() != 1 || root.value().cols() != 1) {
    throw ContractError("backward: loss must be a 1x1 node, got " + root.value().shape_string());
  }

  std::vector<Matrix> grads(nodes_.size());
  grads[loss.id] = Matrix(1, 1, 1.0);

  // Node ids are assigned in recording order, so descending id is a reverse
  // topological order.
  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (!n.needs_grad || grads[idx].empty() || is_leaf(n.kind)) continue;
    const Matrix g = std::move(grads[idx]);
    auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].needs_grad; };
    auto in = [&](std::size_t k) -> const Matrix& { return nodes_[n.inputs[k]].value(); };
    auto slot = [&](std::size_t k) -> Matrix& { return grads[n.inputs[k]]; };

    switch (n.kind) {
      case OpKind::constant:
      case OpKind::parameter:
        break;
      case OpKind::matmul:
        if (wants(0)) accumulate(slot(0), matmul_a_bt(g, in(1)));
        if (wants(1)) accumulate(slot(1), matmul_at_b(in(0), g));
        break;
      case OpKind::transpose:
        accumulate(slot(0), tife::transpose(g));
        break;
      case OpKind::row_softmax: {
        const Matrix& y = n.value();
        Matrix dx(y.rows(), y.cols());
        for (std::size_t i = 0; i < y.rows(); ++i) {
          auto yr = y.row(i);
          auto gr = g.row(i);
          double dot = 0.0;
          for (std::size_t j = 0; j < yr.size(); ++j) dot += gr[j] * yr[j];
          auto out = dx.row(i);
          for (std::size_t j = 0; j < yr.size(); ++j) out[j] = yr[j] * (gr[j] - dot);
        }
        accumulate(slot(0), std::move(dx));
        break;
      }
      case OpKind::add:
        if (wants(0)) accumulate(slot(0), Matrix(g));
        if (wants(1)) accumulate(slot(1), Matrix(g));
        break;
      case OpKind::sub:
        if (wants(0)) accumulate(slot(0), Matrix(g));
        if (wants(1)) accumulate(slot(1), tife::scale(g, -1.0));
        break;
      case OpKind::mul:
        if (wants(0)) accumulate(slot(0), hadamard(g, in(1)));
        if (wants(1)) accumulate(slot(1), hadamard(g, in(0)));
        break;
      case OpKind::scale:
        accumulate(slot(0), tife::scale(g, n.scalar));
        break;
      case OpKind::affine:
        if (wants(0)) accumulate(slot(0), matmul_a_bt(g, in(1)));
        if (wants(1)) accumulate(slot(1), matmul_at_b(in(0), g));
        if (wants(2)) accumulate(slot(2), column_sums(g));
        break;
      case OpKind::relu: {
        Matrix dx = g;
        auto out = n.value().values();
        auto d = dx.values();
        for (std::size_t i = 0; i < d.size(); ++i)
          if (!(out[i] > 0.0)) d[i] = 0.0;
        accumulate(slot(0), std::move(dx));
        break;
      }
      case OpKind::vstack: {
        std::size_t row = 0;
        const std::size_t c = g.cols();
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const std::size_t r = in(k).rows();
          if (wants(k)) {
            auto first = g.values().begin() + static_cast<std::ptrdiff_t>(row * c);
            std::vector<double> part(first, first + static_cast<std::ptrdiff_t>(r * c));
            accumulate(slot(k), Matrix(r, c, std::move(part)));
          }
          row += r;
        }
        break;
      }
      case OpKind::reshape:
        accumulate(slot(0), tife::reshape(g, in(0).rows(), in(0).cols()));
        break;
      case OpKind::mean_square: {
        const double factor = 2.0 * g(0, 0) / static_cast<double>(in(0).size());
        accumulate(slot(0), tife::scale(in(0), factor));
        break;
      }
    }
  }

  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (auto id : params_) {
    if (grads[id].empty()) {
      const Matrix& p = nodes_[id].value();
      out.emplace_back(p.rows(), p.cols());
    } else {
      out.push_back(std::move(grads[id]));
    }
  }
  return out;
}

Matrix Tape::replay(Var output) const {
  node(output);
  std::vector<Matrix> values(output.id + 1);
  auto lookup = [&](std::uint32_t id) -> const Matrix* {
    const Node& n = nodes_[id];
    return is_leaf(n.kind) ? &n.value() : &values[id];
  };
  for (std::uint32_t id = 0; id <= output.id; ++id) {
    const Node& n = nodes_[id];
    if (is_leaf(n.kind)) continue;
    std::vector<const Matrix*> in;
    for (auto i : n.inputs) in.push_back(lookup(i));
    values[id] = evaluate(n, in);
  }
  return *lookup(output.id);
}

}  // namespace tife
