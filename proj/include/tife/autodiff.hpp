#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tife/matrix.hpp"

namespace tife {

/// Handle to a node recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

enum class OpKind : std::uint8_t {
  constant,
  parameter,
  matmul,
  transpose,
  row_softmax,
  add,
  sub,
  mul,
  scale,
  affine,
  relu,
  vstack,
  reshape,
  mean_square,
};

/// Reverse-mode recording of primitive matrix operations.
///
/// Leaves are either constants (copied in) or parameters (borrowed; the
/// referenced matrix must outlive the tape). Each recorded node caches its
/// forward value. Nodes that do not depend on any parameter are skipped by
/// backward().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Matrix value);
  /// Registers a trainable leaf. Gradients are reported in registration order.
  Var parameter(const Matrix& value);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var row_softmax(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  /// x·W + broadcast(b).
  Var affine(Var x, Var w, Var b);
  Var relu(Var a);
  Var dense(Var x, Var w, Var b, Activation act);
  Var vstack(std::span<const Var> parts);
  Var reshape(Var a, std::size_t rows, std::size_t cols);
  /// Mean of squared entries, as a 1×1 node.
  Var mean_square(Var a);

  const Matrix& value(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  /// d(loss)/d(param) for every registered parameter, in registration order.
  /// Throws ContractError if loss is not 1×1.
  std::vector<Matrix> backward(Var loss) const;

  /// Recomputes every non-leaf node from its recorded inputs and returns the
  /// value of `output`. Used to verify that recording is side-effect free.
  Matrix replay(Var output) const;

 private:
  struct Node {
    OpKind kind = OpKind::constant;
    std::vector<std::uint32_t> inputs;
    double scalar = 0.0;           // scale factor
    std::size_t rows = 0, cols = 0;  // reshape target
    bool needs_grad = false;
    Matrix owned;
    const Matrix* borrowed = nullptr;

    const Matrix& value() const { return borrowed != nullptr ? *borrowed : owned; }
  };

  Var push(Node node);
  const Node& node(Var v) const;
  Var record(OpKind kind, std::initializer_list<Var> inputs, double scalar = 0.0);
  Matrix evaluate(const Node& n, std::span<const Matrix* const> inputs) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> params_;
};

}  // namespace tife
