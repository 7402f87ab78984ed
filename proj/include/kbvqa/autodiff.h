#ifndef KBVQA_AUTODIFF_H_
#define KBVQA_AUTODIFF_H_

#include <functional>
#include <vector>

#include "kbvqa/common.h"

namespace kbvqa::ad {

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode differentiation over dense matrices. Every op evaluates
// eagerly and records a closure that propagates gradients to its inputs.
// A tape serves one forward/backward pass and is not thread-safe.
class Tape {
 public:
  Tape() { nodes_.reserve(512); }

  Var Constant(Matrix value);
  // Leaf that reads `value` in place. Gradients reaching it are reported by
  // ForEachParamGrad under `param_index`.
  Var Param(int param_index, const Matrix* value);

  const Matrix& value(Var v) const;
  // For forward hooks only; downstream ops read the modified value.
  Matrix& mutable_value(Var v);
  // Gradient accumulated at v by Backward, or nullptr if none reached it.
  const Matrix* grad(Var v) const;

  // Seeds d(output)/d(root) = seed and runs the recorded closures in
  // reverse order.
  void Backward(Var root, const Matrix& seed);

  template <typename Fn>
  void ForEachParamGrad(Fn fn) const {
    for (const auto& node : nodes_) {
      if (node.param >= 0 && node.has_grad) fn(node.param, node.grad);
    }
  }

  size_t size() const { return nodes_.size(); }

  Var MatMul(Var a, Var b);
  Var MatMulTransB(Var a, Var b);  // a * b^T
  Var Add(Var a, Var b);
  Var AddRowVector(Var a, Var row);  // row is 1 x cols(a)
  Var Scale(Var a, double s);
  Var MulConstant(Var a, const Matrix& mask);  // elementwise
  Var SoftmaxRows(Var a);
  Var LayerNormRows(Var x, Var gain, Var bias, double eps = 1e-12);
  Var Gelu(Var a);
  Var Tanh(Var a);
  Var Columns(Var a, int start, int count);
  Var ConcatColumns(const std::vector<Var>& parts);
  Var Row(Var a, int row);
  Var GatherRows(Var table, const std::vector<int>& rows);
  // -sum_k target_k * log softmax(logits)_k for a 1 x K row; yields 1 x 1.
  Var SoftmaxCrossEntropy(Var logits, const Vector& target);

 private:
  using Backprop = std::function<void(Tape&, int)>;

  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool has_grad = false;
    int param = -1;
    Backprop backward;
  };

  Var Push(Matrix value, Backprop backward);
  // Zero-initialized on first use.
  Matrix& GradOf(int id);
  const Matrix& ValueOf(int id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }

  std::vector<Node> nodes_;
};

}  // namespace kbvqa::ad

#endif  // KBVQA_AUTODIFF_H_
