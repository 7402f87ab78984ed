#include "kbvqa/autodiff.h"

#include <cmath>

namespace kbvqa::ad {
namespace {

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

void CheckSameShape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(op) + ": shape mismatch " +
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                " vs " + std::to_string(b.rows()) + "x" +
                std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::Push(Matrix value, Backprop backward) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::GradOf(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    const Matrix& v = ValueOf(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::Constant(Matrix value) { return Push(std::move(value), nullptr); }

Var Tape::Param(int param_index, const Matrix* value) {
  Node node;
  node.ref = value;
  node.param = param_index;
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const { return ValueOf(v.id); }

Matrix& Tape::mutable_value(Var v) {
  Node& n = nodes_[v.id];
  if (n.ref) throw Error("parameter leaves are read-only");
  return n.value;
}

const Matrix* Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  return n.has_grad ? &n.grad : nullptr;
}

void Tape::Backward(Var root, const Matrix& seed) {
  CheckSameShape(ValueOf(root.id), seed, "Backward");
  GradOf(root.id) += seed;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backward) n.backward(*this, id);
  }
}

Var Tape::MatMul(Var a, Var b) {
  const Matrix& av = ValueOf(a.id);
  const Matrix& bv = ValueOf(b.id);
  if (av.cols() != bv.rows()) throw Error("MatMul: inner dimension mismatch");
  return Push(av * bv, [a, b](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.GradOf(a.id).noalias() += g * t.ValueOf(b.id).transpose();
    t.GradOf(b.id).noalias() += t.ValueOf(a.id).transpose() * g;
  });
}

Var Tape::MatMulTransB(Var a, Var b) {
  const Matrix& av = ValueOf(a.id);
  const Matrix& bv = ValueOf(b.id);
  if (av.cols() != bv.cols()) throw Error("MatMulTransB: dimension mismatch");
  return Push(av * bv.transpose(), [a, b](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.GradOf(a.id).noalias() += g * t.ValueOf(b.id);
    t.GradOf(b.id).noalias() += g.transpose() * t.ValueOf(a.id);
  });
}

Var Tape::Add(Var a, Var b) {
  CheckSameShape(ValueOf(a.id), ValueOf(b.id), "Add");
  return Push(ValueOf(a.id) + ValueOf(b.id), [a, b](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.GradOf(a.id) += g;
    t.GradOf(b.id) += g;
  });
}

Var Tape::AddRowVector(Var a, Var row) {
  const Matrix& av = ValueOf(a.id);
  const Matrix& rv = ValueOf(row.id);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw Error("AddRowVector: bias shape mismatch");
  }
  Matrix out = av.rowwise() + rv.row(0);
  return Push(std::move(out), [a, row](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    t.GradOf(a.id) += g;
    t.GradOf(row.id) += g.colwise().sum();
  });
}

Var Tape::Scale(Var a, double s) {
  return Push(ValueOf(a.id) * s, [a, s](Tape& t, int self) {
    t.GradOf(a.id) += t.nodes_[self].grad * s;
  });
}

Var Tape::MulConstant(Var a, const Matrix& mask) {
  CheckSameShape(ValueOf(a.id), mask, "MulConstant");
  return Push(ValueOf(a.id).cwiseProduct(mask), [a, mask](Tape& t, int self) {
    t.GradOf(a.id) += t.nodes_[self].grad.cwiseProduct(mask);
  });
}

Var Tape::SoftmaxRows(Var a) {
  const Matrix& x = ValueOf(a.id);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return Push(std::move(y), [a](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& y = t.nodes_[self].value;
    Matrix& ga = t.GradOf(a.id);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var Tape::LayerNormRows(Var x, Var gain, Var bias, double eps) {
  const Matrix& xv = ValueOf(x.id);
  const Matrix& gv = ValueOf(gain.id);
  const Matrix& bv = ValueOf(bias.id);
  if (gv.rows() != 1 || gv.cols() != xv.cols() || bv.rows() != 1 ||
      bv.cols() != xv.cols()) {
    throw Error("LayerNormRows: gain/bias shape mismatch");
  }
  const Eigen::Index n = xv.cols();
  Matrix xhat(xv.rows(), n);
  Vector inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).mean();
    const auto centered = xv.row(r).array() - mean;
    const double var = centered.square().sum() / static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std[r];
  }
  Matrix out = (xhat.array().rowwise() * gv.row(0).array()).matrix();
  out.rowwise() += bv.row(0);
  return Push(std::move(out), [x, gain, bias, xhat = std::move(xhat),
                               inv_std = std::move(inv_std)](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    const auto& gv = t.ValueOf(gain.id);
    t.GradOf(gain.id) += g.cwiseProduct(xhat).colwise().sum();
    t.GradOf(bias.id) += g.colwise().sum();
    Matrix& gx = t.GradOf(x.id);
    const double n = static_cast<double>(xhat.cols());
    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
      const Eigen::RowVectorXd dxhat = g.row(r).cwiseProduct(gv.row(0));
      const double mean_d = dxhat.sum() / n;
      const double mean_dx = dxhat.dot(xhat.row(r)) / n;
      gx.row(r).array() +=
          inv_std[r] *
          (dxhat.array() - mean_d - xhat.row(r).array() * mean_dx);
    }
  });
}

Var Tape::Gelu(Var a) {
  const Matrix& x = ValueOf(a.id);
  Matrix y = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluScale * (v + kGeluCubic * v * v * v)));
  });
  return Push(std::move(y), [a](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& x = t.ValueOf(a.id);
    Matrix d = x.unaryExpr([](double v) {
      const double th = std::tanh(kGeluScale * (v + kGeluCubic * v * v * v));
      return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluScale *
                                    (1.0 + 3.0 * kGeluCubic * v * v);
    });
    t.GradOf(a.id) += g.cwiseProduct(d);
  });
}

Var Tape::Tanh(Var a) {
  Matrix y = ValueOf(a.id).array().tanh().matrix();
  return Push(std::move(y), [a](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    const Matrix& y = t.nodes_[self].value;
    t.GradOf(a.id).array() += g.array() * (1.0 - y.array().square());
  });
}

Var Tape::Columns(Var a, int start, int count) {
  const Matrix& av = ValueOf(a.id);
  if (start < 0 || count <= 0 || start + count > av.cols()) {
    throw Error("Columns: range out of bounds");
  }
  return Push(av.middleCols(start, count), [a, start, count](Tape& t, int self) {
    t.GradOf(a.id).middleCols(start, count) += t.nodes_[self].grad;
  });
}

Var Tape::ConcatColumns(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("ConcatColumns: no inputs");
  const Eigen::Index rows = ValueOf(parts[0].id).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (ValueOf(p.id).rows() != rows) throw Error("ConcatColumns: row mismatch");
    cols += ValueOf(p.id).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (Var p : parts) {
    const Matrix& pv = ValueOf(p.id);
    out.middleCols(offset, pv.cols()) = pv;
    offset += pv.cols();
  }
  return Push(std::move(out), [parts](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    Eigen::Index offset = 0;
    for (Var p : parts) {
      const Eigen::Index c = t.ValueOf(p.id).cols();
      t.GradOf(p.id) += g.middleCols(offset, c);
      offset += c;
    }
  });
}

Var Tape::Row(Var a, int row) {
  const Matrix& av = ValueOf(a.id);
  if (row < 0 || row >= av.rows()) throw Error("Row: index out of bounds");
  return Push(av.row(row), [a, row](Tape& t, int self) {
    t.GradOf(a.id).row(row) += t.nodes_[self].grad.row(0);
  });
}

Var Tape::GatherRows(Var table, const std::vector<int>& rows) {
  const Matrix& tv = ValueOf(table.id);
  Matrix out(rows.size(), tv.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= tv.rows()) {
      throw Error("GatherRows: index out of bounds");
    }
    out.row(i) = tv.row(rows[i]);
  }
  return Push(std::move(out), [table, rows](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    Matrix& gt = t.GradOf(table.id);
    for (size_t i = 0; i < rows.size(); ++i) gt.row(rows[i]) += g.row(i);
  });
}

Var Tape::SoftmaxCrossEntropy(Var logits, const Vector& target) {
  const Matrix& z = ValueOf(logits.id);
  if (z.rows() != 1 || z.cols() != target.size()) {
    throw Error("SoftmaxCrossEntropy: target size mismatch");
  }
  const double m = z.maxCoeff();
  const double log_sum = m + std::log((z.array() - m).exp().sum());
  Eigen::RowVectorXd log_probs = z.row(0).array() - log_sum;
  Matrix loss(1, 1);
  loss(0, 0) = -(target.transpose().array() * log_probs.array()).sum();
  return Push(std::move(loss), [logits, target, log_probs](Tape& t, int self) {
    const double g = t.nodes_[self].grad(0, 0);
    const double mass = target.sum();
    Eigen::RowVectorXd d =
        log_probs.array().exp() * mass - target.transpose().array();
    t.GradOf(logits.id).row(0) += g * d;
  });
}

}  // namespace kbvqa::ad
