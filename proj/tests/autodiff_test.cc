#include "kbvqa/autodiff.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

namespace kbvqa::ad {
namespace {

using OpFn = std::function<Var(Tape&, const std::vector<Var>&)>;

Matrix RandomMatrix(std::mt19937& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

// Scalar probe <proj, op(inputs)>.
double Probe(const OpFn& op, const std::vector<Matrix>& inputs, const Matrix& proj) {
  Tape tape;
  std::vector<Var> vars;
  for (size_t i = 0; i < inputs.size(); ++i) {
    vars.push_back(tape.Param(static_cast<int>(i), &inputs[i]));
  }
  return tape.value(op(tape, vars)).cwiseProduct(proj).sum();
}

// Compares reverse-mode gradients with central differences for every input
// element; returns the worst relative error.
double WorstRelativeError(const OpFn& op, std::vector<Matrix> inputs, unsigned seed) {
  std::mt19937 rng(seed);
  Tape tape;
  std::vector<Var> vars;
  for (size_t i = 0; i < inputs.size(); ++i) {
    vars.push_back(tape.Param(static_cast<int>(i), &inputs[i]));
  }
  const Var out = op(tape, vars);
  const Matrix proj = RandomMatrix(rng, tape.value(out).rows(), tape.value(out).cols());
  tape.Backward(out, proj);

  double worst = 0.0;
  const double eps = 1e-6;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Matrix* grad = tape.grad(vars[i]);
    for (Eigen::Index k = 0; k < inputs[i].size(); ++k) {
      const double saved = inputs[i](k);
      inputs[i](k) = saved + eps;
      const double up = Probe(op, inputs, proj);
      inputs[i](k) = saved - eps;
      const double down = Probe(op, inputs, proj);
      inputs[i](k) = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grad ? (*grad)(k) : 0.0;
      const double err = std::abs(numeric - analytic) /
                         std::max(1e-2, std::abs(numeric) + std::abs(analytic));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

class GradCheckTest : public ::testing::TestWithParam<unsigned> {
 protected:
  std::mt19937 rng_{GetParam()};
  Matrix R(int r, int c, double s = 1.0) { return RandomMatrix(rng_, r, c, s); }
  void Check(const OpFn& op, std::vector<Matrix> inputs) {
    EXPECT_LT(WorstRelativeError(op, std::move(inputs), GetParam()), 1e-7);
  }
};

TEST_P(GradCheckTest, MatMul) {
  Check([](Tape& t, const std::vector<Var>& v) { return t.MatMul(v[0], v[1]); },
        {R(3, 4), R(4, 2)});
}

TEST_P(GradCheckTest, MatMulTransB) {
  Check([](Tape& t, const std::vector<Var>& v) { return t.MatMulTransB(v[0], v[1]); },
        {R(3, 4), R(5, 4)});
}

TEST_P(GradCheckTest, AddAndScale) {
  Check([](Tape& t, const std::vector<Var>& v) {
          return t.Scale(t.Add(v[0], v[1]), -1.7);
        },
        {R(2, 3), R(2, 3)});
}

TEST_P(GradCheckTest, ReusedInputAccumulates) {
  Check([](Tape& t, const std::vector<Var>& v) {
          return t.MatMul(t.Add(v[0], v[0]), t.Tanh(v[0]));
        },
        {R(3, 3)});
}

TEST_P(GradCheckTest, AddRowVector) {
  Check([](Tape& t, const std::vector<Var>& v) { return t.AddRowVector(v[0], v[1]); },
        {R(4, 3), R(1, 3)});
}

TEST_P(GradCheckTest, MulConstant) {
  const Matrix mask = R(3, 2);
  Check([mask](Tape& t, const std::vector<Var>& v) { return t.MulConstant(v[0], mask); },
        {R(3, 2)});
}

TEST_P(GradCheckTest, SoftmaxRows) {
  Check([](Tape& t, const std::vector<Var>& v) { return t.SoftmaxRows(v[0]); },
        {R(3, 5, 2.0)});
}

TEST_P(GradCheckTest, LayerNormRows) {
  Check([](Tape& t, const std::vector<Var>& v) {
          return t.LayerNormRows(v[0], v[1], v[2]);
        },
        {R(3, 6), R(1, 6), R(1, 6)});
}

TEST_P(GradCheckTest, GeluAndTanh) {
  Check([](Tape& t, const std::vector<Var>& v) { return t.Gelu(t.Tanh(v[0])); },
        {R(4, 3, 2.0)});
  Check([](Tape& t, const std::vector<Var>& v) { return t.Gelu(v[0]); }, {R(4, 3, 2.0)});
}

TEST_P(GradCheckTest, ColumnsConcatRow) {
  Check([](Tape& t, const std::vector<Var>& v) {
          Var left = t.Columns(v[0], 0, 2);
          Var right = t.Columns(v[0], 3, 2);
          return t.Row(t.ConcatColumns({right, left, v[1]}), 1);
        },
        {R(3, 5), R(3, 1)});
}

TEST_P(GradCheckTest, GatherRowsRepeats) {
  Check([](Tape& t, const std::vector<Var>& v) { return t.GatherRows(v[0], {2, 0, 2, 1}); },
        {R(4, 3)});
}

TEST_P(GradCheckTest, SoftmaxCrossEntropy) {
  Vector target(4);
  target << 0.5, 0.0, 0.25, 0.25;
  Check([target](Tape& t, const std::vector<Var>& v) {
          return t.SoftmaxCrossEntropy(v[0], target);
        },
        {R(1, 4, 3.0)});
}

TEST_P(GradCheckTest, AttentionBlockComposite) {
  Check([](Tape& t, const std::vector<Var>& v) {
          Var scores = t.Scale(t.MatMulTransB(v[0], v[1]), 0.5);
          Var attn = t.SoftmaxRows(scores);
          return t.LayerNormRows(t.MatMul(attn, v[2]), v[3], v[4]);
        },
        {R(3, 4), R(5, 4), R(5, 4), R(1, 4), R(1, 4)});
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradCheckTest, ::testing::Values(1u, 7u, 42u));

TEST(TapeTest, ForwardValues) {
  Tape t;
  Matrix a(1, 2);
  a << 0.0, std::log(3.0);
  const Var s = t.SoftmaxRows(t.Constant(a));
  EXPECT_NEAR(t.value(s)(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(t.value(s)(0, 1), 0.75, 1e-15);

  Vector target(2);
  target << 0.0, 1.0;
  const Var loss = t.SoftmaxCrossEntropy(t.Constant(a), target);
  EXPECT_NEAR(t.value(loss)(0, 0), -std::log(0.75), 1e-15);
}

TEST(TapeTest, ParamGradsReportedByIndex) {
  Matrix w = Matrix::Identity(2, 2);
  Matrix x(1, 2);
  x << 1.0, 2.0;
  Tape t;
  const Var out = t.MatMul(t.Constant(x), t.Param(7, &w));
  t.Backward(out, Matrix::Ones(1, 2));
  int seen = 0;
  t.ForEachParamGrad([&](int index, const Matrix& g) {
    EXPECT_EQ(index, 7);
    EXPECT_EQ(g, (Matrix(2, 2) << 1, 1, 2, 2).finished());
    ++seen;
  });
  EXPECT_EQ(seen, 1);
}

TEST(TapeTest, UnreachedNodesHaveNoGradient) {
  Matrix a = Matrix::Ones(2, 2);
  Tape t;
  const Var used = t.Param(0, &a);
  const Var unused = t.Constant(a);
  const Var out = t.Scale(used, 2.0);
  t.Backward(out, Matrix::Ones(2, 2));
  EXPECT_NE(t.grad(used), nullptr);
  EXPECT_EQ(t.grad(unused), nullptr);
}

TEST(TapeTest, MutableValueFeedsDownstream) {
  Tape t;
  const Var a = t.Constant(Matrix::Ones(1, 2));
  t.mutable_value(a)(0, 1) = 5.0;
  const Var b = t.Scale(a, 2.0);
  EXPECT_EQ(t.value(b)(0, 1), 10.0);
}

TEST(TapeTest, ShapeErrors) {
  Tape t;
  const Var a = t.Constant(Matrix::Ones(2, 3));
  const Var b = t.Constant(Matrix::Ones(2, 3));
  EXPECT_THROW(t.MatMul(a, b), Error);
  EXPECT_THROW(t.Add(a, t.Constant(Matrix::Ones(3, 2))), Error);
  EXPECT_THROW(t.Columns(a, 2, 2), Error);
  EXPECT_THROW(t.GatherRows(a, {2}), Error);
}

}  // namespace
}  // namespace kbvqa::ad
