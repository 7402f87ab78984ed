#include "kbvqa/training.h"

#include <cmath>

#include <gtest/gtest.h>

#include "support/grad_check.h"

namespace kbvqa {
namespace {

QuestionRecord WithAnswers(std::vector<std::string> answers) {
  QuestionRecord r;
  r.id = "r";
  r.question = "q";
  for (auto& a : answers) r.answers.push_back({a, 1.0});
  return r;
}

// `n` random inputs whose class is decided by the sign pattern of the first
// token embedding, so a small model can fit them exactly.
std::vector<Example> SeparableExamples(const ModelConfig& c, int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Example> out;
  for (int i = 0; i < n; ++i) {
    Example ex;
    ex.record_id = "ex" + std::to_string(i);
    ex.input = testing::RandomModelInput(c, 5, rng);
    const int cls = i % c.answer_vocab_size;
    ex.input.tokens.row(1).setConstant(0.0);
    ex.input.tokens(1, cls % c.embed_dim) = 3.0;
    ex.target = Vector::Zero(c.answer_vocab_size);
    ex.target[cls] = 1.0;
    ex.credit = ex.target;
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(AnswerVocabTest, BuildNormalizesSortsAndDedups) {
  const auto vocab = AnswerVocab::Build(
      {WithAnswers({"The Dog.", "cat"}), WithAnswers({"dog", "the", "Apple"})});
  EXPECT_EQ(vocab.answers(), (std::vector<std::string>{"apple", "cat", "dog"}));
  EXPECT_EQ(vocab.Find("dog"), 2);
  EXPECT_EQ(vocab.Find("The Dog."), -1);
  EXPECT_THROW(AnswerVocab({"a", "a"}), Error);
}

TEST(PredictTopKTest, Examples) {
  Vector l(3);
  l << 0.1, 2.0, -1.0;
  EXPECT_EQ(PredictTopK(l, 1), (std::vector<std::pair<int, double>>{{1, 2.0}}));
  EXPECT_EQ(PredictTopK(l, 10),
            (std::vector<std::pair<int, double>>{{1, 2.0}, {0, 0.1}, {2, -1.0}}));
  Vector tie(2);
  tie << 1.0, 1.0;
  EXPECT_EQ(PredictTopK(tie, 2), (std::vector<std::pair<int, double>>{{0, 1.0}, {1, 1.0}}));
  EXPECT_THROW(PredictTopK(l, 0), Error);
}

TEST(TrainConfigTest, JsonRoundTrip) {
  TrainConfig c;
  c.epochs = 3;
  c.lr = 0.5;
  c.batch = 7;
  c.seed = 9;
  EXPECT_EQ(TrainConfig::FromJson(c.ToJson()).ToJson(), c.ToJson());
}

TEST(FinetuneTest, OverfitsSmallSet) {
  ModelConfig c = testing::MinimalModelConfig(3);
  c.answer_vocab_size = 4;
  Model model(c);
  const auto train = SeparableExamples(c, 32, 5);
  TrainConfig tc;
  tc.epochs = 20;
  tc.lr = 1e-2;
  tc.batch = 8;
  double acc = 0;
  int epochs = 0;
  while (epochs < 200 && acc < 1.0) {
    tc.seed = epochs;
    Finetune(model, train, nullptr, tc);
    epochs += tc.epochs;
    acc = Accuracy(model, train);
  }
  EXPECT_EQ(acc, 1.0) << "after " << epochs << " epochs";
}

TEST(FinetuneTest, LossDecreasesAndMetricsReported) {
  ModelConfig c = testing::MinimalModelConfig(4);
  c.answer_vocab_size = 4;
  Model model(c);
  const auto train = SeparableExamples(c, 24, 6);
  const auto eval = SeparableExamples(c, 8, 7);
  TrainConfig tc;
  tc.epochs = 15;
  tc.lr = 5e-3;
  tc.batch = 4;
  const auto metrics = Finetune(model, train, &eval, tc);
  ASSERT_EQ(metrics.epochs.size(), 15u);
  EXPECT_EQ(metrics.trained_examples, 24);
  EXPECT_LT(metrics.epochs.back().loss, metrics.epochs.front().loss);
  EXPECT_FALSE(std::isnan(metrics.epochs.back().eval_accuracy));
  EXPECT_TRUE(std::isnan(Finetune(model, train, nullptr, tc).epochs[0].eval_accuracy));
}

TEST(FinetuneTest, ZeroLearningRateKeepsParameters) {
  ModelConfig c = testing::MinimalModelConfig(5);
  c.answer_vocab_size = 4;
  Model model(c);
  const uint64_t before = model.Checksum();
  TrainConfig tc;
  tc.epochs = 2;
  tc.lr = 0.0;
  Finetune(model, SeparableExamples(c, 8, 1), nullptr, tc);
  EXPECT_EQ(model.Checksum(), before);
}

TEST(FinetuneTest, SeededRunsAreIdentical) {
  ModelConfig c = testing::MinimalModelConfig(6);
  c.answer_vocab_size = 4;
  c.dropout = 0.2;
  const auto train = SeparableExamples(c, 16, 2);
  TrainConfig tc;
  tc.epochs = 3;
  tc.lr = 1e-2;
  tc.batch = 5;
  tc.seed = 77;
  Model a(c), b(c);
  const auto ma = Finetune(a, train, &train, tc);
  const auto mb = Finetune(b, train, &train, tc);
  EXPECT_EQ(a.Checksum(), b.Checksum());
  for (size_t i = 0; i < ma.epochs.size(); ++i) {
    EXPECT_EQ(ma.epochs[i].loss, mb.epochs[i].loss);
    EXPECT_EQ(ma.epochs[i].eval_accuracy, mb.epochs[i].eval_accuracy);
  }
}

TEST(FinetuneTest, SkipsUnanswerableAndRejectsEmpty) {
  ModelConfig c = testing::MinimalModelConfig(7);
  c.answer_vocab_size = 4;
  Model model(c);
  auto train = SeparableExamples(c, 6, 3);
  train[0].target.setZero();
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_EQ(Finetune(model, train, nullptr, tc).trained_examples, 5);
  for (auto& ex : train) ex.target.setZero();
  EXPECT_THROW(Finetune(model, train, nullptr, tc), Error);
  train[0].target = Vector::Ones(3);
  EXPECT_THROW(Finetune(model, train, nullptr, tc), Error);
  tc.batch = 0;
  EXPECT_THROW(Finetune(model, SeparableExamples(c, 2, 1), nullptr, tc), Error);
}

TEST(AccuracyTest, UsesCredit) {
  ModelConfig c = testing::MinimalModelConfig(8);
  c.answer_vocab_size = 4;
  Model model(c);
  auto ex = SeparableExamples(c, 2, 4);
  for (auto& e : ex) e.credit = Vector::Constant(4, 0.3);
  EXPECT_DOUBLE_EQ(Accuracy(model, ex), 0.3);
  EXPECT_THROW(Accuracy(model, {}), Error);
}

}  // namespace
}  // namespace kbvqa
