#include "kbvqa/training.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "kbvqa/text.h"

namespace kbvqa {

nlohmann::json TrainConfig::ToJson() const {
  return {{"epochs", epochs},
          {"lr", lr},
          {"batch", batch},
          {"seed", seed}};
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.batch = j.value("batch", c.batch);
  c.seed = j.value("seed", c.seed);
  return c;
}

AnswerVocab::AnswerVocab(std::vector<std::string> answers)
    : answers_(std::move(answers)) {
  for (size_t i = 0; i < answers_.size(); ++i) {
    if (!index_.emplace(answers_[i], static_cast<int>(i)).second) {
      throw Error("duplicate answer '" + answers_[i] + "'");
    }
  }
}

AnswerVocab AnswerVocab::Build(const std::vector<QuestionRecord>& records) {
  std::set<std::string> unique;
  for (const auto& record : records) {
    for (const auto& answer : record.answers) {
      std::string text = NormalizeAnswer(answer.text);
      if (!text.empty()) unique.insert(std::move(text));
    }
  }
  return AnswerVocab(std::vector<std::string>(unique.begin(), unique.end()));
}

int AnswerVocab::Find(const std::string& normalized) const {
  auto it = index_.find(normalized);
  return it == index_.end() ? -1 : it->second;
}

namespace {

int Argmax(const Vector& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

class Adam {
 public:
  Adam(const std::vector<Parameter>& params, double lr)
      : lr_(lr) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }

  void Step(std::vector<Parameter>& params, const std::vector<Matrix>& grads,
            double grad_scale) {
    ++step_;
    const double c1 = 1.0 - std::pow(kBeta1, step_);
    const double c2 = 1.0 - std::pow(kBeta2, step_);
    for (size_t i = 0; i < params.size(); ++i) {
      const Matrix g = grads[i] * grad_scale;
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g.cwiseProduct(g);
      params[i].value.array() -=
          lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace

double Accuracy(const Model& model, const std::vector<Example>& examples) {
  if (examples.empty()) throw Error("empty evaluation set");
  double total = 0;
  for (const auto& ex : examples) {
    total += ex.credit[Argmax(model.Logits(ex.input))];
  }
  return total / static_cast<double>(examples.size());
}

TrainingMetrics Finetune(Model& model, const std::vector<Example>& train,
                         const std::vector<Example>* eval,
                         const TrainConfig& config) {
  const int vocab = model.config().answer_vocab_size;
  if (vocab < 1) throw Error("empty answer vocabulary");
  if (config.batch < 1) throw Error("batch size must be >= 1");
  std::vector<size_t> usable;
  for (size_t i = 0; i < train.size(); ++i) {
    if (train[i].target.size() != vocab) {
      throw Error("example target does not match the answer vocabulary");
    }
    if (train[i].target.sum() > 0) usable.push_back(i);
  }
  if (usable.empty()) throw Error("no trainable examples");

  std::mt19937_64 rng(config.seed);
  Adam adam(model.parameters(), config.lr);
  std::vector<Matrix> grads;
  TrainingMetrics metrics;
  metrics.trained_examples = static_cast<int>(usable.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(usable.begin(), usable.end(), rng);
    double loss_sum = 0;
    double correct = 0;
    for (size_t start = 0; start < usable.size(); start += config.batch) {
      const size_t end = std::min(usable.size(), start + config.batch);
      for (auto& g : grads) g.setZero();
      for (size_t i = start; i < end; ++i) {
        const Example& ex = train[usable[i]];
        Vector logits;
        loss_sum += model.Loss(ex.input, ex.target, &grads,
                               model.config().dropout > 0 ? &rng : nullptr,
                               &logits);
        correct += ex.credit[Argmax(logits)];
      }
      adam.Step(model.parameters(), grads, 1.0 / static_cast<double>(end - start));
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(usable.size());
    m.train_accuracy = correct / static_cast<double>(usable.size());
    m.eval_accuracy = (eval && !eval->empty())
                          ? Accuracy(model, *eval)
                          : std::numeric_limits<double>::quiet_NaN();
    metrics.epochs.push_back(m);
  }
  return metrics;
}

std::vector<std::pair<int, double>> PredictTopK(const Vector& logits, int k) {
  if (k < 1) throw Error("k must be >= 1");
  std::vector<int> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logits[a] > logits[b]; });
  const size_t n = std::min<size_t>(k, order.size());
  std::vector<std::pair<int, double>> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.emplace_back(order[i], logits[order[i]]);
  return out;
}

}  // namespace kbvqa
