#ifndef KBVQA_TRAINING_H_
#define KBVQA_TRAINING_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kbvqa/model.h"
#include "kbvqa/spans.h"

namespace kbvqa {

struct TrainConfig {
  int epochs = 10;
  double lr = 1e-3;
  int batch = 16;
  uint64_t seed = 0;

  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

// Answer classes, indexed in sorted order of their normalized text.
class AnswerVocab {
 public:
  AnswerVocab() = default;
  explicit AnswerVocab(std::vector<std::string> answers);

  // Normalized texts of every answer on the given records.
  static AnswerVocab Build(const std::vector<QuestionRecord>& records);

  int Find(const std::string& normalized) const;
  const std::string& at(int index) const { return answers_.at(index); }
  const std::vector<std::string>& answers() const { return answers_; }
  int size() const { return static_cast<int>(answers_.size()); }

 private:
  std::vector<std::string> answers_;
  std::map<std::string, int, std::less<>> index_;
};

// One model-ready example.
struct Example {
  std::string record_id;
  InjectedSequence sequence;
  ModelInput input;
  // Training target over the vocabulary; zero mass when no gold answer is
  // in the vocabulary (such examples are skipped in training).
  Vector target;
  // Score the evaluator gives each vocabulary answer if predicted.
  Vector credit;
  std::vector<std::string> question_types;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0;
  double train_accuracy = 0;  // running, from the training passes
  double eval_accuracy = 0;  // NaN without an eval set
};

struct TrainingMetrics {
  std::vector<EpochMetrics> epochs;
  int trained_examples = 0;
};

// Adam over mini-batches of per-example gradients, in a seeded shuffled
// order. Throws on an empty answer vocabulary or with nothing to train on.
TrainingMetrics Finetune(Model& model, const std::vector<Example>& train,
                         const std::vector<Example>* eval,
                         const TrainConfig& config);

// Mean credit of the top-1 prediction.
double Accuracy(const Model& model, const std::vector<Example>& examples);

// (answer index, logit) pairs, best first; ties go to the lower index and k
// is clamped to the vocabulary size. Throws when k < 1.
std::vector<std::pair<int, double>> PredictTopK(const Vector& logits, int k);

}  // namespace kbvqa

#endif  // KBVQA_TRAINING_H_
