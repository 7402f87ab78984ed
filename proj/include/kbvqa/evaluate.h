#ifndef KBVQA_EVALUATE_H_
#define KBVQA_EVALUATE_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kbvqa/dataset.h"
#include "kbvqa/explain.h"
#include "kbvqa/metrics.h"
#include "kbvqa/training.h"

namespace kbvqa {

// Everything needed to turn records into model inputs.
struct ExampleResources {
  const EmbeddingTable* wiki = nullptr;
  const EmbeddingTable* wordpieces = nullptr;
  const AlignmentMap* alignment = nullptr;
  const RegionStore* regions = nullptr;
  int max_len = 32;
  ScoreMode score_mode = ScoreMode::kExact;
  bool normalize_answers = true;
};

// Injects the spans of `spanset` (or none when null, giving the baseline
// sequence) into each record's composed text. credit[k] scores vocabulary
// answer k; target is credit scaled to sum to one (all zero when no gold
// answer is in the vocabulary).
std::vector<Example> BuildExamples(const std::vector<QuestionRecord>& records,
                                   const SpanSet* spanset,
                                   const ExampleResources& resources,
                                   const AnswerVocab& vocab,
                                   InjectionStats* stats = nullptr);

struct TypeStats {
  int count = 0;
  double fraction = 0;  // of all evaluated questions
  double accuracy = 0;
  double mean_top1_logit = 0;

  bool operator==(const TypeStats&) const = default;
};

// How often the injected ENTITY token ranks among the k most relevant
// tokens, as fractions of all evaluated questions.
struct ExplanationStats {
  double top1 = 0;
  double top5 = 0;
  double top10 = 0;
  // Accuracy over questions with an ENTITY token in the top 5; absent when
  // there are none.
  std::optional<double> accuracy_given_top5;

  bool operator==(const ExplanationStats&) const = default;
};

struct RunInfo {
  std::string model;  // row label, e.g. "meta" or "baseline"
  std::string type;   // link mode or "-"
  std::string split;
  uint64_t seed = 0;
  std::string model_checksum;  // hex

  bool operator==(const RunInfo&) const = default;
};

struct EvalReport {
  RunInfo run;
  int num_questions = 0;
  double overall_accuracy = 0;
  double mean_top1_logit = 0;
  std::map<std::string, TypeStats> per_type;
  std::optional<SpanStats> span_stats;
  std::map<std::string, ExplanationStats> explanations;  // by explainer name

  bool operator==(const EvalReport&) const = default;
};

nlohmann::ordered_json ReportToJson(const EvalReport& report);
EvalReport ReportFromJson(const nlohmann::json& j);

struct Prediction {
  std::string record_id;
  int answer = 0;
  double top1_logit = 0;
  double credit = 0;
};

struct EvalOptions {
  std::vector<Explainer> explainers;  // empty: no explanation stats
  std::ostream* explanation_out = nullptr;  // JSONL dump, first explainer
  int dump_top_k = 10;
};

// Throws on an empty example list.
EvalReport Evaluate(const Model& model, const std::vector<Example>& examples,
                    const EvalOptions& options = {},
                    std::vector<Prediction>* predictions = nullptr);

// Pairs the two models' predictions on the same records for gating.
std::vector<GateCase> MakeGateCases(const std::vector<Prediction>& baseline,
                                    const std::vector<Prediction>& injected);

// Scalar metrics of a report by name ("overall_accuracy",
// "per_type/<t>/accuracy", "explanations/<m>/top5", ...).
std::map<std::string, double> FlattenMetrics(const EvalReport& report);

// Statistics over every metric present in all reports.
std::map<std::string, RunStats> AggregateRuns(const std::vector<EvalReport>& reports);

}  // namespace kbvqa

#endif  // KBVQA_EVALUATE_H_
