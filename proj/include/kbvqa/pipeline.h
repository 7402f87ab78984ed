#ifndef KBVQA_PIPELINE_H_
#define KBVQA_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kbvqa/dataset.h"
#include "kbvqa/evaluate.h"
#include "kbvqa/explain.h"
#include "kbvqa/link_resolver.h"
#include "kbvqa/ner.h"

namespace kbvqa {

// One experiment. Relative paths resolve against the config file's
// directory. `seed` drives model initialization (seed) and the training
// order (seed + 1).
struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path wiki_table;
  std::filesystem::path wordpiece_table;
  std::filesystem::path region_index;
  std::filesystem::path region_data;
  std::optional<std::filesystem::path> alignment;  // learned when absent
  std::optional<std::filesystem::path> spanset;    // extracted when absent
  std::optional<std::filesystem::path> gazetteer;
  std::optional<std::filesystem::path> stub_resolver;  // JSONL query/title
  std::optional<std::string> resolver_url;             // http://host:port/path
  std::optional<std::filesystem::path> resolver_cache;
  std::optional<std::filesystem::path> ok_rules;
  std::optional<std::filesystem::path> exclusion_list;

  SpanMethod method = SpanMethod::kMeta;
  LinkMode link_mode = LinkMode::kAsIs;
  bool inject = true;
  int max_len = 32;
  ScoreMode score_mode = ScoreMode::kExact;
  bool normalize_answers = true;

  std::string train_split = "train";
  std::string eval_split = "test";
  std::string holdout_split = "holdout";

  ModelConfig model;
  TrainConfig train;
  std::vector<Explainer> explainers = {Explainer::kBmgae, Explainer::kTrf};
  uint64_t seed = 0;
  std::filesystem::path out = "out";

  static RunConfig FromJson(const nlohmann::json& j,
                            const std::filesystem::path& base_dir);
  static RunConfig Load(const std::filesystem::path& path);
  nlohmann::json ToJson() const;
  // Throws naming the first referenced path that does not exist.
  void CheckPaths() const;
  std::vector<std::filesystem::path> InputPaths() const;
};

struct Resources {
  std::vector<QuestionRecord> records;
  EmbeddingTable wiki{1, true};
  EmbeddingTable wordpieces{1, false};
  RegionStore regions;
  std::optional<AlignmentMap> alignment;
};

Resources LoadResources(const RunConfig& config);

// Loads config.alignment or fits one over the shared vocabulary.
AlignmentMap ResolveAlignment(const RunConfig& config, const Resources& res);

// Loads config.spanset or runs extraction with the configured NER,
// resolver and OKVQA filters.
SpanBuildResult ResolveSpans(const RunConfig& config, const Resources& res);

ExampleResources MakeExampleResources(const RunConfig& config, const Resources& res);

// Span statistics over the records of one split.
SpanStats SplitSpanStats(const SpanSet& spans, const std::vector<QuestionRecord>& split,
                         const EmbeddingTable& wiki);

struct TrainedModel {
  Model model;
  AnswerVocab vocab;
  TrainingMetrics metrics;
};

// Model config with the data-dependent sizes filled in.
ModelConfig EffectiveModelConfig(const RunConfig& config, const Resources& res,
                                 const AnswerVocab& vocab);

TrainedModel TrainModel(const RunConfig& config, const Resources& res,
                        const SpanSet* spans);

struct PipelineResult {
  EvalReport report;
  std::vector<Prediction> predictions;          // eval split
  std::vector<Prediction> holdout_predictions;  // holdout split, if any
  uint64_t model_checksum = 0;
};

// Evaluates a trained model on the eval split (and predicts the holdout
// split when present). Spans are injected when `spans` is non-null; the
// report's model/type columns name the span configuration.
PipelineResult EvaluateTrained(const RunConfig& config, const Resources& res,
                               const SpanSet* spans, const TrainedModel& trained,
                               std::ostream* explanations = nullptr);

// TrainModel followed by EvaluateTrained.
PipelineResult RunPipeline(const RunConfig& config, const Resources& res,
                           const SpanSet* spans, std::ostream* explanations = nullptr);

std::string HexChecksum(uint64_t value);

}  // namespace kbvqa

#endif  // KBVQA_PIPELINE_H_
