#ifndef KBVQA_SYNTHETIC_H_
#define KBVQA_SYNTHETIC_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "kbvqa/dataset.h"
#include "kbvqa/embeddings.h"
#include "kbvqa/spans.h"

namespace kbvqa {

// Entity-keyed benchmark. Entity questions read
//   "who is in the picture of <alias>?"
// where the alias wordpieces are all [UNK] and the answer is the class of
// the entity, visible only through its ENTITY vector. Control questions
//   "what is the answer for <keyword>?"
// are answered by an in-vocabulary keyword. Region features are noise.
struct SyntheticConfig {
  int num_entities = 64;
  int num_questions = 1500;
  int num_classes = 8;        // at most 16
  int entity_dim = 24;        // wiki table width
  int wordpiece_dim = 32;     // wordpiece table width (model embed_dim)
  int num_shared_words = 160;
  double control_fraction = 0.2;
  double holdout_fraction = 0.1;
  double test_fraction = 0.2;
  double class_spread = 0.35;     // within-class entity noise, per coordinate
  double alignment_noise = 0.01;  // noise on mapped shared words
  int num_regions = 4;
  int region_feat_dim = 8;
  uint64_t seed = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static SyntheticConfig FromJson(const nlohmann::json& j);
};

inline constexpr std::string_view kControlType = "control";

struct SyntheticBenchmark {
  SyntheticConfig config;
  std::vector<QuestionRecord> records;  // splits "train", "holdout", "test"
  EmbeddingTable wiki{1, true};         // WORD + ENTITY namespaces
  EmbeddingTable wordpieces{1, false};  // WORDPIECE namespace
  RegionStore regions;
  SpanSet meta_spans;  // META / as_is over all records
  std::vector<std::string> class_names;
  std::map<std::string, int> entity_class;   // wiki title -> class
  std::map<std::string, int> keyword_class;  // control keyword -> class
};

SyntheticBenchmark GenerateSyntheticDataset(const SyntheticConfig& config);

// Fingerprint of records, tables and region features.
uint64_t BenchmarkChecksum(const SyntheticBenchmark& bench);

// File names written by SaveBenchmark.
struct BenchmarkFiles {
  std::filesystem::path dataset, wiki, wordpieces, region_index, region_data,
      meta_spans, config;
  static BenchmarkFiles In(const std::filesystem::path& dir);
};

void SaveBenchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir);

}  // namespace kbvqa

#endif  // KBVQA_SYNTHETIC_H_
