#ifndef KBVQA_EXPLAIN_H_
#define KBVQA_EXPLAIN_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kbvqa/model.h"
#include "kbvqa/training.h"

namespace kbvqa {

// Relevance of every input position for every other, per modality pair
// (t = text tokens, i = image regions). Entries are nonnegative.
struct RelevancyMaps {
  Matrix tt;  // T x T
  Matrix ti;  // T x I
  Matrix it;  // I x T
  Matrix ii;  // I x I
};

// mean over heads of relu(grad * attn). Throws on non-finite gradients or
// mismatched shapes.
Matrix GradientWeightedAttention(const HeadMaps& attention,
                                 const HeadMaps& gradients);

// (R - I) with rows scaled to sum to one, then + I. All-zero rows stay zero
// before the identity is added back.
Matrix NormalizeResidual(const Matrix& relevancy);

// Bi-modal generic attention relevancy. Starts from identity self maps and
// zero cross maps, then walks the encoders in forward order: self-attention
// left-multiplies same-modality and outgoing cross maps; each co-attention
// layer adds normalized-map couplings for both directions from the state
// entering the layer.
RelevancyMaps ExplainBmgae(const AttentionSet& attention,
                           const AttentionSet& gradients);

// Rollout over the language-side self-attention blocks only:
// R <- rownorm(I + A_bar) R, from R = I.
Matrix ExplainTrf(const AttentionSet& attention, const AttentionSet& gradients);

struct RankedToken {
  int index = 0;
  std::string text;
  TokenKind kind = TokenKind::kWordpiece;
  double score = 0;
};
using TokenRanking = std::vector<RankedToken>;

// Scores each token by row `pooled_index` of the text relevancy matrix;
// SPECIAL and SEPARATOR tokens are not ranked. Best first, ties by index;
// at most k entries.
TokenRanking TopTokens(const Matrix& text_relevancy, const InjectedSequence& seq,
                       int k, int pooled_index = 0);

bool EntityInTopK(const TokenRanking& ranking, int k);

struct RankedRegion {
  int index = 0;
  double score = 0;
};

// Regions ranked by row `pooled_index` of R_ti.
std::vector<RankedRegion> RegionSaliency(const RelevancyMaps& maps, int k,
                                         int pooled_index = 0);

enum class Explainer { kBmgae, kTrf, kRandom };
const char* ExplainerName(Explainer e);  // "bmgae", "trf", "random"
Explainer ParseExplainer(std::string_view name);

// Ranks every rankable token of one example. BMGAE and TRF explain the
// model's own top-1 prediction; RANDOM shuffles with `seed`.
TokenRanking RankTokens(const Model& model, const Example& example,
                        Explainer method, uint64_t seed);

// For each fraction f, replaces the embeddings of the ceil(f * n) best
// ranked tokens (n = rankable tokens in the example) with `mask_embedding`
// and reports the mean credit of the new top-1 predictions.
std::vector<double> PerturbationTest(const Model& model,
                                     const std::vector<Example>& examples,
                                     Explainer method,
                                     const std::vector<double>& fractions,
                                     const Vector& mask_embedding,
                                     uint64_t seed = 0);

// Accuracy with every rankable token masked.
double FullyMaskedAccuracy(const Model& model,
                           const std::vector<Example>& examples,
                           const Vector& mask_embedding);

struct Explanation {
  std::string record_id;
  Explainer method = Explainer::kBmgae;
  TokenRanking top_tokens;
  std::vector<RankedRegion> regions;
  bool entity_in_top5 = false;
};

Explanation ExplainExample(const Model& model, const Example& example,
                           Explainer method, int k);

// JSONL: {record_id, method, top_tokens: [{text, kind, score}],
// region_scores: [...], entity_in_top5}
void WriteExplanation(const Explanation& explanation, std::ostream& out);

}  // namespace kbvqa

#endif  // KBVQA_EXPLAIN_H_
