#ifndef KBVQA_MODEL_H_
#define KBVQA_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "kbvqa/common.h"
#include "kbvqa/injector.h"

namespace kbvqa {

struct ModelConfig {
  int embed_dim = 32;  // width of the injected token embeddings
  int hidden_dim = 64;
  int num_heads = 4;
  int ffn_dim = 256;
  int lang_layers = 2;
  int vis_layers = 2;
  int cross_layers = 2;
  int answer_vocab_size = 2;
  int max_text_len = 32;
  int num_regions = 8;
  int region_feat_dim = 32;
  double dropout = 0.1;
  uint64_t seed = 0;

  // Throws naming the first invalid field.
  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
};

// Precomputed region features with normalized [0,1] boxes.
struct VisualInput {
  Matrix features;  // num_regions x region_feat_dim
  Matrix boxes;     // num_regions x 4
};

// Model-side view of one example: token content embeddings plus the
// token-type id of every position (0 special, 1 content).
struct ModelInput {
  Matrix tokens;
  std::vector<int> types;
  VisualInput visual;
};

ModelInput MakeModelInput(const InjectedSequence& seq, VisualInput visual);

// Per-head attention probabilities of one attention block.
using HeadMaps = std::vector<Matrix>;

// Every attention block of the model, in forward order within each list.
// The same shape holds attention maps or their gradients.
struct AttentionSet {
  std::vector<HeadMaps> lang_self;        // T x T, language encoder
  std::vector<HeadMaps> vis_self;         // I x I, vision encoder
  std::vector<HeadMaps> cross_tv;         // T x I, text queries on regions
  std::vector<HeadMaps> cross_vt;         // I x T, region queries on text
  std::vector<HeadMaps> cross_lang_self;  // T x T, inside cross layers
  std::vector<HeadMaps> cross_vis_self;   // I x I, inside cross layers
};

enum class AttentionBlock {
  kLangSelf,
  kVisSelf,
  kCrossTv,
  kCrossVt,
  kCrossLangSelf,
  kCrossVisSelf,
};

struct AttentionSite {
  AttentionBlock block;
  int layer;
  int head;
};

HeadMaps& BlockMaps(AttentionSet& set, AttentionBlock block, int layer);
const HeadMaps& BlockMaps(const AttentionSet& set, AttentionBlock block,
                          int layer);

struct ForwardTrace {
  AttentionSet attention;
  Vector logits;
  int pooled_index = 0;
};

// Called with each attention map right after its softmax; may modify it.
using AttentionHook = std::function<void(const AttentionSite&, Matrix&)>;

struct Parameter {
  std::string name;
  Matrix value;
};

// Three-encoder bi-modal transformer: language self-attention, vision
// self-attention over regions, then cross layers (co-attention, per-modality
// self-attention, feed-forward). The classifier reads the final [CLS] state.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  int FindParameter(std::string_view name) const;
  uint64_t Checksum() const;

  // Evaluation forward (no dropout).
  Vector Logits(const ModelInput& input,
                const AttentionHook& hook = nullptr) const;
  ForwardTrace Trace(const ModelInput& input) const;

  // d(w . logits)/d(attention) for every attention map, at eval weights.
  AttentionSet AttentionGradients(const ModelInput& input,
                                  const Vector& logit_weights) const;
  AttentionSet AttentionGradients(const ModelInput& input,
                                  int target_class) const;

  // Cross-entropy against `target` (a distribution over answers). When
  // `grads` is non-null, parameter gradients are added into it (one matrix
  // per parameter, same order). `rng` enables dropout. The logits of this
  // pass go to `logits` when given.
  double Loss(const ModelInput& input, const Vector& target,
              std::vector<Matrix>* grads, std::mt19937_64* rng,
              Vector* logits = nullptr) const;

  void CheckInput(const ModelInput& input) const;

 private:
  friend class ModelGraph;

  struct AttentionParams {
    int wq, bq, wk, bk, wv, bv, wo, bo, ln_g, ln_b;
  };
  struct FfnParams {
    int w1, b1, w2, b2, ln_g, ln_b;
  };
  struct CrossLayer {
    AttentionParams lang_cross, vis_cross, lang_self, vis_self;
    FfnParams lang_ffn, vis_ffn;
  };

  int AddParam(std::string name, Matrix value);
  AttentionParams AddAttention(const std::string& prefix, std::mt19937_64& rng);
  FfnParams AddFfn(const std::string& prefix, std::mt19937_64& rng);

  ModelConfig config_;
  std::vector<Parameter> params_;

  int text_in_w_, text_in_b_, position_, token_type_, text_ln_g_, text_ln_b_;
  int feat_w_, feat_b_, box_w_, box_b_, vis_ln_g_, vis_ln_b_;
  std::vector<AttentionParams> lang_attn_;
  std::vector<FfnParams> lang_ffn_;
  std::vector<AttentionParams> vis_attn_;
  std::vector<FfnParams> vis_ffn_;
  std::vector<CrossLayer> cross_;
  int pool_w_, pool_b_, cls_w_, cls_b_;
};

// Checkpoint: one binary file holding a JSON header (config, answer
// vocabulary, tensor names and shapes) followed by little-endian float64
// tensor data.
void SaveCheckpoint(const Model& model, const std::vector<std::string>& answers,
                    const std::filesystem::path& path);
struct LoadedCheckpoint {
  Model model;
  std::vector<std::string> answers;
};
LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace kbvqa

#endif  // KBVQA_MODEL_H_
