#ifndef KBVQA_TESTS_SUPPORT_GRAD_CHECK_H_
#define KBVQA_TESTS_SUPPORT_GRAD_CHECK_H_

#include <random>
#include <string>

#include "kbvqa/model.h"

namespace kbvqa::testing {

// 1/1/1 layers, two heads, tiny widths.
ModelConfig MinimalModelConfig(uint64_t seed);

// Random token embeddings, [CLS]/[SEP] types at the ends, random region
// features and valid boxes.
ModelInput RandomModelInput(const ModelConfig& config, int length, std::mt19937_64& rng);

// A random distribution over the answer vocabulary.
Vector RandomTarget(int size, std::mt19937_64& rng);

struct GradCheckSummary {
  int checked = 0;
  double worst_relative_error = 0;
  std::string worst_site;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps numerically-zero
// gradients from turning roundoff into large ratios.
double RelativeError(double analytic, double numeric, double floor);

// Loss gradients from Model::Loss against central differences on
// `num_entries` random parameter entries (every parameter tensor is
// sampled at least once when num_entries allows).
GradCheckSummary CheckParameterGradients(Model& model, const ModelInput& input,
                                         const Vector& target, int num_entries,
                                         double eps, std::mt19937_64& rng);

// d(w . logits)/d(attention) from Model::AttentionGradients against central
// differences taken by perturbing single attention entries through the
// forward hook; `per_block` random entries in every attention block.
GradCheckSummary CheckAttentionGradients(const Model& model, const ModelInput& input,
                                         const Vector& logit_weights, int per_block,
                                         double eps, std::mt19937_64& rng);

}  // namespace kbvqa::testing

#endif  // KBVQA_TESTS_SUPPORT_GRAD_CHECK_H_
