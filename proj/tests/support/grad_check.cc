#include "grad_check.h"

#include <algorithm>
#include <cmath>

namespace kbvqa::testing {
namespace {

constexpr double kGradFloor = 1e-6;

Matrix Normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = normal(rng);
  return m;
}

void Record(GradCheckSummary* s, double err, const std::string& site) {
  ++s->checked;
  if (s->checked == 1 || err > s->worst_relative_error) {
    s->worst_relative_error = err;
    s->worst_site = site;
  }
}

}  // namespace

ModelConfig MinimalModelConfig(uint64_t seed) {
  ModelConfig c;
  c.embed_dim = 6;
  c.hidden_dim = 8;
  c.num_heads = 2;
  c.ffn_dim = 12;
  c.lang_layers = 1;
  c.vis_layers = 1;
  c.cross_layers = 1;
  c.answer_vocab_size = 5;
  c.max_text_len = 8;
  c.num_regions = 3;
  c.region_feat_dim = 4;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

ModelInput RandomModelInput(const ModelConfig& config, int length, std::mt19937_64& rng) {
  ModelInput input;
  input.tokens = Normal(length, config.embed_dim, rng);
  input.types.assign(length, 1);
  input.types.front() = 0;
  input.types.back() = 0;
  input.visual.features = Normal(config.num_regions, config.region_feat_dim, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  input.visual.boxes.resize(config.num_regions, 4);
  for (int r = 0; r < config.num_regions; ++r) {
    double x0 = unit(rng), x1 = unit(rng), y0 = unit(rng), y1 = unit(rng);
    input.visual.boxes.row(r) << std::min(x0, x1), std::min(y0, y1), std::max(x0, x1),
        std::max(y0, y1);
  }
  return input;
}

Vector RandomTarget(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  Vector t(size);
  for (int i = 0; i < size; ++i) t[i] = unit(rng);
  return t / t.sum();
}

double RelativeError(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckSummary CheckParameterGradients(Model& model, const ModelInput& input,
                                         const Vector& target, int num_entries,
                                         double eps, std::mt19937_64& rng) {
  auto& params = model.parameters();
  std::vector<Matrix> grads;
  for (const auto& p : params) grads.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  model.Loss(input, target, &grads, nullptr);

  GradCheckSummary summary;
  for (int n = 0; n < num_entries; ++n) {
    const size_t pi = n < static_cast<int>(params.size())
                          ? static_cast<size_t>(n)
                          : static_cast<size_t>(rng() % params.size());
    Matrix& value = params[pi].value;
    const Eigen::Index k = static_cast<Eigen::Index>(rng() % value.size());
    const double saved = value(k);
    value(k) = saved + eps;
    const double up = model.Loss(input, target, nullptr, nullptr);
    value(k) = saved - eps;
    const double down = model.Loss(input, target, nullptr, nullptr);
    value(k) = saved;
    const double numeric = (up - down) / (2 * eps);
    Record(&summary, RelativeError(grads[pi](k), numeric, kGradFloor),
           params[pi].name + "[" + std::to_string(k) + "]");
  }
  return summary;
}

GradCheckSummary CheckAttentionGradients(const Model& model, const ModelInput& input,
                                         const Vector& logit_weights, int per_block,
                                         double eps, std::mt19937_64& rng) {
  const AttentionSet grads = model.AttentionGradients(input, logit_weights);
  const ForwardTrace trace = model.Trace(input);
  const auto& c = model.config();
  const std::pair<AttentionBlock, int> kBlocks[] = {
      {AttentionBlock::kLangSelf, c.lang_layers},
      {AttentionBlock::kVisSelf, c.vis_layers},
      {AttentionBlock::kCrossTv, c.cross_layers},
      {AttentionBlock::kCrossVt, c.cross_layers},
      {AttentionBlock::kCrossLangSelf, c.cross_layers},
      {AttentionBlock::kCrossVisSelf, c.cross_layers},
  };
  GradCheckSummary summary;
  for (const auto& [block, layers] : kBlocks) {
    for (int layer = 0; layer < layers; ++layer) {
      const HeadMaps& maps = BlockMaps(trace.attention, block, layer);
      for (int n = 0; n < per_block; ++n) {
        const int head = static_cast<int>(rng() % maps.size());
        const Matrix& map = maps[head];
        const int r = static_cast<int>(rng() % map.rows());
        const int col = static_cast<int>(rng() % map.cols());
        auto eval = [&](double delta) {
          AttentionHook hook = [&](const AttentionSite& site, Matrix& a) {
            if (site.block == block && site.layer == layer && site.head == head) {
              a(r, col) += delta;
            }
          };
          return logit_weights.dot(model.Logits(input, hook));
        };
        const double numeric = (eval(eps) - eval(-eps)) / (2 * eps);
        const double analytic = BlockMaps(grads, block, layer)[head](r, col);
        Record(&summary, RelativeError(analytic, numeric, kGradFloor),
               "block " + std::to_string(static_cast<int>(block)) + " layer " +
                   std::to_string(layer) + " head " + std::to_string(head));
      }
    }
  }
  return summary;
}

}  // namespace kbvqa::testing
