#include "kbvqa/explain.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "json.hpp"

namespace kbvqa {
namespace {

int TextLength(const AttentionSet& a) {
  if (!a.lang_self.empty()) return static_cast<int>(a.lang_self[0].at(0).rows());
  if (!a.cross_lang_self.empty()) {
    return static_cast<int>(a.cross_lang_self[0].at(0).rows());
  }
  if (!a.cross_tv.empty()) return static_cast<int>(a.cross_tv[0].at(0).rows());
  throw Error("trace has no text attention");
}

int RegionCount(const AttentionSet& a) {
  if (!a.vis_self.empty()) return static_cast<int>(a.vis_self[0].at(0).rows());
  if (!a.cross_vis_self.empty()) {
    return static_cast<int>(a.cross_vis_self[0].at(0).rows());
  }
  if (!a.cross_tv.empty()) return static_cast<int>(a.cross_tv[0].at(0).cols());
  return 0;
}

void CheckAligned(const AttentionSet& a, const AttentionSet& g) {
  auto same = [](const std::vector<HeadMaps>& x, const std::vector<HeadMaps>& y) {
    return x.size() == y.size();
  };
  if (!same(a.lang_self, g.lang_self) || !same(a.vis_self, g.vis_self) ||
      !same(a.cross_tv, g.cross_tv) || !same(a.cross_vt, g.cross_vt) ||
      !same(a.cross_lang_self, g.cross_lang_self) ||
      !same(a.cross_vis_self, g.cross_vis_self)) {
    throw Error("attention and gradient layer counts differ");
  }
}

bool Rankable(TokenKind kind) {
  return kind == TokenKind::kWordpiece || kind == TokenKind::kEntity;
}

int Argmax(const Vector& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

Matrix GradientWeightedAttention(const HeadMaps& attention,
                                 const HeadMaps& gradients) {
  if (attention.empty() || attention.size() != gradients.size()) {
    throw Error("attention/gradient head counts differ");
  }
  Matrix sum = Matrix::Zero(attention[0].rows(), attention[0].cols());
  for (size_t h = 0; h < attention.size(); ++h) {
    const Matrix& a = attention[h];
    const Matrix& g = gradients[h];
    if (a.rows() != sum.rows() || a.cols() != sum.cols() ||
        g.rows() != a.rows() || g.cols() != a.cols()) {
      throw Error("attention/gradient shapes differ");
    }
    if (!g.allFinite()) throw Error("non-finite attention gradients");
    sum += g.cwiseProduct(a).cwiseMax(0.0);
  }
  return sum / static_cast<double>(attention.size());
}

Matrix NormalizeResidual(const Matrix& relevancy) {
  const Eigen::Index n = relevancy.rows();
  Matrix out = relevancy - Matrix::Identity(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double sum = out.row(r).sum();
    if (sum != 0.0) out.row(r) /= sum;
  }
  out += Matrix::Identity(n, n);
  return out;
}

RelevancyMaps ExplainBmgae(const AttentionSet& attention,
                           const AttentionSet& gradients) {
  CheckAligned(attention, gradients);
  const int t = TextLength(attention);
  const int i = RegionCount(attention);
  RelevancyMaps r;
  r.tt = Matrix::Identity(t, t);
  r.ii = Matrix::Identity(i, i);
  r.ti = Matrix::Zero(t, i);
  r.it = Matrix::Zero(i, t);

  auto text_self = [&](const HeadMaps& a, const HeadMaps& g) {
    const Matrix cam = GradientWeightedAttention(a, g);
    r.tt += cam * r.tt;
    r.ti += cam * r.ti;
  };
  auto image_self = [&](const HeadMaps& a, const HeadMaps& g) {
    const Matrix cam = GradientWeightedAttention(a, g);
    r.ii += cam * r.ii;
    r.it += cam * r.it;
  };

  for (size_t l = 0; l < attention.lang_self.size(); ++l) {
    text_self(attention.lang_self[l], gradients.lang_self[l]);
  }
  for (size_t l = 0; l < attention.vis_self.size(); ++l) {
    image_self(attention.vis_self[l], gradients.vis_self[l]);
  }
  for (size_t l = 0; l < attention.cross_tv.size(); ++l) {
    const Matrix cam_ti = GradientWeightedAttention(attention.cross_tv[l],
                                                    gradients.cross_tv[l]);
    const Matrix cam_it = GradientWeightedAttention(attention.cross_vt[l],
                                                    gradients.cross_vt[l]);
    const Matrix tt_bar = NormalizeResidual(r.tt);
    const Matrix ii_bar = NormalizeResidual(r.ii);
    const Matrix add_ti = tt_bar.transpose() * cam_ti * ii_bar;
    const Matrix add_tt = cam_ti * r.it;
    const Matrix add_it = ii_bar.transpose() * cam_it * tt_bar;
    const Matrix add_ii = cam_it * r.ti;
    r.ti += add_ti;
    r.tt += add_tt;
    r.it += add_it;
    r.ii += add_ii;
    text_self(attention.cross_lang_self[l], gradients.cross_lang_self[l]);
    image_self(attention.cross_vis_self[l], gradients.cross_vis_self[l]);
  }
  return r;
}

Matrix ExplainTrf(const AttentionSet& attention, const AttentionSet& gradients) {
  CheckAligned(attention, gradients);
  const int t = TextLength(attention);
  Matrix r = Matrix::Identity(t, t);
  auto roll = [&](const HeadMaps& a, const HeadMaps& g) {
    Matrix m = Matrix::Identity(t, t) + GradientWeightedAttention(a, g);
    for (Eigen::Index row = 0; row < m.rows(); ++row) m.row(row) /= m.row(row).sum();
    r = m * r;
  };
  for (size_t l = 0; l < attention.lang_self.size(); ++l) {
    roll(attention.lang_self[l], gradients.lang_self[l]);
  }
  for (size_t l = 0; l < attention.cross_lang_self.size(); ++l) {
    roll(attention.cross_lang_self[l], gradients.cross_lang_self[l]);
  }
  return r;
}

TokenRanking TopTokens(const Matrix& text_relevancy, const InjectedSequence& seq,
                       int k, int pooled_index) {
  if (k < 1) throw Error("k must be >= 1");
  if (text_relevancy.cols() != static_cast<Eigen::Index>(seq.size()) ||
      pooled_index < 0 || pooled_index >= text_relevancy.rows()) {
    throw Error("relevancy matrix does not match the sequence");
  }
  TokenRanking ranking;
  for (size_t j = 0; j < seq.size(); ++j) {
    const auto& token = seq.tokens[j];
    if (!Rankable(token.kind)) continue;
    ranking.push_back({static_cast<int>(j), token.text, token.kind,
                       text_relevancy(pooled_index, static_cast<Eigen::Index>(j))});
  }
  std::stable_sort(ranking.begin(), ranking.end(),
                   [](const RankedToken& a, const RankedToken& b) {
                     return a.score > b.score;
                   });
  if (ranking.size() > static_cast<size_t>(k)) ranking.resize(k);
  return ranking;
}

bool EntityInTopK(const TokenRanking& ranking, int k) {
  const size_t n = std::min<size_t>(std::max(k, 0), ranking.size());
  for (size_t i = 0; i < n; ++i) {
    if (ranking[i].kind == TokenKind::kEntity) return true;
  }
  return false;
}

std::vector<RankedRegion> RegionSaliency(const RelevancyMaps& maps, int k,
                                         int pooled_index) {
  std::vector<RankedRegion> regions;
  for (Eigen::Index j = 0; j < maps.ti.cols(); ++j) {
    regions.push_back({static_cast<int>(j), maps.ti(pooled_index, j)});
  }
  std::stable_sort(regions.begin(), regions.end(),
                   [](const RankedRegion& a, const RankedRegion& b) {
                     return a.score > b.score;
                   });
  if (k >= 0 && regions.size() > static_cast<size_t>(k)) regions.resize(k);
  return regions;
}

const char* ExplainerName(Explainer e) {
  switch (e) {
    case Explainer::kBmgae:
      return "bmgae";
    case Explainer::kTrf:
      return "trf";
    case Explainer::kRandom:
      return "random";
  }
  return "?";
}

Explainer ParseExplainer(std::string_view name) {
  if (name == "bmgae") return Explainer::kBmgae;
  if (name == "trf") return Explainer::kTrf;
  if (name == "random") return Explainer::kRandom;
  throw Error("unknown explainer '" + std::string(name) + "'");
}

TokenRanking RankTokens(const Model& model, const Example& example,
                        Explainer method, uint64_t seed) {
  const auto& seq = example.sequence;
  const int all = static_cast<int>(seq.size());
  if (method == Explainer::kRandom) {
    TokenRanking ranking;
    for (int j = 0; j < all; ++j) {
      if (Rankable(seq.tokens[j].kind)) {
        ranking.push_back({j, seq.tokens[j].text, seq.tokens[j].kind, 0.0});
      }
    }
    std::mt19937_64 rng(seed ^ Fnv1a(example.record_id));
    std::shuffle(ranking.begin(), ranking.end(), rng);
    for (size_t r = 0; r < ranking.size(); ++r) {
      ranking[r].score = static_cast<double>(ranking.size() - r);
    }
    return ranking;
  }
  const ForwardTrace trace = model.Trace(example.input);
  const AttentionSet grads =
      model.AttentionGradients(example.input, Argmax(trace.logits));
  if (method == Explainer::kBmgae) {
    return TopTokens(ExplainBmgae(trace.attention, grads).tt, seq, all,
                     trace.pooled_index);
  }
  return TopTokens(ExplainTrf(trace.attention, grads), seq, all,
                   trace.pooled_index);
}

std::vector<double> PerturbationTest(const Model& model,
                                     const std::vector<Example>& examples,
                                     Explainer method,
                                     const std::vector<double>& fractions,
                                     const Vector& mask_embedding,
                                     uint64_t seed) {
  if (examples.empty()) throw Error("empty evaluation set");
  for (double f : fractions) {
    if (!(f >= 0 && f <= 1)) throw Error("perturbation fractions must be in [0, 1]");
  }
  std::vector<double> credit(fractions.size(), 0.0);
  for (const auto& ex : examples) {
    const TokenRanking ranking = RankTokens(model, ex, method, seed);
    for (size_t fi = 0; fi < fractions.size(); ++fi) {
      const size_t count = static_cast<size_t>(std::ceil(
          fractions[fi] * static_cast<double>(ranking.size()) - 1e-9));
      ModelInput input = ex.input;
      for (size_t r = 0; r < std::min(count, ranking.size()); ++r) {
        input.tokens.row(ranking[r].index) = mask_embedding.transpose();
      }
      credit[fi] += ex.credit[Argmax(model.Logits(input))];
    }
  }
  for (double& c : credit) c /= static_cast<double>(examples.size());
  return credit;
}

double FullyMaskedAccuracy(const Model& model,
                           const std::vector<Example>& examples,
                           const Vector& mask_embedding) {
  if (examples.empty()) throw Error("empty evaluation set");
  double credit = 0;
  for (const auto& ex : examples) {
    ModelInput input = ex.input;
    for (size_t j = 0; j < ex.sequence.size(); ++j) {
      if (Rankable(ex.sequence.tokens[j].kind)) {
        input.tokens.row(j) = mask_embedding.transpose();
      }
    }
    credit += ex.credit[Argmax(model.Logits(input))];
  }
  return credit / static_cast<double>(examples.size());
}

Explanation ExplainExample(const Model& model, const Example& example,
                           Explainer method, int k) {
  Explanation out;
  out.record_id = example.record_id;
  out.method = method;
  TokenRanking full;
  if (method == Explainer::kBmgae) {
    const ForwardTrace trace = model.Trace(example.input);
    const AttentionSet grads =
        model.AttentionGradients(example.input, Argmax(trace.logits));
    const RelevancyMaps maps = ExplainBmgae(trace.attention, grads);
    full = TopTokens(maps.tt, example.sequence,
                     static_cast<int>(example.sequence.size()), trace.pooled_index);
    out.regions = RegionSaliency(maps, -1, trace.pooled_index);
  } else {
    full = RankTokens(model, example, method, 0);
  }
  out.entity_in_top5 = EntityInTopK(full, 5);
  if (full.size() > static_cast<size_t>(k)) full.resize(k);
  out.top_tokens = std::move(full);
  return out;
}

void WriteExplanation(const Explanation& explanation, std::ostream& out) {
  nlohmann::ordered_json row;
  row["record_id"] = explanation.record_id;
  row["method"] = ExplainerName(explanation.method);
  auto tokens = nlohmann::ordered_json::array();
  for (const auto& t : explanation.top_tokens) {
    nlohmann::ordered_json tok;
    tok["text"] = t.text;
    tok["kind"] = TokenKindName(t.kind);
    tok["score"] = t.score;
    tokens.push_back(std::move(tok));
  }
  row["top_tokens"] = std::move(tokens);
  auto regions = nlohmann::ordered_json::array();
  for (const auto& r : explanation.regions) {
    regions.push_back({{"region", r.index}, {"score", r.score}});
  }
  row["region_scores"] = std::move(regions);
  row["entity_in_top5"] = explanation.entity_in_top5;
  out << row.dump() << '\n';
}

}  // namespace kbvqa
