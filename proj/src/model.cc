#include "kbvqa/model.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include "kbvqa/autodiff.h"

namespace kbvqa {

using ad::Tape;
using ad::Var;

void ModelConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("invalid model config: ") + what);
  };
  require(embed_dim >= 1, "embed_dim must be >= 1");
  require(hidden_dim >= 1, "hidden_dim must be >= 1");
  require(num_heads >= 1, "num_heads must be >= 1");
  require(hidden_dim % num_heads == 0,
          "hidden_dim must be divisible by num_heads");
  require(ffn_dim >= 1, "ffn_dim must be >= 1");
  require(lang_layers >= 1, "lang_layers must be >= 1");
  require(vis_layers >= 1, "vis_layers must be >= 1");
  require(cross_layers >= 1, "cross_layers must be >= 1");
  require(answer_vocab_size >= 2, "answer_vocab_size must be >= 2");
  require(max_text_len >= 2, "max_text_len must be >= 2");
  require(num_regions >= 1, "num_regions must be >= 1");
  require(region_feat_dim >= 1, "region_feat_dim must be >= 1");
  require(dropout >= 0 && dropout < 1, "dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"embed_dim", embed_dim},
          {"hidden_dim", hidden_dim},
          {"num_heads", num_heads},
          {"ffn_dim", ffn_dim},
          {"lang_layers", lang_layers},
          {"vis_layers", vis_layers},
          {"cross_layers", cross_layers},
          {"answer_vocab_size", answer_vocab_size},
          {"max_text_len", max_text_len},
          {"num_regions", num_regions},
          {"region_feat_dim", region_feat_dim},
          {"dropout", dropout},
          {"seed", seed}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.lang_layers = j.value("lang_layers", c.lang_layers);
  c.vis_layers = j.value("vis_layers", c.vis_layers);
  c.cross_layers = j.value("cross_layers", c.cross_layers);
  c.answer_vocab_size = j.value("answer_vocab_size", c.answer_vocab_size);
  c.max_text_len = j.value("max_text_len", c.max_text_len);
  c.num_regions = j.value("num_regions", c.num_regions);
  c.region_feat_dim = j.value("region_feat_dim", c.region_feat_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.seed = j.value("seed", c.seed);
  return c;
}

ModelInput MakeModelInput(const InjectedSequence& seq, VisualInput visual) {
  ModelInput input;
  if (seq.tokens.empty()) throw Error("empty token sequence");
  const Eigen::Index dim = seq.tokens[0].embedding.size();
  input.tokens.resize(seq.tokens.size(), dim);
  input.types.reserve(seq.tokens.size());
  for (size_t i = 0; i < seq.tokens.size(); ++i) {
    const auto& token = seq.tokens[i];
    if (token.embedding.size() != dim) {
      throw Error("token embeddings differ in dimension");
    }
    input.tokens.row(i) = token.embedding.transpose();
    // ENTITY tokens share the content type with wordpieces.
    input.types.push_back(token.kind == TokenKind::kSpecial ? 0 : 1);
  }
  input.visual = std::move(visual);
  return input;
}

HeadMaps& BlockMaps(AttentionSet& set, AttentionBlock block, int layer) {
  switch (block) {
    case AttentionBlock::kLangSelf:
      return set.lang_self.at(layer);
    case AttentionBlock::kVisSelf:
      return set.vis_self.at(layer);
    case AttentionBlock::kCrossTv:
      return set.cross_tv.at(layer);
    case AttentionBlock::kCrossVt:
      return set.cross_vt.at(layer);
    case AttentionBlock::kCrossLangSelf:
      return set.cross_lang_self.at(layer);
    case AttentionBlock::kCrossVisSelf:
      return set.cross_vis_self.at(layer);
  }
  throw Error("unknown attention block");
}

const HeadMaps& BlockMaps(const AttentionSet& set, AttentionBlock block,
                          int layer) {
  return BlockMaps(const_cast<AttentionSet&>(set), block, layer);
}

namespace {

Matrix RandomMatrix(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

using AttentionVars = std::vector<std::vector<Var>>;  // layer -> head

}  // namespace

// Builds one forward pass of a Model on a tape.
class ModelGraph {
 public:
  ModelGraph(const Model& model, Tape& tape, const ModelInput& input,
             const AttentionHook* hook, std::mt19937_64* rng)
      : m_(model),
        t_(tape),
        hook_(hook),
        rng_(rng),
        param_vars_(model.params_.size()) {
    const ModelConfig& c = m_.config_;
    m_.CheckInput(input);

    // Text embeddings.
    Var tokens = t_.Constant(input.tokens);
    Var text = Linear(tokens, m_.text_in_w_, m_.text_in_b_);
    std::vector<int> positions(input.tokens.rows());
    for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
    text = t_.Add(text, t_.GatherRows(P(m_.position_), positions));
    text = t_.Add(text, t_.GatherRows(P(m_.token_type_), input.types));
    text = Dropout(t_.LayerNormRows(text, P(m_.text_ln_g_), P(m_.text_ln_b_)));

    // Region embeddings: projected features plus projected boxes.
    Var feats = Linear(t_.Constant(input.visual.features), m_.feat_w_, m_.feat_b_);
    Var boxes = Linear(t_.Constant(input.visual.boxes), m_.box_w_, m_.box_b_);
    Var vis = Dropout(
        t_.LayerNormRows(t_.Add(feats, boxes), P(m_.vis_ln_g_), P(m_.vis_ln_b_)));

    attention.lang_self.resize(c.lang_layers);
    attention.vis_self.resize(c.vis_layers);
    attention.cross_tv.resize(c.cross_layers);
    attention.cross_vt.resize(c.cross_layers);
    attention.cross_lang_self.resize(c.cross_layers);
    attention.cross_vis_self.resize(c.cross_layers);

    for (int l = 0; l < c.lang_layers; ++l) {
      text = Attention(text, text, m_.lang_attn_[l], {AttentionBlock::kLangSelf, l, 0},
                       &attention.lang_self[l]);
      text = Ffn(text, m_.lang_ffn_[l]);
    }
    for (int l = 0; l < c.vis_layers; ++l) {
      vis = Attention(vis, vis, m_.vis_attn_[l], {AttentionBlock::kVisSelf, l, 0},
                      &attention.vis_self[l]);
      vis = Ffn(vis, m_.vis_ffn_[l]);
    }
    for (int l = 0; l < c.cross_layers; ++l) {
      const auto& layer = m_.cross_[l];
      // Both co-attention directions read the states entering the layer.
      Var text_x = Attention(text, vis, layer.lang_cross,
                             {AttentionBlock::kCrossTv, l, 0}, &attention.cross_tv[l]);
      Var vis_x = Attention(vis, text, layer.vis_cross,
                            {AttentionBlock::kCrossVt, l, 0}, &attention.cross_vt[l]);
      text_x = Attention(text_x, text_x, layer.lang_self,
                         {AttentionBlock::kCrossLangSelf, l, 0},
                         &attention.cross_lang_self[l]);
      vis_x = Attention(vis_x, vis_x, layer.vis_self,
                        {AttentionBlock::kCrossVisSelf, l, 0},
                        &attention.cross_vis_self[l]);
      text = Ffn(text_x, layer.lang_ffn);
      vis = Ffn(vis_x, layer.vis_ffn);
    }

    Var pooled = t_.Tanh(Linear(t_.Row(text, 0), m_.pool_w_, m_.pool_b_));
    logits = t_.AddRowVector(t_.MatMulTransB(pooled, P(m_.cls_w_)), P(m_.cls_b_));
  }

  struct Vars {
    AttentionVars lang_self, vis_self, cross_tv, cross_vt, cross_lang_self,
        cross_vis_self;
  } attention;
  Var logits;

  // Gradient (or zeros when no gradient reached it) for every attention map.
  AttentionSet Gradients() const {
    AttentionSet out;
    auto collect = [&](const AttentionVars& vars, std::vector<HeadMaps>* maps) {
      for (const auto& heads : vars) {
        HeadMaps layer;
        for (Var v : heads) {
          const Matrix* g = t_.grad(v);
          const Matrix& value = t_.value(v);
          layer.push_back(g ? *g : Matrix::Zero(value.rows(), value.cols()));
        }
        maps->push_back(std::move(layer));
      }
    };
    Collect(collect, &out);
    return out;
  }

  AttentionSet Values() const {
    AttentionSet out;
    auto collect = [&](const AttentionVars& vars, std::vector<HeadMaps>* maps) {
      for (const auto& heads : vars) {
        HeadMaps layer;
        for (Var v : heads) layer.push_back(t_.value(v));
        maps->push_back(std::move(layer));
      }
    };
    Collect(collect, &out);
    return out;
  }

 private:
  template <typename Fn>
  void Collect(Fn& fn, AttentionSet* out) const {
    fn(attention.lang_self, &out->lang_self);
    fn(attention.vis_self, &out->vis_self);
    fn(attention.cross_tv, &out->cross_tv);
    fn(attention.cross_vt, &out->cross_vt);
    fn(attention.cross_lang_self, &out->cross_lang_self);
    fn(attention.cross_vis_self, &out->cross_vis_self);
  }

  Var P(int index) {
    Var& v = param_vars_[index];
    if (!v.valid()) v = t_.Param(index, &m_.params_[index].value);
    return v;
  }

  Var Linear(Var x, int w, int b) {
    return t_.AddRowVector(t_.MatMul(x, P(w)), P(b));
  }

  Var Dropout(Var x) {
    const double p = m_.config_.dropout;
    if (rng_ == nullptr || p <= 0) return x;
    const Matrix& v = t_.value(x);
    std::bernoulli_distribution keep(1.0 - p);
    Matrix mask(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      mask.data()[i] = keep(*rng_) ? 1.0 / (1.0 - p) : 0.0;
    }
    return t_.MulConstant(x, mask);
  }

  Var Attention(Var query_in, Var kv_in, const Model::AttentionParams& p,
                AttentionSite site, std::vector<Var>* record) {
    const int heads = m_.config_.num_heads;
    const int head_dim = m_.config_.hidden_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Var q = Linear(query_in, p.wq, p.bq);
    Var k = Linear(kv_in, p.wk, p.bk);
    Var v = Linear(kv_in, p.wv, p.bv);
    std::vector<Var> contexts;
    contexts.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      Var qh = heads == 1 ? q : t_.Columns(q, h * head_dim, head_dim);
      Var kh = heads == 1 ? k : t_.Columns(k, h * head_dim, head_dim);
      Var vh = heads == 1 ? v : t_.Columns(v, h * head_dim, head_dim);
      Var probs = t_.SoftmaxRows(t_.Scale(t_.MatMulTransB(qh, kh), scale));
      if (hook_ != nullptr && *hook_) {
        site.head = h;
        (*hook_)(site, t_.mutable_value(probs));
      }
      record->push_back(probs);
      contexts.push_back(t_.MatMul(probs, vh));
    }
    Var context = heads == 1 ? contexts[0] : t_.ConcatColumns(contexts);
    Var out = Dropout(Linear(context, p.wo, p.bo));
    return t_.LayerNormRows(t_.Add(query_in, out), P(p.ln_g), P(p.ln_b));
  }

  Var Ffn(Var x, const Model::FfnParams& p) {
    Var hidden = t_.Gelu(Linear(x, p.w1, p.b1));
    Var out = Dropout(Linear(hidden, p.w2, p.b2));
    return t_.LayerNormRows(t_.Add(x, out), P(p.ln_g), P(p.ln_b));
  }

  const Model& m_;
  Tape& t_;
  const AttentionHook* hook_;
  std::mt19937_64* rng_;
  std::vector<Var> param_vars_;
};

Model::Model(const ModelConfig& config) : config_(config) {
  config_.Validate();
  std::mt19937_64 rng(config_.seed);
  const int h = config_.hidden_dim;
  auto weight = [&](int in, int out) {
    return RandomMatrix(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  };
  auto zeros = [](int cols) { return Matrix(Matrix::Zero(1, cols)); };
  auto ones = [](int cols) { return Matrix(Matrix::Ones(1, cols)); };

  text_in_w_ = AddParam("text.input.weight", weight(config_.embed_dim, h));
  text_in_b_ = AddParam("text.input.bias", zeros(h));
  position_ = AddParam("text.position", RandomMatrix(config_.max_text_len, h, 0.1, rng));
  token_type_ = AddParam("text.token_type", RandomMatrix(2, h, 0.1, rng));
  text_ln_g_ = AddParam("text.ln.gain", ones(h));
  text_ln_b_ = AddParam("text.ln.bias", zeros(h));
  feat_w_ = AddParam("vis.feature.weight", weight(config_.region_feat_dim, h));
  feat_b_ = AddParam("vis.feature.bias", zeros(h));
  box_w_ = AddParam("vis.box.weight", weight(4, h));
  box_b_ = AddParam("vis.box.bias", zeros(h));
  vis_ln_g_ = AddParam("vis.ln.gain", ones(h));
  vis_ln_b_ = AddParam("vis.ln.bias", zeros(h));

  for (int l = 0; l < config_.lang_layers; ++l) {
    const std::string prefix = "lang." + std::to_string(l);
    lang_attn_.push_back(AddAttention(prefix + ".attn", rng));
    lang_ffn_.push_back(AddFfn(prefix + ".ffn", rng));
  }
  for (int l = 0; l < config_.vis_layers; ++l) {
    const std::string prefix = "vis." + std::to_string(l);
    vis_attn_.push_back(AddAttention(prefix + ".attn", rng));
    vis_ffn_.push_back(AddFfn(prefix + ".ffn", rng));
  }
  for (int l = 0; l < config_.cross_layers; ++l) {
    const std::string prefix = "cross." + std::to_string(l);
    CrossLayer layer;
    layer.lang_cross = AddAttention(prefix + ".lang_cross", rng);
    layer.vis_cross = AddAttention(prefix + ".vis_cross", rng);
    layer.lang_self = AddAttention(prefix + ".lang_self", rng);
    layer.vis_self = AddAttention(prefix + ".vis_self", rng);
    layer.lang_ffn = AddFfn(prefix + ".lang_ffn", rng);
    layer.vis_ffn = AddFfn(prefix + ".vis_ffn", rng);
    cross_.push_back(layer);
  }
  pool_w_ = AddParam("pooler.weight", weight(h, h));
  pool_b_ = AddParam("pooler.bias", zeros(h));
  // One row per answer.
  cls_w_ = AddParam("classifier.weight",
                    RandomMatrix(config_.answer_vocab_size, h,
                                 1.0 / std::sqrt(static_cast<double>(h)), rng));
  cls_b_ = AddParam("classifier.bias", zeros(config_.answer_vocab_size));
}

int Model::AddParam(std::string name, Matrix value) {
  params_.push_back({std::move(name), std::move(value)});
  return static_cast<int>(params_.size()) - 1;
}

Model::AttentionParams Model::AddAttention(const std::string& prefix,
                                           std::mt19937_64& rng) {
  const int h = config_.hidden_dim;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(h));
  AttentionParams p;
  p.wq = AddParam(prefix + ".query.weight", RandomMatrix(h, h, stddev, rng));
  p.bq = AddParam(prefix + ".query.bias", Matrix::Zero(1, h));
  p.wk = AddParam(prefix + ".key.weight", RandomMatrix(h, h, stddev, rng));
  p.bk = AddParam(prefix + ".key.bias", Matrix::Zero(1, h));
  p.wv = AddParam(prefix + ".value.weight", RandomMatrix(h, h, stddev, rng));
  p.bv = AddParam(prefix + ".value.bias", Matrix::Zero(1, h));
  p.wo = AddParam(prefix + ".output.weight", RandomMatrix(h, h, stddev, rng));
  p.bo = AddParam(prefix + ".output.bias", Matrix::Zero(1, h));
  p.ln_g = AddParam(prefix + ".ln.gain", Matrix::Ones(1, h));
  p.ln_b = AddParam(prefix + ".ln.bias", Matrix::Zero(1, h));
  return p;
}

Model::FfnParams Model::AddFfn(const std::string& prefix, std::mt19937_64& rng) {
  const int h = config_.hidden_dim;
  const int f = config_.ffn_dim;
  FfnParams p;
  p.w1 = AddParam(prefix + ".in.weight",
                  RandomMatrix(h, f, 1.0 / std::sqrt(static_cast<double>(h)), rng));
  p.b1 = AddParam(prefix + ".in.bias", Matrix::Zero(1, f));
  p.w2 = AddParam(prefix + ".out.weight",
                  RandomMatrix(f, h, 1.0 / std::sqrt(static_cast<double>(f)), rng));
  p.b2 = AddParam(prefix + ".out.bias", Matrix::Zero(1, h));
  p.ln_g = AddParam(prefix + ".ln.gain", Matrix::Ones(1, h));
  p.ln_b = AddParam(prefix + ".ln.bias", Matrix::Zero(1, h));
  return p;
}

int Model::FindParameter(std::string_view name) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

uint64_t Model::Checksum() const {
  uint64_t h = Fnv1a("");
  for (const auto& p : params_) {
    h = Fnv1a(std::string_view(reinterpret_cast<const char*>(p.value.data()),
                               p.value.size() * sizeof(double)),
              h);
  }
  return h;
}

void Model::CheckInput(const ModelInput& input) const {
  const auto& c = config_;
  if (input.tokens.rows() < 1 || input.tokens.rows() > c.max_text_len) {
    throw Error("sequence length " + std::to_string(input.tokens.rows()) +
                " outside [1, " + std::to_string(c.max_text_len) + "]");
  }
  if (input.tokens.cols() != c.embed_dim) {
    throw Error("token embedding dim " + std::to_string(input.tokens.cols()) +
                " != model embed_dim " + std::to_string(c.embed_dim));
  }
  if (static_cast<Eigen::Index>(input.types.size()) != input.tokens.rows()) {
    throw Error("token type count does not match sequence length");
  }
  const auto& vis = input.visual;
  if (vis.features.rows() != c.num_regions ||
      vis.features.cols() != c.region_feat_dim) {
    throw Error("region features must be " + std::to_string(c.num_regions) +
                "x" + std::to_string(c.region_feat_dim));
  }
  if (vis.boxes.rows() != c.num_regions || vis.boxes.cols() != 4) {
    throw Error("region boxes must be " + std::to_string(c.num_regions) + "x4");
  }
}

Vector Model::Logits(const ModelInput& input, const AttentionHook& hook) const {
  Tape tape;
  ModelGraph graph(*this, tape, input, hook ? &hook : nullptr, nullptr);
  return tape.value(graph.logits).row(0).transpose();
}

ForwardTrace Model::Trace(const ModelInput& input) const {
  Tape tape;
  ModelGraph graph(*this, tape, input, nullptr, nullptr);
  ForwardTrace trace;
  trace.attention = graph.Values();
  trace.logits = tape.value(graph.logits).row(0).transpose();
  trace.pooled_index = 0;
  return trace;
}

AttentionSet Model::AttentionGradients(const ModelInput& input,
                                       const Vector& logit_weights) const {
  if (logit_weights.size() != config_.answer_vocab_size) {
    throw Error("logit weight vector does not match answer vocabulary");
  }
  Tape tape;
  ModelGraph graph(*this, tape, input, nullptr, nullptr);
  tape.Backward(graph.logits, logit_weights.transpose());
  return graph.Gradients();
}

AttentionSet Model::AttentionGradients(const ModelInput& input,
                                       int target_class) const {
  if (target_class < 0 || target_class >= config_.answer_vocab_size) {
    throw Error("target class out of range");
  }
  Vector w = Vector::Zero(config_.answer_vocab_size);
  w[target_class] = 1.0;
  return AttentionGradients(input, w);
}

double Model::Loss(const ModelInput& input, const Vector& target,
                   std::vector<Matrix>* grads, std::mt19937_64* rng,
                   Vector* logits) const {
  Tape tape;
  ModelGraph graph(*this, tape, input, nullptr, rng);
  if (logits != nullptr) *logits = tape.value(graph.logits).row(0).transpose();
  Var loss = tape.SoftmaxCrossEntropy(graph.logits, target);
  const double value = tape.value(loss)(0, 0);
  if (grads != nullptr) {
    if (grads->size() != params_.size()) {
      grads->clear();
      for (const auto& p : params_) {
        grads->push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      }
    }
    tape.Backward(loss, Matrix::Ones(1, 1));
    tape.ForEachParamGrad([&](int index, const Matrix& g) { (*grads)[index] += g; });
  }
  return value;
}

namespace {

constexpr char kCheckpointMagic[8] = {'K', 'B', 'V', 'Q', 'A', 'C', 'K', '1'};

}  // namespace

void SaveCheckpoint(const Model& model, const std::vector<std::string>& answers,
                    const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = model.config().ToJson();
  header["answers"] = answers;
  header["tensors"] = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    header["tensors"].push_back({{"name", p.name},
                                 {"rows", p.value.rows()},
                                 {"cols", p.value.cols()}});
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const uint64_t size = text.size();
  out.write(reinterpret_cast<const char*>(&size), sizeof(size));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : model.parameters()) {
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw Error("write failed for checkpoint " + path.string());
}

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error(path.string() + ": not a checkpoint");
  }
  uint64_t size = 0;
  in.read(reinterpret_cast<char*>(&size), sizeof(size));
  std::string text(size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(size));
  if (!in) throw Error(path.string() + ": truncated header");
  const auto header = nlohmann::json::parse(text);
  LoadedCheckpoint loaded{Model(ModelConfig::FromJson(header.at("config"))),
                          header.at("answers").get<std::vector<std::string>>()};
  auto& params = loaded.model.parameters();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size()) {
    throw Error(path.string() + ": tensor count does not match config");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params[i].name ||
        t.at("rows").get<Eigen::Index>() != params[i].value.rows() ||
        t.at("cols").get<Eigen::Index>() != params[i].value.cols()) {
      throw Error(path.string() + ": tensor " + std::to_string(i) +
                  " does not match config");
    }
    in.read(reinterpret_cast<char*>(params[i].value.data()),
            static_cast<std::streamsize>(params[i].value.size() * sizeof(double)));
  }
  if (!in) throw Error(path.string() + ": truncated tensor data");
  return loaded;
}

}  // namespace kbvqa
