#include "kbvqa/pipeline.h"

#include <cstdio>
#include <fstream>

namespace kbvqa {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path Resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::optional<fs::path> OptionalPath(const json& j, const char* key,
                                     const fs::path& base) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return Resolve(base, it->get<std::string>());
}

void PutOptional(json& j, const char* key, const std::optional<fs::path>& p) {
  j[key] = p ? json(p->generic_string()) : json(nullptr);
}

std::vector<QuestionRecord> Split(const Resources& res, const std::string& split) {
  return SelectSplit(res.records, split);
}

}  // namespace

std::string HexChecksum(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

RunConfig RunConfig::FromJson(const json& j, const fs::path& base) {
  try {
    RunConfig c;
    c.dataset = Resolve(base, j.at("dataset").get<std::string>());
    c.wiki_table = Resolve(base, j.at("wiki_table").get<std::string>());
    c.wordpiece_table = Resolve(base, j.at("wordpiece_table").get<std::string>());
    c.region_index = Resolve(base, j.at("region_index").get<std::string>());
    c.region_data = Resolve(base, j.at("region_data").get<std::string>());
    c.alignment = OptionalPath(j, "alignment", base);
    c.spanset = OptionalPath(j, "spanset", base);
    c.gazetteer = OptionalPath(j, "gazetteer", base);
    c.stub_resolver = OptionalPath(j, "stub_resolver", base);
    if (auto it = j.find("resolver_url"); it != j.end() && !it->is_null()) {
      c.resolver_url = it->get<std::string>();
    }
    c.resolver_cache = OptionalPath(j, "resolver_cache", base);
    c.ok_rules = OptionalPath(j, "ok_rules", base);
    c.exclusion_list = OptionalPath(j, "exclusion_list", base);
    c.method = ParseSpanMethod(j.value("method", "meta"));
    c.link_mode = ParseLinkMode(j.value("link_mode", "as_is"));
    c.inject = j.value("inject", c.inject);
    c.max_len = j.value("max_len", c.max_len);
    c.score_mode = ParseScoreMode(j.value("score_mode", "exact"));
    c.normalize_answers = j.value("normalize_answers", c.normalize_answers);
    c.train_split = j.value("train_split", c.train_split);
    c.eval_split = j.value("eval_split", c.eval_split);
    c.holdout_split = j.value("holdout_split", c.holdout_split);
    if (j.contains("model")) c.model = ModelConfig::FromJson(j.at("model"));
    if (j.contains("train")) c.train = TrainConfig::FromJson(j.at("train"));
    if (j.contains("explainers")) {
      c.explainers.clear();
      for (const auto& e : j.at("explainers")) {
        c.explainers.push_back(ParseExplainer(e.get<std::string>()));
      }
    }
    c.seed = j.value("seed", c.seed);
    c.out = Resolve(base, j.value("out", std::string("out")));
    return c;
  } catch (const json::exception& e) {
    throw Error(std::string("run config: ") + e.what());
  }
}

RunConfig RunConfig::Load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return FromJson(j, path.parent_path());
}

json RunConfig::ToJson() const {
  json j;
  j["dataset"] = dataset.generic_string();
  j["wiki_table"] = wiki_table.generic_string();
  j["wordpiece_table"] = wordpiece_table.generic_string();
  j["region_index"] = region_index.generic_string();
  j["region_data"] = region_data.generic_string();
  PutOptional(j, "alignment", alignment);
  PutOptional(j, "spanset", spanset);
  PutOptional(j, "gazetteer", gazetteer);
  PutOptional(j, "stub_resolver", stub_resolver);
  j["resolver_url"] = resolver_url ? json(*resolver_url) : json(nullptr);
  PutOptional(j, "resolver_cache", resolver_cache);
  PutOptional(j, "ok_rules", ok_rules);
  PutOptional(j, "exclusion_list", exclusion_list);
  j["method"] = SpanMethodName(method);
  j["link_mode"] = LinkModeName(link_mode);
  j["inject"] = inject;
  j["max_len"] = max_len;
  j["score_mode"] = ScoreModeName(score_mode);
  j["normalize_answers"] = normalize_answers;
  j["train_split"] = train_split;
  j["eval_split"] = eval_split;
  j["holdout_split"] = holdout_split;
  j["model"] = model.ToJson();
  j["train"] = train.ToJson();
  json names = json::array();
  for (Explainer e : explainers) names.push_back(ExplainerName(e));
  j["explainers"] = names;
  j["seed"] = seed;
  j["out"] = out.generic_string();
  return j;
}

std::vector<fs::path> RunConfig::InputPaths() const {
  std::vector<fs::path> paths = {dataset, wiki_table, wordpiece_table, region_index,
                                 region_data};
  for (const auto& p : {alignment, spanset, gazetteer, stub_resolver, ok_rules,
                        exclusion_list}) {
    if (p) paths.push_back(*p);
  }
  return paths;
}

void RunConfig::CheckPaths() const {
  for (const auto& p : InputPaths()) {
    if (!fs::exists(p)) throw Error("input not found: " + p.string());
  }
}

Resources LoadResources(const RunConfig& config) {
  config.CheckPaths();
  Resources res;
  res.records = LoadDataset(config.dataset);
  res.wiki = LoadTable(config.wiki_table, NamespacePolicy::Words());
  res.wordpieces = LoadTable(config.wordpiece_table, NamespacePolicy::Wordpieces());
  res.regions = RegionStore::Load(config.region_index, config.region_data);
  return res;
}

AlignmentMap ResolveAlignment(const RunConfig& config, const Resources& res) {
  if (config.alignment) return AlignmentMap::Load(*config.alignment);
  return LearnAlignment(res.wiki, res.wordpieces,
                        SharedVocabulary(res.wiki, res.wordpieces));
}

SpanBuildResult ResolveSpans(const RunConfig& config, const Resources& res) {
  if (config.spanset) {
    SpanBuildResult result;
    result.spanset = LoadSpanSet(*config.spanset);
    return result;
  }
  GazetteerNer ner = config.gazetteer ? GazetteerNer::Load(*config.gazetteer)
                                      : GazetteerNer();
  LexiconChunker chunker;
  std::unique_ptr<LinkResolver> backend;
  if (config.stub_resolver) {
    backend = std::make_unique<StubLinkResolver>(StubLinkResolver::Load(*config.stub_resolver));
  } else if (config.resolver_url) {
    const std::string& url = *config.resolver_url;
    const std::string scheme = "http://";
    if (!url.starts_with(scheme)) throw Error("resolver_url must start with http://");
    const std::string rest = url.substr(scheme.size());
    const size_t slash = rest.find('/');
    const std::string authority = rest.substr(0, slash);
    const std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
    const size_t colon = authority.find(':');
    const std::string host = authority.substr(0, colon);
    const int port = colon == std::string::npos ? 80 : std::stoi(authority.substr(colon + 1));
    backend = std::make_unique<HttpLinkResolver>(host, port, path, ResolverRateFromEnv());
  }
  std::unique_ptr<CachingLinkResolver> cache;
  LinkResolver* resolver = backend.get();
  if (backend && config.resolver_cache) {
    cache = std::make_unique<CachingLinkResolver>(backend.get(), *config.resolver_cache);
    resolver = cache.get();
  }
  OkRuleset rules;
  if (config.ok_rules) rules = OkRuleset::Load(*config.ok_rules);
  std::set<std::string> exclusion;
  if (config.exclusion_list) exclusion = LoadExclusionList(*config.exclusion_list);

  SpanBuildOptions options;
  options.method = config.method;
  options.link_mode = config.link_mode;
  options.ner = &ner;
  options.chunker = &chunker;
  options.resolver = resolver;
  options.ruleset = &rules;
  options.exclusion = config.exclusion_list ? &exclusion : nullptr;
  return BuildSpanSet(res.records, res.wiki, options);
}

ExampleResources MakeExampleResources(const RunConfig& config, const Resources& res) {
  ExampleResources r;
  r.wiki = &res.wiki;
  r.wordpieces = &res.wordpieces;
  r.alignment = res.alignment ? &*res.alignment : nullptr;
  r.regions = &res.regions;
  r.max_len = config.max_len;
  r.score_mode = config.score_mode;
  r.normalize_answers = config.normalize_answers;
  return r;
}

SpanStats SplitSpanStats(const SpanSet& spans, const std::vector<QuestionRecord>& split,
                         const EmbeddingTable& wiki) {
  SpanSet subset;
  subset.method = spans.method;
  subset.link_mode = spans.link_mode;
  for (const auto& r : split) {
    if (const RecordSpans* s = spans.Find(r.id)) subset.records.push_back(*s);
  }
  return ComputeSpanStats(subset, wiki, split.size());
}

ModelConfig EffectiveModelConfig(const RunConfig& config, const Resources& res,
                                 const AnswerVocab& vocab) {
  ModelConfig m = config.model;
  m.embed_dim = res.wordpieces.dim();
  m.answer_vocab_size = vocab.size();
  m.max_text_len = config.max_len;
  m.region_feat_dim = res.regions.feature_dim();
  m.seed = config.seed;
  return m;
}

TrainedModel TrainModel(const RunConfig& config, const Resources& res,
                        const SpanSet* spans) {
  const auto train_records = Split(res, config.train_split);
  if (train_records.empty()) {
    throw Error("no records in split '" + config.train_split + "'");
  }
  AnswerVocab vocab = AnswerVocab::Build(train_records);
  Model model(EffectiveModelConfig(config, res, vocab));
  const auto examples =
      BuildExamples(train_records, spans, MakeExampleResources(config, res), vocab);
  TrainConfig train = config.train;
  train.seed = config.seed + 1;
  TrainingMetrics metrics = Finetune(model, examples, nullptr, train);
  return {std::move(model), std::move(vocab), std::move(metrics)};
}

PipelineResult RunPipeline(const RunConfig& config, const Resources& res,
                           const SpanSet* spans, std::ostream* explanations) {
  return EvaluateTrained(config, res, spans, TrainModel(config, res, spans),
                         explanations);
}

PipelineResult EvaluateTrained(const RunConfig& config, const Resources& res,
                               const SpanSet* spans, const TrainedModel& trained,
                               std::ostream* explanations) {
  const ExampleResources er = MakeExampleResources(config, res);
  const auto eval_records = Split(res, config.eval_split);
  if (eval_records.empty()) throw Error("empty evaluation split '" + config.eval_split + "'");
  const auto eval = BuildExamples(eval_records, spans, er, trained.vocab);

  PipelineResult result;
  EvalOptions options;
  options.explainers = spans ? config.explainers : std::vector<Explainer>{};
  options.explanation_out = explanations;
  result.report = Evaluate(trained.model, eval, options, &result.predictions);
  result.model_checksum = trained.model.Checksum();
  result.report.run.model = spans ? SpanMethodName(spans->method) : "baseline";
  result.report.run.type = spans ? LinkModeName(spans->link_mode) : "-";
  result.report.run.split = config.eval_split;
  result.report.run.seed = config.seed;
  result.report.run.model_checksum = HexChecksum(result.model_checksum);
  if (spans) result.report.span_stats = SplitSpanStats(*spans, eval_records, res.wiki);

  const auto holdout_records = Split(res, config.holdout_split);
  if (!holdout_records.empty()) {
    const auto holdout = BuildExamples(holdout_records, spans, er, trained.vocab);
    for (const auto& ex : holdout) {
      const Vector logits = trained.model.Logits(ex.input);
      Eigen::Index best = 0;
      logits.maxCoeff(&best);
      result.holdout_predictions.push_back(
          {ex.record_id, static_cast<int>(best), logits[best], ex.credit[best]});
    }
  }
  return result;
}

}  // namespace kbvqa
