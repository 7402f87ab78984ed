#include "kbvqa/evaluate.h"

#include <algorithm>
#include <ostream>
#include <set>

#include "kbvqa/injector.h"

namespace kbvqa {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

int Argmax(const Vector& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

ordered_json Optional(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::vector<Example> BuildExamples(const std::vector<QuestionRecord>& records,
                                   const SpanSet* spanset,
                                   const ExampleResources& res,
                                   const AnswerVocab& vocab,
                                   InjectionStats* stats) {
  if (!res.wordpieces || !res.regions) {
    throw Error("example resources need wordpieces and region features");
  }
  if (spanset && (!res.wiki || !res.alignment)) {
    throw Error("injection needs the wiki table and an alignment map");
  }
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& record : records) {
    Example ex;
    ex.record_id = record.id;
    ex.question_types = record.question_types;
    const RecordSpans* spans = spanset ? spanset->Find(record.id) : nullptr;
    if (spanset && !spans) {
      throw Error("span set has no entry for record '" + record.id + "'");
    }
    if (spans) {
      ex.sequence = Inject(spans->composed_text, spans->spans, *res.alignment,
                           *res.wiki, *res.wordpieces, res.max_len, stats);
    } else {
      ex.sequence = TokenizeBaseline(ComposeText(record), *res.wordpieces, res.max_len);
    }
    ex.input = MakeModelInput(ex.sequence, res.regions->Get(record.image_ref));
    ex.credit = Vector::Zero(vocab.size());
    for (int k = 0; k < vocab.size(); ++k) {
      ex.credit[k] = record.answers.empty()
                         ? 0.0
                         : ScoreAnswer(vocab.at(k), record.answers, res.score_mode,
                                       res.normalize_answers);
    }
    const double mass = ex.credit.sum();
    ex.target = mass > 0 ? Vector(ex.credit / mass) : Vector::Zero(vocab.size());
    out.push_back(std::move(ex));
  }
  return out;
}

ordered_json ReportToJson(const EvalReport& r) {
  ordered_json j;
  j["run"] = {{"model", r.run.model},
              {"type", r.run.type},
              {"split", r.run.split},
              {"seed", r.run.seed},
              {"model_checksum", r.run.model_checksum}};
  j["num_questions"] = r.num_questions;
  j["overall_accuracy"] = r.overall_accuracy;
  j["mean_top1_logit"] = r.mean_top1_logit;
  ordered_json types = ordered_json::object();
  for (const auto& [name, t] : r.per_type) {
    types[name] = {{"count", t.count},
                   {"fraction", t.fraction},
                   {"accuracy", t.accuracy},
                   {"mean_top1_logit", t.mean_top1_logit}};
  }
  j["per_type"] = std::move(types);
  if (r.span_stats) {
    j["span_stats"] = {{"ents_per_q", r.span_stats->ents_per_q},
                       {"eberts_per_q", r.span_stats->eberts_per_q},
                       {"frac_q_with_eberts", r.span_stats->frac_q_with_eberts}};
  } else {
    j["span_stats"] = nullptr;
  }
  ordered_json expl = ordered_json::object();
  for (const auto& [name, e] : r.explanations) {
    expl[name] = {{"top1", e.top1},
                  {"top5", e.top5},
                  {"top10", e.top10},
                  {"accuracy_given_top5", Optional(e.accuracy_given_top5)}};
  }
  j["explanations"] = std::move(expl);
  return j;
}

EvalReport ReportFromJson(const json& j) {
  try {
    EvalReport r;
    const json& run = j.at("run");
    r.run.model = run.at("model").get<std::string>();
    r.run.type = run.at("type").get<std::string>();
    r.run.split = run.at("split").get<std::string>();
    r.run.seed = run.at("seed").get<uint64_t>();
    r.run.model_checksum = run.at("model_checksum").get<std::string>();
    r.num_questions = j.at("num_questions").get<int>();
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    r.mean_top1_logit = j.at("mean_top1_logit").get<double>();
    if (const json& types = j.at("per_type"); !types.is_null()) {
      for (const auto& [name, t] : types.items()) {
        r.per_type[name] = {t.at("count").get<int>(), t.at("fraction").get<double>(),
                            t.at("accuracy").get<double>(),
                            t.at("mean_top1_logit").get<double>()};
      }
    }
    if (const json& s = j.at("span_stats"); !s.is_null()) {
      r.span_stats = SpanStats{s.at("ents_per_q").get<double>(),
                               s.at("eberts_per_q").get<double>(),
                               s.at("frac_q_with_eberts").get<double>()};
    }
    if (const json& ex = j.at("explanations"); !ex.is_null()) {
      for (const auto& [name, e] : ex.items()) {
        ExplanationStats stats{e.at("top1").get<double>(), e.at("top5").get<double>(),
                               e.at("top10").get<double>(), std::nullopt};
        if (const json& acc = e.at("accuracy_given_top5"); !acc.is_null()) {
          stats.accuracy_given_top5 = acc.get<double>();
        }
        r.explanations[name] = stats;
      }
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
}

EvalReport Evaluate(const Model& model, const std::vector<Example>& examples,
                    const EvalOptions& options, std::vector<Prediction>* predictions) {
  if (examples.empty()) throw Error("empty evaluation set");
  const double n = static_cast<double>(examples.size());
  EvalReport report;
  report.num_questions = static_cast<int>(examples.size());
  struct Tally {
    int count = 0;
    double credit = 0;
    double logit = 0;
  };
  std::map<std::string, Tally> tallies;
  std::vector<double> credits;
  for (const auto& ex : examples) {
    const Vector logits = model.Logits(ex.input);
    const int answer = Argmax(logits);
    const double credit = ex.credit[answer];
    credits.push_back(credit);
    report.overall_accuracy += credit;
    report.mean_top1_logit += logits[answer];
    std::set<std::string> types(ex.question_types.begin(), ex.question_types.end());
    for (const auto& t : types) {
      Tally& tally = tallies[t];
      ++tally.count;
      tally.credit += credit;
      tally.logit += logits[answer];
    }
    if (predictions) predictions->push_back({ex.record_id, answer, logits[answer], credit});
  }
  report.overall_accuracy /= n;
  report.mean_top1_logit /= n;
  for (const auto& [name, t] : tallies) {
    report.per_type[name] = {t.count, t.count / n, t.credit / t.count,
                             t.logit / t.count};
  }

  for (size_t m = 0; m < options.explainers.size(); ++m) {
    const Explainer method = options.explainers[m];
    ExplanationStats stats;
    double credit_top5 = 0;
    int count_top5 = 0;
    const int keep = std::max(10, options.dump_top_k);
    for (size_t i = 0; i < examples.size(); ++i) {
      Explanation e = ExplainExample(model, examples[i], method, keep);
      stats.top1 += EntityInTopK(e.top_tokens, 1);
      stats.top5 += EntityInTopK(e.top_tokens, 5);
      stats.top10 += EntityInTopK(e.top_tokens, 10);
      if (EntityInTopK(e.top_tokens, 5)) {
        credit_top5 += credits[i];
        ++count_top5;
      }
      if (m == 0 && options.explanation_out) {
        if (e.top_tokens.size() > static_cast<size_t>(options.dump_top_k)) {
          e.top_tokens.resize(options.dump_top_k);
        }
        WriteExplanation(e, *options.explanation_out);
      }
    }
    stats.top1 /= n;
    stats.top5 /= n;
    stats.top10 /= n;
    if (count_top5 > 0) stats.accuracy_given_top5 = credit_top5 / count_top5;
    report.explanations[ExplainerName(method)] = stats;
  }
  return report;
}

std::vector<GateCase> MakeGateCases(const std::vector<Prediction>& baseline,
                                    const std::vector<Prediction>& injected) {
  if (baseline.size() != injected.size()) {
    throw Error("baseline and injected predictions cover different records");
  }
  std::vector<GateCase> cases;
  for (size_t i = 0; i < baseline.size(); ++i) {
    if (baseline[i].record_id != injected[i].record_id) {
      throw Error("prediction order differs at record '" + baseline[i].record_id + "'");
    }
    cases.push_back({baseline[i].credit, injected[i].credit, injected[i].top1_logit});
  }
  return cases;
}

std::map<std::string, double> FlattenMetrics(const EvalReport& r) {
  std::map<std::string, double> m;
  m["overall_accuracy"] = r.overall_accuracy;
  m["mean_top1_logit"] = r.mean_top1_logit;
  for (const auto& [name, t] : r.per_type) {
    m["per_type/" + name + "/accuracy"] = t.accuracy;
    m["per_type/" + name + "/mean_top1_logit"] = t.mean_top1_logit;
  }
  for (const auto& [name, e] : r.explanations) {
    m["explanations/" + name + "/top1"] = e.top1;
    m["explanations/" + name + "/top5"] = e.top5;
    m["explanations/" + name + "/top10"] = e.top10;
    if (e.accuracy_given_top5) {
      m["explanations/" + name + "/accuracy_given_top5"] = *e.accuracy_given_top5;
    }
  }
  return m;
}

std::map<std::string, RunStats> AggregateRuns(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw Error("no runs to aggregate");
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : reports) {
    for (const auto& [name, v] : FlattenMetrics(r)) values[name].push_back(v);
  }
  std::map<std::string, RunStats> out;
  for (const auto& [name, v] : values) {
    if (v.size() == reports.size()) out[name] = AggregateValues(v);
  }
  return out;
}

}  // namespace kbvqa
