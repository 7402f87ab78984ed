// Command-line front end: one subcommand per pipeline stage. Every
// subcommand writes its artifacts and a manifest.json under --out.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kbvqa/injector.h"
#include "kbvqa/manifest.h"
#include "kbvqa/pipeline.h"
#include "kbvqa/report.h"
#include "kbvqa/synthetic.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kbvqa;

namespace {

struct Flags {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out;
  std::string method;
  std::string link_mode;
  std::string explainer;
  std::string format;
  std::string checkpoint;
  bool baseline = false;
  std::vector<std::string> inputs;
  std::vector<double> fractions = {0.1, 0.25, 0.5};
  int top_k = 10;
};

RunConfig LoadConfig(const Flags& f) {
  if (f.config.empty()) throw Error("--config is required");
  RunConfig c = RunConfig::Load(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out = f.out;
  if (!f.method.empty()) c.method = ParseSpanMethod(f.method);
  if (!f.link_mode.empty()) c.link_mode = ParseLinkMode(f.link_mode);
  if (!f.explainer.empty()) c.explainers = {ParseExplainer(f.explainer)};
  if (f.baseline) c.inject = false;
  fs::create_directories(c.out);
  return c;
}

std::vector<ReportFormat> Formats(const Flags& f) {
  if (!f.format.empty()) return {ParseReportFormat(f.format)};
  return {ReportFormat::kMarkdown, ReportFormat::kCsv, ReportFormat::kJson};
}

void WriteJson(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Manifest StartManifest(const std::string& command, const RunConfig& c) {
  Manifest m;
  m.command = command;
  m.config = c.ToJson();
  m.seeds = {{"model_init", c.seed}, {"train_order", c.seed + 1}};
  m.inputs = c.InputPaths();
  return m;
}

// Resources plus, when injecting, the alignment and the span set.
struct Context {
  RunConfig config;
  Resources res;
  std::optional<SpanSet> spans;
};

Context Prepare(const Flags& f) {
  Context ctx;
  ctx.config = LoadConfig(f);
  ctx.res = LoadResources(ctx.config);
  if (ctx.config.inject) {
    ctx.res.alignment = ResolveAlignment(ctx.config, ctx.res);
    SpanBuildResult built = ResolveSpans(ctx.config, ctx.res);
    if (built.transport_failures > 0) {
      std::cerr << "warning: " << built.transport_failures
                << " link searches failed; those spans stay unlinked\n";
    }
    ctx.spans = std::move(built.spanset);
  }
  return ctx;
}

const SpanSet* Spans(const Context& ctx) {
  return ctx.spans ? &*ctx.spans : nullptr;
}

int CmdSynth(const Flags& f) {
  SyntheticConfig sc;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw Error("cannot open " + f.config);
    sc = SyntheticConfig::FromJson(json::parse(in));
  }
  if (f.seed) sc.seed = *f.seed;
  const fs::path out = f.out.empty() ? fs::path("synthetic") : fs::path(f.out);
  const SyntheticBenchmark bench = GenerateSyntheticDataset(sc);
  SaveBenchmark(bench, out);
  const BenchmarkFiles files = BenchmarkFiles::In(out);

  json run;
  run["dataset"] = files.dataset.filename().string();
  run["wiki_table"] = files.wiki.filename().string();
  run["wordpiece_table"] = files.wordpieces.filename().string();
  run["region_index"] = files.region_index.filename().string();
  run["region_data"] = files.region_data.filename().string();
  run["method"] = "meta";
  run["link_mode"] = "as_is";
  run["max_len"] = 16;
  ModelConfig model;
  model.hidden_dim = 32;
  model.num_heads = 2;
  model.ffn_dim = 64;
  model.lang_layers = model.vis_layers = model.cross_layers = 1;
  model.num_regions = sc.num_regions;
  model.dropout = 0.0;
  run["model"] = model.ToJson();
  TrainConfig train;
  train.epochs = 4;
  train.lr = 3e-3;
  run["train"] = train.ToJson();
  run["seed"] = sc.seed;
  run["out"] = "run";
  WriteJson(run, out / "run.json");

  Manifest m;
  m.command = "synth";
  m.config = sc.ToJson();
  m.seeds = {{"generator", sc.seed}};
  m.outputs = {files.dataset, files.wiki, files.wordpieces, files.region_index,
               files.region_data, files.meta_spans, files.config, out / "run.json"};
  m.Write(out / "manifest.json");
  std::cout << "wrote " << bench.records.size() << " records to " << out.string()
            << " (checksum " << HexChecksum(BenchmarkChecksum(bench)) << ")\n";
  return 0;
}

int CmdAlign(const Flags& f) {
  RunConfig c = LoadConfig(f);
  Resources res = LoadResources(c);
  const AlignmentMap map =
      LearnAlignment(res.wiki, res.wordpieces, SharedVocabulary(res.wiki, res.wordpieces));
  const fs::path path = c.out / "alignment.txt";
  map.Save(path);
  Manifest m = StartManifest("align", c);
  m.outputs = {path};
  m.Write(c.out / "manifest.json");
  std::cout << "alignment " << map.target_dim() << "x" << map.source_dim() << " over "
            << map.fit().num_shared_keys << " shared keys, residual "
            << map.fit().sum_squared_residual << "\n";
  return 0;
}

int CmdSpans(const Flags& f) {
  RunConfig c = LoadConfig(f);
  c.spanset.reset();
  Resources res = LoadResources(c);
  const SpanBuildResult built = ResolveSpans(c, res);
  const fs::path spans_path = c.out / "spans.jsonl";
  SaveSpanSet(built.spanset, spans_path);
  const SpanStats stats = ComputeSpanStats(built.spanset, res.wiki, res.records.size());
  json j = {{"method", SpanMethodName(c.method)},
            {"link_mode", LinkModeName(c.link_mode)},
            {"ents_per_q", stats.ents_per_q},
            {"eberts_per_q", stats.eberts_per_q},
            {"frac_q_with_eberts", stats.frac_q_with_eberts},
            {"searches", built.searches},
            {"transport_failures", built.transport_failures}};
  WriteJson(j, c.out / "span_stats.json");
  Manifest m = StartManifest("spans", c);
  m.outputs = {spans_path, c.out / "span_stats.json"};
  m.Write(c.out / "manifest.json");
  std::cout << j.dump() << "\n";
  return 0;
}

int CmdInject(const Flags& f) {
  Context ctx = Prepare(f);
  const ExampleResources er = MakeExampleResources(ctx.config, ctx.res);
  const fs::path path = ctx.config.out / "tokens.jsonl";
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  InjectionStats stats;
  for (const auto& record : ctx.res.records) {
    InjectedSequence seq;
    if (const RecordSpans* s = ctx.spans ? ctx.spans->Find(record.id) : nullptr) {
      seq = Inject(s->composed_text, s->spans, *ctx.res.alignment, ctx.res.wiki,
                   ctx.res.wordpieces, er.max_len, &stats);
    } else {
      seq = TokenizeBaseline(ComposeText(record), ctx.res.wordpieces, er.max_len);
    }
    std::ostringstream dump;
    WriteTokenDump(seq, dump);
    json tokens = json::array();
    std::istringstream lines(dump.str());
    for (std::string line; std::getline(lines, line);) tokens.push_back(json::parse(line));
    out << json{{"record_id", record.id}, {"truncated", seq.truncated}, {"tokens", tokens}}.dump()
        << '\n';
  }
  out.close();
  Manifest m = StartManifest("inject", ctx.config);
  m.outputs = {path};
  m.Write(ctx.config.out / "manifest.json");
  std::cout << "injected " << stats.injected << ", missed " << stats.missed
            << ", truncated away " << stats.truncated_away << "\n";
  return 0;
}

int CmdTrain(const Flags& f) {
  Context ctx = Prepare(f);
  TrainedModel trained = TrainModel(ctx.config, ctx.res, Spans(ctx));
  const fs::path ckpt = ctx.config.out / "checkpoint";
  SaveCheckpoint(trained.model, trained.vocab.answers(), ckpt);
  json epochs = json::array();
  for (const auto& e : trained.metrics.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"train_accuracy", e.train_accuracy}});
    std::cout << "epoch " << e.epoch << " loss " << e.loss << " train acc "
              << e.train_accuracy << "\n";
  }
  WriteJson({{"epochs", epochs}, {"trained_examples", trained.metrics.trained_examples}},
            ctx.config.out / "training.json");
  Manifest m = StartManifest("train", ctx.config);
  m.outputs = {ckpt, ctx.config.out / "training.json"};
  m.Write(ctx.config.out / "manifest.json");
  return 0;
}

struct Loaded {
  Context ctx;
  LoadedCheckpoint checkpoint;
  std::vector<Example> examples;
  fs::path checkpoint_path;
};

Loaded LoadForEval(const Flags& f) {
  Context ctx = Prepare(f);
  const fs::path ckpt =
      f.checkpoint.empty() ? ctx.config.out / "checkpoint" : fs::path(f.checkpoint);
  LoadedCheckpoint loaded = LoadCheckpoint(ckpt);
  const auto records = SelectSplit(ctx.res.records, ctx.config.eval_split);
  auto examples = BuildExamples(records, Spans(ctx), MakeExampleResources(ctx.config, ctx.res),
                                AnswerVocab(loaded.answers));
  return {std::move(ctx), std::move(loaded), std::move(examples), ckpt};
}

int CmdEval(const Flags& f) {
  Loaded l = LoadForEval(f);
  const RunConfig& c = l.ctx.config;
  const fs::path expl_path = c.out / "explanations.jsonl";
  std::ofstream expl(expl_path);
  EvalOptions options;
  if (l.ctx.spans) options.explainers = c.explainers;
  options.explanation_out = &expl;
  options.dump_top_k = f.top_k;
  EvalReport report = Evaluate(l.checkpoint.model, l.examples, options);
  expl.close();
  report.run.model = l.ctx.spans ? SpanMethodName(c.method) : "baseline";
  report.run.type = l.ctx.spans ? LinkModeName(c.link_mode) : "-";
  report.run.split = c.eval_split;
  report.run.seed = c.seed;
  report.run.model_checksum = HexChecksum(l.checkpoint.model.Checksum());
  if (l.ctx.spans) {
    report.span_stats = SplitSpanStats(*l.ctx.spans,
                                       SelectSplit(l.ctx.res.records, c.eval_split),
                                       l.ctx.res.wiki);
  }
  ReportBundle bundle{{report}, {}};
  Manifest m = StartManifest("eval", c);
  m.inputs.push_back(l.checkpoint_path);
  for (ReportFormat fmt : Formats(f)) m.outputs.push_back(EmitReport(bundle, fmt, c.out));
  m.outputs.push_back(expl_path);
  m.Write(c.out / "manifest.json");
  std::cout << "accuracy " << report.overall_accuracy << " on " << report.num_questions
            << " questions\n";
  return 0;
}

int CmdExplain(const Flags& f) {
  Loaded l = LoadForEval(f);
  const RunConfig& c = l.ctx.config;
  const Explainer method = c.explainers.empty() ? Explainer::kBmgae : c.explainers.front();
  const fs::path path = c.out / "explanations.jsonl";
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& ex : l.examples) {
    WriteExplanation(ExplainExample(l.checkpoint.model, ex, method, f.top_k), out);
  }
  out.close();
  Manifest m = StartManifest("explain", c);
  m.inputs.push_back(l.checkpoint_path);
  m.outputs = {path};
  m.Write(c.out / "manifest.json");
  return 0;
}

int CmdPerturb(const Flags& f) {
  Loaded l = LoadForEval(f);
  const RunConfig& c = l.ctx.config;
  const Vector* unk = l.ctx.res.wordpieces.Find(Namespace::kWordpiece, kUnknownToken);
  if (!unk) throw Error("wordpiece table has no [UNK] row");
  json curves = json::object();
  for (Explainer e : {Explainer::kBmgae, Explainer::kTrf, Explainer::kRandom}) {
    curves[ExplainerName(e)] =
        PerturbationTest(l.checkpoint.model, l.examples, e, f.fractions, *unk, c.seed);
  }
  json j = {{"fractions", f.fractions},
            {"unmasked_accuracy", Accuracy(l.checkpoint.model, l.examples)},
            {"fully_masked_accuracy", FullyMaskedAccuracy(l.checkpoint.model, l.examples, *unk)},
            {"accuracy", curves}};
  const fs::path path = c.out / "perturbation.json";
  WriteJson(j, path);
  Manifest m = StartManifest("perturb", c);
  m.inputs.push_back(l.checkpoint_path);
  m.outputs = {path};
  m.Write(c.out / "manifest.json");
  std::cout << j.dump() << "\n";
  return 0;
}

int CmdReport(const Flags& f) {
  if (f.inputs.empty()) throw Error("report needs --input report.json files");
  ReportBundle bundle;
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& path : f.inputs) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::stringstream text;
    text << in.rdbuf();
    for (auto& r : ParseReportJson(text.str()).models) {
      const auto key = std::make_pair(r.run.model, r.run.type);
      if (groups.find(key) == groups.end()) order.push_back(key);
      groups[key].push_back(r.overall_accuracy);
      bundle.models.push_back(std::move(r));
    }
  }
  for (const auto& key : order) {
    bundle.runs.push_back(SummarizeRuns(key.first, key.second, groups[key]));
  }
  const fs::path out = f.out.empty() ? fs::path(".") : fs::path(f.out);
  Manifest m;
  m.command = "report";
  for (const auto& p : f.inputs) m.inputs.emplace_back(p);
  for (ReportFormat fmt : Formats(f)) m.outputs.push_back(EmitReport(bundle, fmt, out));
  m.Write(out / "manifest.json");
  return 0;
}

int CmdRun(const Flags& f) {
  Context ctx = Prepare(f);
  const RunConfig& c = ctx.config;
  const fs::path expl_path = c.out / "explanations.jsonl";
  std::ofstream expl(expl_path);
  TrainedModel trained = TrainModel(c, ctx.res, Spans(ctx));
  PipelineResult result = EvaluateTrained(c, ctx.res, Spans(ctx), trained, &expl);
  expl.close();
  SaveCheckpoint(trained.model, trained.vocab.answers(), c.out / "checkpoint");
  ReportBundle bundle{{result.report}, {}};
  Manifest m = StartManifest("run", c);
  m.outputs.push_back(c.out / "checkpoint");
  for (ReportFormat fmt : Formats(f)) m.outputs.push_back(EmitReport(bundle, fmt, c.out));
  m.outputs.push_back(expl_path);
  m.Write(c.out / "manifest.json");
  std::cout << "accuracy " << result.report.overall_accuracy << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-injected visual question answering toolkit"};
  app.require_subcommand(1);
  Flags flags;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", flags.config, "Run config JSON");
    cmd->add_option("--seed", flags.seed, "Seed override");
    cmd->add_option("--out", flags.out, "Output directory");
    cmd->add_option("--method", flags.method,
                    "Span method: nerper, neragro, meta, ok13k, ok4k, ok2_5k");
    cmd->add_option("--link-mode", flags.link_mode, "Link mode: as_is, links, noisy");
    cmd->add_option("--explainer", flags.explainer, "Explainer: bmgae, trf, random");
    cmd->add_option("--format", flags.format, "Report format: md, csv, json");
    cmd->add_flag("--baseline", flags.baseline, "Disable entity injection");
    cmd->add_option("--checkpoint", flags.checkpoint, "Checkpoint path");
    cmd->add_option("--top-k", flags.top_k, "Tokens kept per explanation");
  };

  std::map<std::string, int (*)(const Flags&)> handlers = {
      {"synth", CmdSynth},     {"align", CmdAlign}, {"spans", CmdSpans},
      {"inject", CmdInject},   {"train", CmdTrain}, {"eval", CmdEval},
      {"explain", CmdExplain}, {"perturb", CmdPerturb}, {"report", CmdReport},
      {"run", CmdRun}};
  const std::map<std::string, std::string> help = {
      {"synth", "Generate the synthetic entity benchmark"},
      {"align", "Fit the entity-to-wordpiece alignment map"},
      {"spans", "Extract and link entity spans"},
      {"inject", "Dump injected token sequences"},
      {"train", "Fine-tune a model and save a checkpoint"},
      {"eval", "Evaluate a checkpoint and emit reports"},
      {"explain", "Dump per-question explanations"},
      {"perturb", "Run the masking perturbation test"},
      {"report", "Combine report.json files into multi-run tables"},
      {"run", "Train, evaluate and report in one go"}};
  for (const auto& [name, text] : help) {
    CLI::App* cmd = app.add_subcommand(name, text);
    common(cmd);
    if (name == "report") {
      cmd->add_option("--input", flags.inputs, "report.json files")->expected(1, -1);
    }
    if (name == "perturb") cmd->add_option("--fractions", flags.fractions);
  }
  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto& [name, handler] : handlers) {
      if (app.got_subcommand(name)) return handler(flags);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
