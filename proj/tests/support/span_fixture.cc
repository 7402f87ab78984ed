#include "span_fixture.h"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "kbvqa/dataset.h"
#include "kbvqa/link_resolver.h"
#include "kbvqa/ner.h"

namespace kbvqa::testing {
namespace {

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string ComboName(const SpanCombo& c) {
  return std::string(SpanMethodName(c.method)) + "_" + LinkModeName(c.link_mode);
}

// First differing line, for a readable failure message.
std::string FirstDiff(const std::string& got, const std::string& want) {
  std::istringstream a(got), b(want);
  std::string la, lb;
  for (int line = 1;; ++line) {
    const bool ha = static_cast<bool>(std::getline(a, la));
    const bool hb = static_cast<bool>(std::getline(b, lb));
    if (!ha && !hb) return "trailing bytes differ";
    if (ha != hb || la != lb) {
      return "line " + std::to_string(line) + ": got '" + (ha ? la : "<eof>") +
             "' want '" + (hb ? lb : "<eof>") + "'";
    }
  }
}

}  // namespace

const std::vector<SpanCombo>& FixtureCombos() {
  using M = SpanMethod;
  using L = LinkMode;
  static const std::vector<SpanCombo> kCombos = {
      {M::kNerPer, L::kAsIs}, {M::kNerAgro, L::kAsIs}, {M::kNerAgro, L::kLinks},
      {M::kNerAgro, L::kNoisy}, {M::kMeta, L::kAsIs},   {M::kMeta, L::kLinks},
      {M::kMeta, L::kNoisy},  {M::kOk13k, L::kAsIs},   {M::kOk4k, L::kAsIs},
      {M::kOk4k, L::kLinks},  {M::kOk2_5k, L::kAsIs},  {M::kOk2_5k, L::kNoisy},
  };
  return kCombos;
}

std::string FormatStatsLine(const SpanCombo& combo, const SpanStats& stats) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s\t%s\t%.4f\t%.4f\t%.4f\n",
                SpanMethodName(combo.method), LinkModeName(combo.link_mode),
                stats.ents_per_q, stats.eberts_per_q, stats.frac_q_with_eberts);
  return buf;
}

bool SpanSubset(const SpanSet& sub, const SpanSet& super) {
  for (const auto& record : sub.records) {
    const RecordSpans* other = super.Find(record.record_id);
    if (other == nullptr) return false;
    for (const auto& span : record.spans) {
      bool found = false;
      for (const auto& candidate : other->spans) {
        found |= candidate.surface == span.surface &&
                 candidate.char_start == span.char_start &&
                 candidate.char_end == span.char_end;
      }
      if (!found) return false;
    }
  }
  return true;
}

SpanFixtureResult RunSpanFixture(const std::filesystem::path& dir) {
  SpanFixtureResult result;
  const auto records = LoadDataset(dir / "dataset.jsonl");
  result.records = static_cast<int>(records.size());
  const GazetteerNer ner = GazetteerNer::Load(dir / "gazetteer.tsv");
  const LexiconChunker chunker;
  const EmbeddingTable entities =
      LoadTable(dir / "entities.txt", NamespacePolicy::Words());
  const OkRuleset rules = OkRuleset::Load(dir / "ok_rules.json");
  const auto exclusion = LoadExclusionList(dir / "exclusion.txt");

  std::map<std::string, SpanSet> built;
  std::string stats;
  for (const auto& combo : FixtureCombos()) {
    StubLinkResolver resolver = StubLinkResolver::Load(dir / "stub.jsonl");
    SpanBuildOptions options;
    options.method = combo.method;
    options.link_mode = combo.link_mode;
    options.ner = &ner;
    options.chunker = &chunker;
    options.resolver = &resolver;
    options.ruleset = &rules;
    options.exclusion = &exclusion;
    SpanSet spanset = BuildSpanSet(records, entities, options).spanset;

    std::ostringstream out;
    WriteSpanSet(spanset, out);
    const std::string name = ComboName(combo);
    const std::string want = ReadFile(dir / "golden" / (name + ".jsonl"));
    if (out.str() != want) {
      result.failures.push_back(name + ": " + FirstDiff(out.str(), want));
    }
    stats += FormatStatsLine(
        combo, ComputeSpanStats(spanset, entities, records.size()));
    built[name] = std::move(spanset);
    ++result.combos_checked;
  }
  const std::string want_stats = ReadFile(dir / "golden" / "stats.tsv");
  if (stats != want_stats) {
    result.failures.push_back("stats: " + FirstDiff(stats, want_stats));
  }

  const std::pair<const char*, const char*> kSubsets[] = {
      {"neragro_links", "neragro_as_is"}, {"meta_links", "meta_as_is"},
      {"ok4k_links", "ok4k_as_is"},       {"ok4k_as_is", "ok13k_as_is"},
      {"ok2_5k_as_is", "ok4k_as_is"},     {"ok2_5k_as_is", "ok13k_as_is"},
  };
  for (const auto& [sub, super] : kSubsets) {
    if (!SpanSubset(built.at(sub), built.at(super))) {
      result.failures.push_back(std::string(sub) + " not a subset of " + super);
    }
  }
  return result;
}

}  // namespace kbvqa::testing
