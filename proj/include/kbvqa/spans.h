#ifndef KBVQA_SPANS_H_
#define KBVQA_SPANS_H_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kbvqa/embeddings.h"
#include "kbvqa/link_resolver.h"
#include "kbvqa/ner.h"

namespace kbvqa {

struct Answer {
  std::string text;
  double weight = 1.0;
};

struct MetaEntity {
  std::string name;
  std::optional<std::string> wiki_title;
};

struct QuestionRecord {
  std::string id;
  std::string question;
  std::optional<std::string> caption;
  std::string image_ref;
  std::vector<Answer> answers;
  std::vector<std::string> question_types;
  std::vector<MetaEntity> meta_entities;
  std::string split;
};

enum class TextField { kQuestion, kCaption };
enum class LinkStatus { kUnlinked, kVerified, kSearched };

struct EntitySpan {
  std::string surface;
  TextField field = TextField::kQuestion;
  size_t char_start = 0;
  size_t char_end = 0;
  std::string ner_label;
  LinkStatus link_status = LinkStatus::kUnlinked;
  std::optional<std::string> wiki_title;

  bool operator==(const EntitySpan&) const = default;
};

enum class SpanMethod { kNerPer, kNerAgro, kMeta, kOk13k, kOk4k, kOk2_5k };
enum class LinkMode { kAsIs, kLinks, kNoisy };
enum class OkLevel { kOk13k, kOk4k, kOk2_5k };

const char* SpanMethodName(SpanMethod method);  // "nerper", ...
SpanMethod ParseSpanMethod(std::string_view name);
const char* LinkModeName(LinkMode mode);  // "as_is", "links", "noisy"
LinkMode ParseLinkMode(std::string_view name);
const char* TextFieldName(TextField field);
const char* LinkStatusName(LinkStatus status);

// Question, one space, then the caption when present. Throws on an empty
// question.
std::string ComposeText(const QuestionRecord& record);

// Separator placed between META names prepended to a caption and the
// original caption.
inline constexpr std::string_view kMetaSeparator = "; ";

struct SpanExtraction {
  std::string composed_text;
  std::vector<EntitySpan> spans;
};

// Runs one extraction pipeline over the composed text. NERPER needs `ner`;
// NERAGRO needs both `ner` and `chunker`; META needs neither and may rewrite
// the caption (returned in composed_text).
SpanExtraction ExtractSpans(const QuestionRecord& record, SpanMethod method,
                            const NerProvider* ner,
                            const NounPhraseChunker* chunker);

// Keeps the longest spans; ties go to the earlier start, then to earlier
// input position. Output is sorted by start.
std::vector<EntitySpan> ResolveOverlaps(std::vector<EntitySpan> spans);

struct LinkResolution {
  std::vector<EntitySpan> spans;
  int searches = 0;
  int transport_failures = 0;
};

// AS_IS passes spans through; LINKS keeps spans with a title or whose
// titlecased surface is an ENTITY key (VERIFIED); NOISY also keeps the rest,
// searching `resolver` for them (SEARCHED on a hit, UNLINKED otherwise).
LinkResolution ResolveLinks(const std::vector<EntitySpan>& spans,
                            LinkMode mode, LinkResolver* resolver,
                            const EmbeddingTable& entity_table);

// Semi-automated OK4K rules, loaded from a JSON file:
// {"stopwords": [...], "generic_nouns": [...], "generic_labels": [...],
//  "min_length": N}
struct OkRuleset {
  std::set<std::string> stopwords;
  std::set<std::string> generic_nouns;
  std::set<std::string> generic_labels;
  size_t min_length = 0;

  static OkRuleset Load(const std::filesystem::path& path);
  // Name of the first rule that rejects the span, or nullopt.
  std::optional<std::string> Rejects(const EntitySpan& span) const;
};

// One lowercased surface per line.
std::set<std::string> LoadExclusionList(const std::filesystem::path& path);

std::vector<EntitySpan> FilterOkvqa(const std::vector<EntitySpan>& spans,
                                    OkLevel level, const OkRuleset& ruleset,
                                    const std::set<std::string>* exclusion);

struct RecordSpans {
  std::string record_id;
  std::string composed_text;
  std::vector<EntitySpan> spans;
};

struct SpanSet {
  SpanMethod method = SpanMethod::kMeta;
  LinkMode link_mode = LinkMode::kAsIs;
  std::vector<RecordSpans> records;  // dataset order

  const RecordSpans* Find(std::string_view record_id) const;
};

struct SpanBuildOptions {
  SpanMethod method = SpanMethod::kMeta;
  LinkMode link_mode = LinkMode::kAsIs;
  const NerProvider* ner = nullptr;
  const NounPhraseChunker* chunker = nullptr;
  LinkResolver* resolver = nullptr;
  const OkRuleset* ruleset = nullptr;
  const std::set<std::string>* exclusion = nullptr;
};

struct SpanBuildResult {
  SpanSet spanset;
  int transport_failures = 0;
  int searches = 0;
};

// Extraction, optional OKVQA filtering, then link resolution, per record.
SpanBuildResult BuildSpanSet(const std::vector<QuestionRecord>& records,
                             const EmbeddingTable& entity_table,
                             const SpanBuildOptions& options);

struct SpanStats {
  double ents_per_q = 0;
  double eberts_per_q = 0;
  double frac_q_with_eberts = 0;

  bool operator==(const SpanStats&) const = default;
};

// A span is injectable when its wiki title or titlecased surface is an
// ENTITY key.
bool SpanResolvesInTable(const EntitySpan& span, const EmbeddingTable& table);

SpanStats ComputeSpanStats(const SpanSet& spanset,
                           const EmbeddingTable& entity_table,
                           size_t num_records);

// JSONL, one record per line:
// {record_id, method, link_mode, composed_text, spans: [...]}
void WriteSpanSet(const SpanSet& spanset, std::ostream& out);
SpanSet ReadSpanSet(std::istream& in);
void SaveSpanSet(const SpanSet& spanset, const std::filesystem::path& path);
SpanSet LoadSpanSet(const std::filesystem::path& path);

// An empty SpanSet over the records (the no-injection baseline).
SpanSet EmptySpanSet(const std::vector<QuestionRecord>& records);

}  // namespace kbvqa

#endif  // KBVQA_SPANS_H_
