#include "kbvqa/spans.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <span>

#include "json.hpp"
#include "kbvqa/text.h"

namespace kbvqa {

using nlohmann::ordered_json;

namespace {

struct NameValue {
  std::string_view name;
  int value;
};

constexpr NameValue kMethods[] = {
    {"nerper", static_cast<int>(SpanMethod::kNerPer)},
    {"neragro", static_cast<int>(SpanMethod::kNerAgro)},
    {"meta", static_cast<int>(SpanMethod::kMeta)},
    {"ok13k", static_cast<int>(SpanMethod::kOk13k)},
    {"ok4k", static_cast<int>(SpanMethod::kOk4k)},
    {"ok2_5k", static_cast<int>(SpanMethod::kOk2_5k)},
};

constexpr NameValue kLinkModes[] = {
    {"as_is", static_cast<int>(LinkMode::kAsIs)},
    {"links", static_cast<int>(LinkMode::kLinks)},
    {"noisy", static_cast<int>(LinkMode::kNoisy)},
};

bool IsBoundary(std::string_view text, size_t pos) {
  if (pos == 0 || pos >= text.size()) return true;
  const auto a = static_cast<unsigned char>(text[pos - 1]);
  const auto b = static_cast<unsigned char>(text[pos]);
  return !(std::isalnum(a) && std::isalnum(b));
}

// Word-bounded, non-overlapping occurrences of `needle` in `haystack`.
std::vector<size_t> FindOccurrences(std::string_view haystack,
                                    std::string_view needle) {
  std::vector<size_t> hits;
  if (needle.empty()) return hits;
  size_t pos = haystack.find(needle);
  while (pos != std::string_view::npos) {
    const size_t end = pos + needle.size();
    if (IsBoundary(haystack, pos) && IsBoundary(haystack, end)) {
      hits.push_back(pos);
      pos = haystack.find(needle, end);
    } else {
      pos = haystack.find(needle, pos + 1);
    }
  }
  return hits;
}

EntitySpan MakeSpan(std::string_view text, size_t question_len, size_t start,
                    size_t end, std::string label) {
  EntitySpan span;
  span.surface = std::string(text.substr(start, end - start));
  span.field = start < question_len ? TextField::kQuestion : TextField::kCaption;
  span.char_start = start;
  span.char_end = end;
  span.ner_label = std::move(label);
  return span;
}

SpanExtraction ExtractMeta(const QuestionRecord& record) {
  SpanExtraction out;
  std::vector<EntitySpan> spans;
  std::vector<const MetaEntity*> missing;
  for (const auto& entity : record.meta_entities) {
    const auto hits = FindOccurrences(record.question, entity.name);
    if (hits.empty()) {
      missing.push_back(&entity);
      continue;
    }
    for (size_t start : hits) {
      auto span = MakeSpan(record.question, record.question.size(), start,
                           start + entity.name.size(), "META");
      span.wiki_title = entity.wiki_title;
      spans.push_back(std::move(span));
    }
  }

  std::optional<std::string> caption = record.caption;
  std::vector<std::pair<size_t, const MetaEntity*>> prepended;
  if (!missing.empty()) {
    std::string prefix;
    for (const MetaEntity* entity : missing) {
      if (!prefix.empty()) prefix += kMetaSeparator;
      prepended.emplace_back(prefix.size(), entity);
      prefix += entity->name;
    }
    caption = caption ? prefix + std::string(kMetaSeparator) + *caption : prefix;
  }

  out.composed_text = record.question;
  if (caption) {
    out.composed_text += ' ';
    out.composed_text += *caption;
  }
  const size_t caption_start = record.question.size() + 1;
  for (const auto& [offset, entity] : prepended) {
    const size_t start = caption_start + offset;
    auto span = MakeSpan(out.composed_text, record.question.size(), start,
                         start + entity->name.size(), "META");
    span.wiki_title = entity->wiki_title;
    spans.push_back(std::move(span));
  }
  out.spans = ResolveOverlaps(std::move(spans));
  return out;
}

int ParseNamed(std::string_view name, std::span<const NameValue> table,
               const char* what) {
  for (const auto& entry : table) {
    if (entry.name == name) return entry.value;
  }
  throw Error(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

const char* NameOf(int value, std::span<const NameValue> table) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name.data();
  }
  return "?";
}

}  // namespace

const char* SpanMethodName(SpanMethod method) {
  return NameOf(static_cast<int>(method), kMethods);
}

SpanMethod ParseSpanMethod(std::string_view name) {
  return static_cast<SpanMethod>(ParseNamed(name, kMethods, "span method"));
}

const char* LinkModeName(LinkMode mode) {
  return NameOf(static_cast<int>(mode), kLinkModes);
}

LinkMode ParseLinkMode(std::string_view name) {
  return static_cast<LinkMode>(ParseNamed(name, kLinkModes, "link mode"));
}

const char* TextFieldName(TextField field) {
  return field == TextField::kQuestion ? "QUESTION" : "CAPTION";
}

const char* LinkStatusName(LinkStatus status) {
  switch (status) {
    case LinkStatus::kUnlinked:
      return "UNLINKED";
    case LinkStatus::kVerified:
      return "VERIFIED";
    case LinkStatus::kSearched:
      return "SEARCHED";
  }
  return "?";
}

namespace {

TextField ParseTextField(std::string_view name) {
  if (name == "QUESTION") return TextField::kQuestion;
  if (name == "CAPTION") return TextField::kCaption;
  throw Error("unknown span field '" + std::string(name) + "'");
}

LinkStatus ParseLinkStatus(std::string_view name) {
  if (name == "UNLINKED") return LinkStatus::kUnlinked;
  if (name == "VERIFIED") return LinkStatus::kVerified;
  if (name == "SEARCHED") return LinkStatus::kSearched;
  throw Error("unknown link status '" + std::string(name) + "'");
}

}  // namespace

std::string ComposeText(const QuestionRecord& record) {
  if (record.question.empty()) throw Error("empty question");
  if (!record.caption) return record.question;
  return record.question + " " + *record.caption;
}

std::vector<EntitySpan> ResolveOverlaps(std::vector<EntitySpan> spans) {
  std::vector<size_t> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const size_t la = spans[a].char_end - spans[a].char_start;
    const size_t lb = spans[b].char_end - spans[b].char_start;
    if (la != lb) return la > lb;
    return spans[a].char_start < spans[b].char_start;
  });
  std::vector<EntitySpan> kept;
  for (size_t idx : order) {
    const auto& span = spans[idx];
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const EntitySpan& k) {
      return span.char_start < k.char_end && k.char_start < span.char_end;
    });
    if (!overlaps) kept.push_back(std::move(spans[idx]));
  }
  std::sort(kept.begin(), kept.end(), [](const EntitySpan& a, const EntitySpan& b) {
    return a.char_start < b.char_start;
  });
  return kept;
}

SpanExtraction ExtractSpans(const QuestionRecord& record, SpanMethod method,
                            const NerProvider* ner,
                            const NounPhraseChunker* chunker) {
  if (method == SpanMethod::kMeta) {
    if (record.question.empty()) throw Error("empty question");
    return ExtractMeta(record);
  }
  SpanExtraction out;
  out.composed_text = ComposeText(record);
  const size_t qlen = record.question.size();
  if (ner == nullptr) throw Error("span extraction requires an NER provider");

  std::vector<EntitySpan> spans;
  if (method == SpanMethod::kNerPer) {
    for (auto& m : ner->Tag(out.composed_text)) {
      if (m.label != kPersonLabel) continue;
      spans.push_back(MakeSpan(out.composed_text, qlen, m.start, m.end, m.label));
    }
  } else {
    // NERAGRO and the OKVQA levels share the aggressive extraction.
    if (chunker == nullptr) throw Error("span extraction requires a chunker");
    for (auto& m : ner->Tag(out.composed_text)) {
      spans.push_back(MakeSpan(out.composed_text, qlen, m.start, m.end, m.label));
    }
    for (auto& m : chunker->Chunk(out.composed_text)) {
      spans.push_back(MakeSpan(out.composed_text, qlen, m.start, m.end, m.label));
    }
  }
  out.spans = ResolveOverlaps(std::move(spans));
  return out;
}

bool SpanResolvesInTable(const EntitySpan& span, const EmbeddingTable& table) {
  if (span.wiki_title && table.Contains(Namespace::kEntity, *span.wiki_title)) {
    return true;
  }
  return table.Contains(Namespace::kEntity, TitleCase(span.surface));
}

LinkResolution ResolveLinks(const std::vector<EntitySpan>& spans,
                            LinkMode mode, LinkResolver* resolver,
                            const EmbeddingTable& entity_table) {
  LinkResolution result;
  if (mode == LinkMode::kAsIs) {
    result.spans = spans;
    return result;
  }
  if (mode == LinkMode::kNoisy && resolver == nullptr) {
    throw Error("noisy link mode requires a resolver");
  }
  for (const auto& span : spans) {
    EntitySpan out = span;
    const std::string key = TitleCase(span.surface);
    if (span.wiki_title || entity_table.Contains(Namespace::kEntity, key)) {
      out.link_status = LinkStatus::kVerified;
      if (!out.wiki_title) out.wiki_title = key;
      result.spans.push_back(std::move(out));
      continue;
    }
    if (mode == LinkMode::kLinks) continue;
    ++result.searches;
    try {
      if (auto title = resolver->Search(span.surface)) {
        out.link_status = LinkStatus::kSearched;
        out.wiki_title = std::move(title);
      }
    } catch (const TransportError&) {
      ++result.transport_failures;
    }
    result.spans.push_back(std::move(out));
  }
  return result;
}

OkRuleset OkRuleset::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ruleset " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    OkRuleset rules;
    auto lower_set = [](const nlohmann::json& list) {
      std::set<std::string> out;
      for (const auto& v : list) out.insert(AsciiLower(v.get<std::string>()));
      return out;
    };
    rules.stopwords = lower_set(doc.value("stopwords", nlohmann::json::array()));
    rules.generic_nouns =
        lower_set(doc.value("generic_nouns", nlohmann::json::array()));
    for (const auto& v : doc.value("generic_labels", nlohmann::json::array())) {
      rules.generic_labels.insert(v.get<std::string>());
    }
    rules.min_length = doc.value("min_length", size_t{0});
    return rules;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::optional<std::string> OkRuleset::Rejects(const EntitySpan& span) const {
  if (span.surface.size() < min_length) return "min_length";
  if (generic_labels.count(span.ner_label) > 0) return "generic_label";
  std::vector<std::string> content;
  for (const auto& word : SplitWords(span.surface)) {
    std::string lower = AsciiLower(word.text);
    if (stopwords.count(lower) == 0) content.push_back(std::move(lower));
  }
  if (content.empty()) return "stopword_only";
  if (content.size() == 1 && generic_nouns.count(content[0]) > 0) {
    return "generic_noun";
  }
  return std::nullopt;
}

std::set<std::string> LoadExclusionList(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open exclusion list " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view view = TrimWhitespace(line);
    if (!view.empty()) out.insert(AsciiLower(view));
  }
  return out;
}

std::vector<EntitySpan> FilterOkvqa(const std::vector<EntitySpan>& spans,
                                    OkLevel level, const OkRuleset& ruleset,
                                    const std::set<std::string>* exclusion) {
  if (level == OkLevel::kOk13k) return spans;
  if (level == OkLevel::kOk2_5k && exclusion == nullptr) {
    throw Error("manual list required");
  }
  std::vector<EntitySpan> out;
  for (const auto& span : spans) {
    if (ruleset.Rejects(span)) continue;
    if (level == OkLevel::kOk2_5k &&
        exclusion->count(AsciiLower(span.surface)) > 0) {
      continue;
    }
    out.push_back(span);
  }
  return out;
}

const RecordSpans* SpanSet::Find(std::string_view record_id) const {
  for (const auto& r : records) {
    if (r.record_id == record_id) return &r;
  }
  return nullptr;
}

SpanBuildResult BuildSpanSet(const std::vector<QuestionRecord>& records,
                             const EmbeddingTable& entity_table,
                             const SpanBuildOptions& options) {
  SpanBuildResult result;
  result.spanset.method = options.method;
  result.spanset.link_mode = options.link_mode;
  std::optional<OkLevel> level;
  switch (options.method) {
    case SpanMethod::kOk13k:
      level = OkLevel::kOk13k;
      break;
    case SpanMethod::kOk4k:
      level = OkLevel::kOk4k;
      break;
    case SpanMethod::kOk2_5k:
      level = OkLevel::kOk2_5k;
      break;
    default:
      break;
  }
  if (level && *level != OkLevel::kOk13k && options.ruleset == nullptr) {
    throw Error("OKVQA filtering requires a ruleset");
  }
  for (const auto& record : records) {
    auto extraction = ExtractSpans(record, options.method, options.ner,
                                   options.chunker);
    if (level) {
      const OkRuleset empty;
      extraction.spans =
          FilterOkvqa(extraction.spans, *level,
                      options.ruleset ? *options.ruleset : empty,
                      options.exclusion);
    }
    auto linked = ResolveLinks(extraction.spans, options.link_mode,
                               options.resolver, entity_table);
    result.searches += linked.searches;
    result.transport_failures += linked.transport_failures;
    result.spanset.records.push_back(
        {record.id, std::move(extraction.composed_text), std::move(linked.spans)});
  }
  return result;
}

SpanStats ComputeSpanStats(const SpanSet& spanset,
                           const EmbeddingTable& entity_table,
                           size_t num_records) {
  if (num_records == 0) throw Error("span statistics need at least one record");
  size_t total = 0;
  size_t injectable = 0;
  size_t with_injection = 0;
  for (const auto& record : spanset.records) {
    total += record.spans.size();
    size_t here = 0;
    for (const auto& span : record.spans) {
      if (SpanResolvesInTable(span, entity_table)) ++here;
    }
    injectable += here;
    if (here > 0) ++with_injection;
  }
  const double n = static_cast<double>(num_records);
  return {total / n, injectable / n, with_injection / n};
}

void WriteSpanSet(const SpanSet& spanset, std::ostream& out) {
  for (const auto& record : spanset.records) {
    ordered_json row;
    row["record_id"] = record.record_id;
    row["method"] = SpanMethodName(spanset.method);
    row["link_mode"] = LinkModeName(spanset.link_mode);
    ordered_json spans = ordered_json::array();
    for (const auto& span : record.spans) {
      ordered_json s;
      s["surface"] = span.surface;
      s["field"] = TextFieldName(span.field);
      s["char_start"] = span.char_start;
      s["char_end"] = span.char_end;
      s["ner_label"] = span.ner_label;
      s["link_status"] = LinkStatusName(span.link_status);
      s["wiki_title"] = span.wiki_title ? ordered_json(*span.wiki_title) : nullptr;
      spans.push_back(std::move(s));
    }
    row["spans"] = std::move(spans);
    row["composed_text"] = record.composed_text;
    out << row.dump() << '\n';
  }
}

SpanSet ReadSpanSet(std::istream& in) {
  SpanSet spanset;
  std::string line;
  size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto row = nlohmann::json::parse(line);
      const auto method = ParseSpanMethod(row.at("method").get<std::string>());
      const auto mode = ParseLinkMode(row.at("link_mode").get<std::string>());
      if (first) {
        spanset.method = method;
        spanset.link_mode = mode;
        first = false;
      } else if (method != spanset.method || mode != spanset.link_mode) {
        throw Error("mixed method/link_mode");
      }
      RecordSpans record;
      record.record_id = row.at("record_id").get<std::string>();
      record.composed_text = row.at("composed_text").get<std::string>();
      for (const auto& s : row.at("spans")) {
        EntitySpan span;
        span.surface = s.at("surface").get<std::string>();
        span.field = ParseTextField(s.at("field").get<std::string>());
        span.char_start = s.at("char_start").get<size_t>();
        span.char_end = s.at("char_end").get<size_t>();
        span.ner_label = s.at("ner_label").get<std::string>();
        span.link_status = ParseLinkStatus(s.at("link_status").get<std::string>());
        if (s.at("wiki_title").is_string()) {
          span.wiki_title = s.at("wiki_title").get<std::string>();
        }
        if (span.char_start >= span.char_end ||
            span.char_end > record.composed_text.size() ||
            record.composed_text.compare(span.char_start,
                                         span.char_end - span.char_start,
                                         span.surface) != 0) {
          throw Error("span '" + span.surface + "' does not match text");
        }
        record.spans.push_back(std::move(span));
      }
      spanset.records.push_back(std::move(record));
    } catch (const nlohmann::json::exception& e) {
      throw Error("spanset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("spanset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return spanset;
}

void SaveSpanSet(const SpanSet& spanset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  WriteSpanSet(spanset, out);
}

SpanSet LoadSpanSet(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open spanset " + path.string());
  return ReadSpanSet(in);
}

SpanSet EmptySpanSet(const std::vector<QuestionRecord>& records) {
  SpanSet spanset;
  spanset.method = SpanMethod::kMeta;
  spanset.link_mode = LinkMode::kAsIs;
  for (const auto& record : records) {
    spanset.records.push_back({record.id, ComposeText(record), {}});
  }
  return spanset;
}

}  // namespace kbvqa
