#include "kbvqa/injector.h"

#include <algorithm>
#include <ostream>

#include "json.hpp"
#include "kbvqa/text.h"

namespace kbvqa {
namespace {

const Vector& RequireRow(const EmbeddingTable& table, std::string_view key) {
  const Vector* row = table.Find(Namespace::kWordpiece, key);
  if (row == nullptr) {
    throw Error("wordpiece table lacks special token " + std::string(key));
  }
  return *row;
}

InjectedToken MakePiece(const EmbeddingTable& table, std::string piece) {
  const Vector* row = table.Find(Namespace::kWordpiece, piece);
  if (row == nullptr) row = &RequireRow(table, kUnknownToken);
  return {std::move(piece), TokenKind::kWordpiece, *row, std::nullopt};
}

// A token or an all-or-nothing group of tokens.
struct Unit {
  std::vector<InjectedToken> tokens;
  bool injected = false;
};

InjectedSequence Assemble(std::vector<Unit> units,
                          const EmbeddingTable& wordpieces, int max_len,
                          InjectionStats* stats) {
  if (max_len < 2) throw Error("max_len must leave room for [CLS] and [SEP]");
  InjectedSequence seq;
  seq.max_len = max_len;
  seq.tokens.push_back({std::string(kStartToken), TokenKind::kSpecial,
                        RequireRow(wordpieces, kStartToken), std::nullopt});
  const Vector& end_row = RequireRow(wordpieces, kEndToken);
  size_t budget = static_cast<size_t>(max_len) - 2;
  for (auto& unit : units) {
    if (seq.truncated) {
      if (unit.injected && stats) ++stats->truncated_away;
      continue;
    }
    if (unit.tokens.size() > budget) {
      seq.truncated = true;
      if (unit.injected && stats) ++stats->truncated_away;
      continue;
    }
    budget -= unit.tokens.size();
    if (unit.injected && stats) ++stats->injected;
    for (auto& token : unit.tokens) seq.tokens.push_back(std::move(token));
  }
  seq.tokens.push_back(
      {std::string(kEndToken), TokenKind::kSpecial, end_row, std::nullopt});
  return seq;
}

void AppendPlain(std::string_view text, const WordpieceTokenizer& tokenizer,
                 const EmbeddingTable& wordpieces, std::vector<Unit>* units) {
  for (auto& piece : tokenizer.Tokenize(text)) {
    Unit unit;
    unit.tokens.push_back(MakePiece(wordpieces, std::move(piece)));
    units->push_back(std::move(unit));
  }
}

}  // namespace

const char* TokenKindName(TokenKind kind) {
  switch (kind) {
    case TokenKind::kSpecial:
      return "SPECIAL";
    case TokenKind::kWordpiece:
      return "WORDPIECE";
    case TokenKind::kSeparator:
      return "SEPARATOR";
    case TokenKind::kEntity:
      return "ENTITY";
  }
  return "?";
}

int InjectedSequence::CountKind(TokenKind kind) const {
  return static_cast<int>(std::count_if(
      tokens.begin(), tokens.end(),
      [kind](const InjectedToken& t) { return t.kind == kind; }));
}

std::string EntityLookupKey(std::string_view surface) {
  return TitleCase(surface);
}

WordpieceTokenizer::WordpieceTokenizer(const EmbeddingTable& vocab,
                                       size_t max_chars_per_word)
    : vocab_(vocab), max_chars_per_word_(max_chars_per_word) {}

std::vector<std::string> WordpieceTokenizer::TokenizeWord(
    const std::string& word) const {
  if (word.size() > max_chars_per_word_) return {std::string(kUnknownToken)};
  std::vector<std::string> pieces;
  size_t start = 0;
  std::string candidate;
  while (start < word.size()) {
    size_t end = word.size();
    bool found = false;
    while (start < end) {
      candidate.clear();
      if (start > 0) candidate = kContinuationPrefix;
      candidate.append(word, start, end - start);
      if (vocab_.Contains(Namespace::kWordpiece, candidate)) {
        found = true;
        break;
      }
      --end;
    }
    if (!found) return {std::string(kUnknownToken)};
    pieces.push_back(candidate);
    start = end;
  }
  return pieces;
}

std::vector<std::string> WordpieceTokenizer::Tokenize(
    std::string_view text) const {
  std::vector<std::string> out;
  for (const auto& word : BasicTokenize(text)) {
    for (auto& piece : TokenizeWord(word)) out.push_back(std::move(piece));
  }
  return out;
}

InjectedSequence TokenizeBaseline(std::string_view text,
                                  const EmbeddingTable& wordpieces,
                                  int max_len) {
  RequireRow(wordpieces, kUnknownToken);
  WordpieceTokenizer tokenizer(wordpieces);
  std::vector<Unit> units;
  AppendPlain(text, tokenizer, wordpieces, &units);
  return Assemble(std::move(units), wordpieces, max_len, nullptr);
}

InjectedSequence Inject(std::string_view text,
                        const std::vector<EntitySpan>& spans,
                        const AlignmentMap& alignment,
                        const EmbeddingTable& wiki,
                        const EmbeddingTable& wordpieces, int max_len,
                        InjectionStats* stats) {
  if (alignment.source_dim() != wiki.dim()) {
    throw Error("alignment source dim " + std::to_string(alignment.source_dim()) +
                " != entity table dim " + std::to_string(wiki.dim()));
  }
  if (alignment.target_dim() != wordpieces.dim()) {
    throw Error("alignment target dim " + std::to_string(alignment.target_dim()) +
                " != wordpiece dim " + std::to_string(wordpieces.dim()));
  }
  RequireRow(wordpieces, kUnknownToken);

  std::vector<size_t> order(spans.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return spans[a].char_start < spans[b].char_start;
  });

  const Vector* slash = wordpieces.Find(Namespace::kWordpiece, kSeparatorText);
  if (slash == nullptr) slash = &RequireRow(wordpieces, kUnknownToken);

  WordpieceTokenizer tokenizer(wordpieces);
  std::vector<Unit> units;
  size_t pos = 0;
  for (size_t idx : order) {
    const EntitySpan& span = spans[idx];
    if (span.char_start >= span.char_end || span.char_end > text.size()) {
      throw Error("span '" + span.surface + "' has invalid offsets");
    }
    if (span.char_start < pos) throw Error("overlapping spans");
    AppendPlain(text.substr(pos, span.char_start - pos), tokenizer, wordpieces,
                &units);
    const std::string_view surface =
        text.substr(span.char_start, span.char_end - span.char_start);
    pos = span.char_end;

    std::string key;
    const Vector* entity = nullptr;
    if (span.wiki_title) {
      entity = wiki.Find(Namespace::kEntity, *span.wiki_title);
      key = *span.wiki_title;
    }
    if (entity == nullptr) {
      key = EntityLookupKey(surface);
      entity = wiki.Find(Namespace::kEntity, key);
    }
    std::vector<std::string> pieces = tokenizer.Tokenize(surface);
    if (entity == nullptr || pieces.empty()) {
      if (stats) ++stats->missed;
      AppendPlain(surface, tokenizer, wordpieces, &units);
      continue;
    }
    const int ref = static_cast<int>(idx);
    Unit group;
    group.injected = true;
    group.tokens.push_back({key, TokenKind::kEntity, alignment.Map(*entity), ref});
    group.tokens.push_back(
        {std::string(kSeparatorText), TokenKind::kSeparator, *slash, ref});
    for (auto& piece : pieces) {
      auto token = MakePiece(wordpieces, std::move(piece));
      token.span_ref = ref;
      group.tokens.push_back(std::move(token));
    }
    units.push_back(std::move(group));
  }
  AppendPlain(text.substr(pos), tokenizer, wordpieces, &units);
  return Assemble(std::move(units), wordpieces, max_len, stats);
}

void WriteTokenDump(const InjectedSequence& seq, std::ostream& out) {
  for (const auto& token : seq.tokens) {
    nlohmann::ordered_json row;
    row["text"] = token.text;
    row["kind"] = TokenKindName(token.kind);
    row["span_ref"] = token.span_ref ? nlohmann::ordered_json(*token.span_ref)
                                     : nullptr;
    out << row.dump() << '\n';
  }
}

}  // namespace kbvqa
