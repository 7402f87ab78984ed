#include "kbvqa/ner.h"

#include <fstream>

#include "kbvqa/common.h"
#include "kbvqa/text.h"

namespace kbvqa {
namespace {

bool GapIsWhitespace(std::string_view text, const WordToken& a,
                     const WordToken& b) {
  for (size_t i = a.end; i < b.start; ++i) {
    if (text[i] != ' ' && text[i] != '\t') return false;
  }
  return true;
}

bool IsNameWord(const WordToken& token, const std::set<std::string>& function) {
  return StartsUppercase(token.text) && function.count(AsciiLower(token.text)) == 0;
}

// Appends maximal runs of capitalized non-function words.
template <typename LabelFn>
void CapitalizedRuns(std::string_view text, const std::vector<WordToken>& words,
                     const std::set<std::string>& function, LabelFn label,
                     std::vector<Mention>* out) {
  size_t i = 0;
  while (i < words.size()) {
    if (!IsNameWord(words[i], function)) {
      ++i;
      continue;
    }
    size_t j = i + 1;
    while (j < words.size() && IsNameWord(words[j], function) &&
           GapIsWhitespace(text, words[j - 1], words[j])) {
      ++j;
    }
    out->push_back({words[i].start, words[j - 1].end, label(j - i)});
    i = j;
  }
}

}  // namespace

const std::set<std::string>& DefaultFunctionWords() {
  static const std::set<std::string> kWords = {
      "a",     "about", "after", "all",   "an",    "and",   "any",   "are",
      "as",    "at",    "before", "being", "born",  "but",   "by",    "can",
      "could", "did",   "do",    "does",  "during", "each",  "for",   "from",
      "had",   "has",   "have",  "he",    "her",   "here",  "his",   "how",
      "i",     "if",    "in",    "into",  "is",    "it",    "its",   "many",
      "much",  "my",    "name",  "no",    "not",   "of",    "on",    "or",
      "our",   "she",   "so",    "some",  "than",  "that",  "the",   "their",
      "them",  "then",  "there", "these", "they",  "this",  "those", "to",
      "under", "was",   "we",    "were",  "what",  "when",  "where", "which",
      "who",   "whom",  "whose", "why",   "will",  "with",  "would", "yes",
      "you",   "your"};
  return kWords;
}

GazetteerNer::GazetteerNer() : function_words_(&DefaultFunctionWords()) {}

void GazetteerNer::AddEntry(std::string_view phrase, std::string label) {
  const auto words = SplitWords(phrase);
  if (words.empty()) throw Error("empty gazetteer phrase");
  std::string key;
  for (const auto& w : words) {
    if (!key.empty()) key.push_back(' ');
    key += w.text;
  }
  max_words_ = std::max(max_words_, words.size());
  entries_[key] = std::move(label);
}

GazetteerNer GazetteerNer::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open gazetteer " + path.string());
  GazetteerNer ner;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = TrimWhitespace(line);
    if (view.empty() || view.front() == '#') continue;
    const size_t tab = view.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(path.string() + ":" + std::to_string(line_no) +
                  ": expected phrase<TAB>label");
    }
    ner.AddEntry(view.substr(0, tab), std::string(TrimWhitespace(view.substr(tab + 1))));
  }
  return ner;
}

std::vector<Mention> GazetteerNer::Tag(std::string_view text) const {
  const auto words = SplitWords(text);
  std::vector<Mention> mentions;
  std::vector<bool> covered(words.size(), false);
  for (size_t i = 0; i < words.size();) {
    size_t matched = 0;
    const std::string* label = nullptr;
    std::string key;
    size_t limit = std::min(max_words_, words.size() - i);
    for (size_t len = limit; len >= 1 && matched == 0; --len) {
      key.clear();
      bool contiguous = true;
      for (size_t k = i; k < i + len; ++k) {
        if (k > i) {
          contiguous &= GapIsWhitespace(text, words[k - 1], words[k]);
          key.push_back(' ');
        }
        key += words[k].text;
      }
      if (!contiguous) continue;
      auto it = entries_.find(key);
      if (it != entries_.end()) {
        matched = len;
        label = &it->second;
      }
    }
    if (matched > 0) {
      mentions.push_back({words[i].start, words[i + matched - 1].end, *label});
      for (size_t k = i; k < i + matched; ++k) covered[k] = true;
      i += matched;
    } else {
      ++i;
    }
  }

  // Fallback runs over the words the gazetteer left uncovered; a covered
  // word breaks a run.
  size_t i = 0;
  while (i < words.size()) {
    if (covered[i]) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < words.size() && !covered[j]) ++j;
    std::vector<WordToken> segment(words.begin() + i, words.begin() + j);
    CapitalizedRuns(
        text, segment, *function_words_,
        [](size_t n) {
          return std::string(n >= 2 ? kPersonLabel : kMiscLabel);
        },
        &mentions);
    i = j;
  }
  std::sort(mentions.begin(), mentions.end(),
            [](const Mention& a, const Mention& b) { return a.start < b.start; });
  return mentions;
}

LexiconChunker::LexiconChunker()
    : LexiconChunker(
          {"a", "an", "the", "this", "that", "these", "those", "his", "her",
           "their", "its"},
          {"big", "small", "old", "young", "new", "red", "blue", "green",
           "white", "black", "famous", "tall", "large", "little"},
          {"park", "man", "woman", "person", "people", "city", "building",
           "car", "dog", "cat", "picture", "photo", "image", "tower", "river",
           "bridge", "church", "street", "team", "game", "player", "singer",
           "actor", "politician", "film", "book", "country", "food", "animal",
           "tree", "house", "room", "boat", "train", "bus", "plane", "sign",
           "table", "shirt", "hat", "bird", "horse", "field", "sport",
           "kind", "type", "color", "thing"}) {}

LexiconChunker::LexiconChunker(std::set<std::string> determiners,
                               std::set<std::string> adjectives,
                               std::set<std::string> nouns)
    : determiners_(std::move(determiners)),
      adjectives_(std::move(adjectives)),
      nouns_(std::move(nouns)) {}

std::vector<Mention> LexiconChunker::Chunk(std::string_view text) const {
  const auto words = SplitWords(text);
  std::vector<Mention> chunks;
  CapitalizedRuns(
      text, words, DefaultFunctionWords(),
      [](size_t) { return std::string(kNounPhraseLabel); }, &chunks);

  for (size_t i = 0; i < words.size(); ++i) {
    if (determiners_.count(AsciiLower(words[i].text)) == 0) continue;
    size_t j = i + 1;
    auto linked = [&](size_t k) {
      return k < words.size() && GapIsWhitespace(text, words[k - 1], words[k]);
    };
    while (linked(j) && adjectives_.count(AsciiLower(words[j].text)) > 0) ++j;
    size_t last_noun = 0;
    while (linked(j) && nouns_.count(AsciiLower(words[j].text)) > 0) {
      last_noun = j;
      ++j;
    }
    if (last_noun > i) {
      chunks.push_back({words[i].start, words[last_noun].end,
                        std::string(kNounPhraseLabel)});
    }
  }
  std::sort(chunks.begin(), chunks.end(), [](const Mention& a, const Mention& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  return chunks;
}

}  // namespace kbvqa
