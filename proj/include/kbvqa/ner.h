#ifndef KBVQA_NER_H_
#define KBVQA_NER_H_

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace kbvqa {

// A labeled [start, end) byte range of some text.
struct Mention {
  size_t start = 0;
  size_t end = 0;
  std::string label;

  bool operator==(const Mention&) const = default;
};

inline constexpr std::string_view kPersonLabel = "PERSON";
inline constexpr std::string_view kMiscLabel = "MISC";
inline constexpr std::string_view kNounPhraseLabel = "NP";

// Named entity tagger. Implementations must be deterministic and
// thread-safe for concurrent Tag() calls.
class NerProvider {
 public:
  virtual ~NerProvider() = default;
  virtual std::vector<Mention> Tag(std::string_view text) const = 0;
};

class NounPhraseChunker {
 public:
  virtual ~NounPhraseChunker() = default;
  virtual std::vector<Mention> Chunk(std::string_view text) const = 0;
};

// Words that never start or extend a capitalized-name run, even when they
// are capitalized at the start of a sentence.
const std::set<std::string>& DefaultFunctionWords();

// Gazetteer lookup (longest match, case-sensitive on words) followed by a
// capitalized-run fallback: runs of two or more capitalized words are
// PERSON, single capitalized words are MISC.
class GazetteerNer : public NerProvider {
 public:
  GazetteerNer();

  void AddEntry(std::string_view phrase, std::string label);
  // Lines of "phrase<TAB>label"; blank lines and '#' comments are skipped.
  static GazetteerNer Load(const std::filesystem::path& path);

  std::vector<Mention> Tag(std::string_view text) const override;

 private:
  // Word sequence (joined by single spaces) -> label.
  std::map<std::string, std::string, std::less<>> entries_;
  size_t max_words_ = 0;
  const std::set<std::string>* function_words_;
};

// Maximal capitalized runs plus determiner (adjective)* noun+ patterns from
// a small part-of-speech lexicon.
class LexiconChunker : public NounPhraseChunker {
 public:
  LexiconChunker();
  LexiconChunker(std::set<std::string> determiners,
                 std::set<std::string> adjectives, std::set<std::string> nouns);

  std::vector<Mention> Chunk(std::string_view text) const override;

 private:
  std::set<std::string> determiners_;
  std::set<std::string> adjectives_;
  std::set<std::string> nouns_;
};

}  // namespace kbvqa

#endif  // KBVQA_NER_H_
