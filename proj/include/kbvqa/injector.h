#ifndef KBVQA_INJECTOR_H_
#define KBVQA_INJECTOR_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbvqa/embeddings.h"
#include "kbvqa/spans.h"

namespace kbvqa {

enum class TokenKind { kSpecial, kWordpiece, kSeparator, kEntity };

const char* TokenKindName(TokenKind kind);

inline constexpr std::string_view kStartToken = "[CLS]";
inline constexpr std::string_view kEndToken = "[SEP]";
inline constexpr std::string_view kUnknownToken = "[UNK]";
inline constexpr std::string_view kSeparatorText = "/";

struct InjectedToken {
  std::string text;
  TokenKind kind = TokenKind::kWordpiece;
  Vector embedding;
  std::optional<int> span_ref;  // set on injected groups only
};

// Embedding-level input sequence. Always starts with [CLS] and ends with
// [SEP]; each injected span is an ENTITY token, the "/" separator, then the
// span's wordpieces.
struct InjectedSequence {
  std::vector<InjectedToken> tokens;
  bool truncated = false;
  int max_len = 0;

  size_t size() const { return tokens.size(); }
  int CountKind(TokenKind kind) const;
};

// Titlecases the surface word by word ("barack obama" -> "Barack Obama").
std::string EntityLookupKey(std::string_view surface);

// Greedy longest-match wordpiece segmentation over a WORDPIECE namespace.
// Words that cannot be fully segmented become a single [UNK].
class WordpieceTokenizer {
 public:
  explicit WordpieceTokenizer(const EmbeddingTable& vocab,
                              size_t max_chars_per_word = 100);

  std::vector<std::string> Tokenize(std::string_view text) const;
  std::vector<std::string> TokenizeWord(const std::string& word) const;

 private:
  const EmbeddingTable& vocab_;
  size_t max_chars_per_word_;
};

// Plain wordpiece sequence of the lowercased text, [CLS] ... [SEP], at most
// max_len tokens. Throws when the table lacks the special tokens.
InjectedSequence TokenizeBaseline(std::string_view text,
                                  const EmbeddingTable& wordpieces,
                                  int max_len);

struct InjectionStats {
  int injected = 0;        // groups emitted
  int missed = 0;          // spans with no ENTITY row
  int truncated_away = 0;  // injectable spans lost to max_len
};

// Emits text left to right, replacing every span whose wiki title (or else
// titlecased surface) is an ENTITY key with [ENTITY, "/", wordpieces...].
// Other spans fall back to plain wordpieces. Injected groups are kept or cut
// whole when the sequence hits max_len.
InjectedSequence Inject(std::string_view text,
                        const std::vector<EntitySpan>& spans,
                        const AlignmentMap& alignment,
                        const EmbeddingTable& wiki,
                        const EmbeddingTable& wordpieces, int max_len,
                        InjectionStats* stats = nullptr);

// One JSON object per token: {"text", "kind", "span_ref"}.
void WriteTokenDump(const InjectedSequence& seq, std::ostream& out);

}  // namespace kbvqa

#endif  // KBVQA_INJECTOR_H_
