#ifndef KBVQA_TEXT_H_
#define KBVQA_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace kbvqa {

// A word with byte offsets into the text it came from.
struct WordToken {
  size_t start = 0;
  size_t end = 0;
  std::string text;
};

// Words are runs of letters/digits (and non-ASCII bytes); an apostrophe or
// hyphen between two word characters stays inside the word.
std::vector<WordToken> SplitWords(std::string_view text);

// BERT-style basic tokenization: lowercase, split on whitespace, and emit
// every ASCII punctuation character as its own token.
std::vector<std::string> BasicTokenize(std::string_view text);

// Uppercase initial and lowercase remainder for each whitespace-separated
// word; separators are preserved.
std::string TitleCase(std::string_view text);

bool StartsUppercase(std::string_view word);

// Lowercase, drop punctuation and the articles a/an/the, collapse whitespace.
std::string NormalizeAnswer(std::string_view text);

std::string_view TrimWhitespace(std::string_view text);

}  // namespace kbvqa

#endif  // KBVQA_TEXT_H_
