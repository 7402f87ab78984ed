#include "kbvqa/text.h"

#include <cctype>

#include "kbvqa/common.h"

namespace kbvqa {
namespace {

bool IsWordChar(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

bool IsSpace(unsigned char c) { return std::isspace(c) != 0; }

bool IsPunct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

}  // namespace

std::vector<WordToken> SplitWords(std::string_view text) {
  std::vector<WordToken> words;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    if (!IsWordChar(text[i])) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < n) {
      if (IsWordChar(text[i])) {
        ++i;
      } else if ((text[i] == '\'' || text[i] == '-') && i + 1 < n &&
                 IsWordChar(text[i + 1])) {
        i += 2;
      } else {
        break;
      }
    }
    words.push_back({start, i, std::string(text.substr(start, i - start))});
  }
  return words;
}

std::vector<std::string> BasicTokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsSpace(c)) {
      flush();
    } else if (IsPunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

std::string TitleCase(std::string_view text) {
  std::string out(text);
  bool word_start = true;
  for (char& ch : out) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsSpace(c)) {
      word_start = true;
      continue;
    }
    ch = static_cast<char>(word_start ? std::toupper(c) : std::tolower(c));
    word_start = false;
  }
  return out;
}

bool StartsUppercase(std::string_view word) {
  return !word.empty() && std::isupper(static_cast<unsigned char>(word[0]));
}

std::string NormalizeAnswer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsPunct(c)) {
      cleaned.push_back(' ');
    } else {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  std::string out;
  size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && IsSpace(cleaned[i])) ++i;
    size_t start = i;
    while (i < cleaned.size() && !IsSpace(cleaned[i])) ++i;
    if (start == i) break;
    std::string_view word(cleaned.data() + start, i - start);
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out.append(word);
  }
  return out;
}

std::string_view TrimWhitespace(std::string_view text) {
  while (!text.empty() && IsSpace(text.front())) text.remove_prefix(1);
  while (!text.empty() && IsSpace(text.back())) text.remove_suffix(1);
  return text;
}

}  // namespace kbvqa
