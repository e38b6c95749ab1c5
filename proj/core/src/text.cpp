#include "revdec/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace revdec::text {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one code point starting at i and advances i. Invalid sequences
// decode to U+FFFD and consume a single byte.
char32_t decode(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kReplacement;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return kReplacement;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  // Overlong forms, UTF-16 surrogates and values past U+10FFFF are invalid.
  static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
    ++i;
    return kReplacement;
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::u32string decode_all(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) out.push_back(decode(s, i));
  return out;
}

bool is_space(char32_t c) {
  switch (c) {
    case ' ': case '\t': case '\n': case '\v': case '\f': case '\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case kReplacement:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0xFE50 && c <= 0xFE6B) || (c >= 0xFF01 && c <= 0xFF0F);
}

bool is_upper(char32_t c) {
  return (c >= 'A' && c <= 'Z') || (c >= 0xC0 && c <= 0xDE && c != 0xD7) ||
         (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) || (c >= 0x400 && c <= 0x42F);
}

bool is_lower(char32_t c) {
  return (c >= 'a' && c <= 'z') || (c >= 0xDF && c <= 0xFF && c != 0xF7) ||
         (c >= 0x3B1 && c <= 0x3C9) || (c >= 0x430 && c <= 0x45F);
}

bool is_alpha(char32_t c) {
  if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  return is_upper(c) || is_lower(c) || (c >= 0x100 && !is_punct(c) && !is_space(c));
}

char32_t lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

char32_t upper(char32_t c) {
  if (c >= 'a' && c <= 'z') return c - 0x20;
  if (c >= 0xE0 && c <= 0xFE && c != 0xF7) return c - 0x20;
  if (c >= 0x3B1 && c <= 0x3C9 && c != 0x3C2) return c - 0x20;
  if (c >= 0x430 && c <= 0x44F) return c - 0x20;
  if (c >= 0x450 && c <= 0x45F) return c - 0x50;
  return c;
}

std::vector<std::string> segment(std::string_view text, bool fold) {
  const std::u32string cps = decode_all(text);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    std::size_t j = i;
    while (j < cps.size() && !is_space(cps[j])) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_punct(cps[b])) ++b;
    while (e > b && is_punct(cps[e - 1])) --e;
    if (b < e) {
      std::string tok;
      for (std::size_t k = b; k < e; ++k) encode(fold ? lower(cps[k]) : cps[k], tok);
      tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

constexpr std::array<std::string_view, 9> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "st", "vs", "etc", "e.g", "i.e"};

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// Word immediately before position `dot` (exclusive), stripped of leading
// punctuation and lowercased.
std::string preceding_word(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_ascii_space(text[b - 1])) --b;
  std::string word = to_lower(text.substr(b, dot - b));
  std::size_t k = 0;
  while (k < word.size() && !std::isalnum(static_cast<unsigned char>(word[k]))) ++k;
  return word.substr(k);
}

bool next_word_capitalized(std::string_view text, std::size_t from) {
  std::size_t k = from;
  while (k < text.size() && is_ascii_space(text[k])) ++k;
  if (k >= text.size()) return false;
  std::size_t e = k;
  while (e < text.size() && !is_ascii_space(text[e])) ++e;
  return is_capitalized(text.substr(k, e - k));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) { return segment(text, true); }

std::vector<std::string> tokenize_cased(std::string_view text) {
  return segment(text, false);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  auto emit = [&](std::size_t b, std::size_t e) {
    std::string_view seg = text.substr(b, e - b);
    if (!tokenize_cased(seg).empty()) {
      while (!seg.empty() && is_ascii_space(seg.front())) seg.remove_prefix(1);
      while (!seg.empty() && is_ascii_space(seg.back())) seg.remove_suffix(1);
      sentences.emplace_back(seg);
    }
  };
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_terminator(text[j])) ++j;
    const bool boundary = j == text.size() || is_ascii_space(text[j]);
    if (boundary && j - i == 1 && text[i] == '.') {
      const std::string word = preceding_word(text, i);
      const bool abbrev = std::find(kAbbreviations.begin(), kAbbreviations.end(), word) !=
                          kAbbreviations.end();
      if (abbrev && next_word_capitalized(text, j)) {
        i = j;
        continue;
      }
    }
    if (boundary) {
      emit(start, j);
      start = j;
    }
    i = j;
  }
  if (start < text.size()) emit(start, text.size());
  return sentences;
}

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) encode(lower(decode(text, i)), out);
  return out;
}

std::string to_upper(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) encode(upper(decode(text, i)), out);
  return out;
}

std::size_t char_count(std::string_view utf8) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < utf8.size();) {
    decode(utf8, i);
    ++n;
  }
  return n;
}

bool is_all_digits(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
}

bool is_capitalized(std::string_view token) {
  for (std::size_t i = 0; i < token.size();) {
    const char32_t c = decode(token, i);
    if (is_alpha(c)) return is_upper(c);
  }
  return false;
}

bool is_valid_utf8(std::string_view bytes) {
  for (std::size_t i = 0; i < bytes.size();) {
    const std::size_t before = i;
    const char32_t c = decode(bytes, i);
    if (c == kReplacement) {
      // A literal U+FFFD is three bytes; a decode failure consumes one.
      if (i - before != 3) return false;
    }
  }
  return true;
}

}  // namespace revdec::text
