#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace revdec::text {

// Word tokens: lowercased, split on Unicode whitespace, leading and trailing
// punctuation stripped, pure-punctuation tokens dropped. Interior characters
// (apostrophes, hyphens) are kept.
std::vector<std::string> tokenize(std::string_view text);

// Same segmentation as tokenize() without case folding.
std::vector<std::string> tokenize_cased(std::string_view text);

// Splits on '.', '!' or '?' runs followed by whitespace or end of text.
// A single '.' after a known abbreviation (mr, mrs, ms, dr, st, vs, etc, e.g,
// i.e) does not split when the next word is capitalized. Segments without any
// token are discarded.
std::vector<std::string> split_sentences(std::string_view text);

std::string to_lower(std::string_view text);
std::string to_upper(std::string_view text);

// Number of Unicode code points in a UTF-8 string.
std::size_t char_count(std::string_view utf8);

bool is_all_digits(std::string_view token);

// True when the first alphabetic code point of the token is uppercase.
bool is_capitalized(std::string_view token);

// True when the bytes form valid UTF-8.
bool is_valid_utf8(std::string_view bytes);

}  // namespace revdec::text
