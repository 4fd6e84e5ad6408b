#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace noisyrag::text {

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
inline bool is_ascii_alpha(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_ascii_upper(char c) noexcept { return c >= 'A' && c <= 'Z'; }
inline bool is_ascii_digit(char c) noexcept { return c >= '0' && c <= '9'; }
inline char to_lower(char c) noexcept { return is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }
inline char to_upper(char c) noexcept {
  return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
}
/// Word characters for lexical tokenization: ASCII alphanumerics and any
/// byte of a multi-byte UTF-8 sequence.
inline bool is_word_char(char c) noexcept {
  return is_ascii_alpha(c) || is_ascii_digit(c) || static_cast<unsigned char>(c) >= 0x80;
}

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Byte spans of the whitespace-separated tokens of `s`.
std::vector<Span> whitespace_spans(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::size_t count_whitespace_tokens(std::string_view s);

std::string ascii_lower(std::string_view s);
std::string_view trim(std::string_view s) noexcept;

/// Lowercased runs of word characters. Used by BM25, the dense hasher and the
/// correction lexicon so all three agree on what a word is.
std::vector<std::string> word_tokens(std::string_view s);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s) noexcept;

/// Splits a whitespace token into leading punctuation, core and trailing
/// punctuation, where the core runs from the first to the last word character.
struct TokenParts {
  std::string_view prefix;
  std::string_view core;
  std::string_view suffix;
};
TokenParts split_token(std::string_view token) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Replaces each "{name}" placeholder in one left-to-right pass, so values
/// that themselves contain braces are copied verbatim. Unknown placeholders
/// are left as they are.
std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string_view, std::string_view>>& values);

}  // namespace noisyrag::text
