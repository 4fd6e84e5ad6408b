#include "noisyrag/textnoise/corrupt.hpp"

#include "noisyrag/error.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::textnoise {

std::string_view to_string(ErrorType type) noexcept {
  switch (type) {
    case ErrorType::kSpelling: return "spelling";
    case ErrorType::kKeyboard: return "keyboard";
    case ErrorType::kVisual: return "visual";
  }
  return "spelling";
}

ErrorType error_type_from_string(std::string_view name) {
  if (name == "spelling") return ErrorType::kSpelling;
  if (name == "keyboard") return ErrorType::kKeyboard;
  if (name == "visual") return ErrorType::kVisual;
  fail(ErrorKind::kSchema, "unknown error type '" + std::string(name) + "'");
}

void CorruptionSpec::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(word_select_prob)) fail(ErrorKind::kConfig, "word_select_prob must lie in [0,1]");
  if (!in_unit(char_corrupt_prob)) fail(ErrorKind::kConfig, "char_corrupt_prob must lie in [0,1]");
  if (type_weights[0] + type_weights[1] + type_weights[2] == 0) {
    fail(ErrorKind::kConfig, "type_weights must not all be zero");
  }
  if (min_word_len == 0) fail(ErrorKind::kConfig, "min_word_len must be positive");
  if (max_resample_attempts == 0) fail(ErrorKind::kConfig, "max_resample_attempts must be positive");
}

namespace {

std::size_t count_letters(std::string_view token) {
  std::size_t n = 0;
  for (char c : token) n += text::is_ascii_alpha(c);
  return n;
}

std::string substitute_chars(std::string_view token, const CharSubstitutionTable& table, double char_prob,
                             Rng& rng) {
  std::vector<std::size_t> letters;
  for (std::size_t i = 0; i < token.size(); ++i) {
    if (text::is_ascii_alpha(token[i])) letters.push_back(i);
  }
  std::vector<std::size_t> fired;
  for (std::size_t pos : letters) {
    if (bernoulli(rng, char_prob)) fired.push_back(pos);
  }
  if (fired.empty()) fired.push_back(letters[uniform_index(rng, letters.size())]);

  std::string out(token);
  for (std::size_t pos : fired) {
    const char original = out[pos];
    const auto& choices = table.replacements(text::to_lower(original));
    char replacement = choices[uniform_index(rng, choices.size())];
    if (text::is_ascii_upper(original)) replacement = text::to_upper(replacement);
    out[pos] = replacement;
  }
  return out;
}

std::string misspell(std::string_view token, const NoiseTables& tables, const CorruptionSpec& spec, Rng& rng) {
  std::size_t b = 0, e = token.size();
  while (b < e && !text::is_ascii_alpha(token[b])) ++b;
  while (e > b && !text::is_ascii_alpha(token[e - 1])) --e;
  const std::string_view core = token.substr(b, e - b);
  const auto* choices = tables.spelling.misspellings(text::ascii_lower(core));
  if (choices == nullptr) return substitute_chars(token, tables.keyboard, spec.char_corrupt_prob, rng);

  std::string replacement = (*choices)[uniform_index(rng, choices->size())];
  if (text::is_ascii_upper(core.front())) replacement[0] = text::to_upper(replacement[0]);
  std::string out(token.substr(0, b));
  out += replacement;
  out += token.substr(e);
  return out;
}

std::string corrupt_word(std::string_view token, ErrorType type, const CorruptionSpec& spec,
                         const NoiseTables& tables, Rng& rng) {
  switch (type) {
    case ErrorType::kSpelling: return misspell(token, tables, spec, rng);
    case ErrorType::kKeyboard: return substitute_chars(token, tables.keyboard, spec.char_corrupt_prob, rng);
    case ErrorType::kVisual: return substitute_chars(token, tables.visual, spec.char_corrupt_prob, rng);
  }
  return std::string(token);
}

}  // namespace

CorruptionOutcome corrupt_query(std::string_view query, ErrorType type, const CorruptionSpec& spec,
                                const NoiseTables& tables, Rng& rng) {
  spec.validate();
  const auto spans = text::whitespace_spans(query);
  if (spans.empty()) fail(ErrorKind::kInvalidInput, "cannot corrupt an empty query");

  std::vector<bool> eligible(spans.size());
  bool any_eligible = false;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    eligible[i] = count_letters(query.substr(spans[i].begin, spans[i].end - spans[i].begin)) >= spec.min_word_len;
    any_eligible = any_eligible || eligible[i];
  }
  if (!any_eligible) return {std::string(query), {}};

  for (unsigned attempt = 0; attempt <= spec.max_resample_attempts; ++attempt) {
    std::vector<Edit> edits;
    std::vector<std::string> replaced(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (!eligible[i] || !bernoulli(rng, spec.word_select_prob)) continue;
      const std::string_view token = query.substr(spans[i].begin, spans[i].end - spans[i].begin);
      std::string changed = corrupt_word(token, type, spec, tables, rng);
      if (changed != token) {
        replaced[i] = changed;
        edits.push_back({i, std::string(token), std::move(changed)});
      }
    }
    if (edits.empty()) continue;

    std::string out;
    out.reserve(query.size() + 8);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (replaced[i].empty()) continue;
      out.append(query.substr(cursor, spans[i].begin - cursor));
      out.append(replaced[i]);
      cursor = spans[i].end;
    }
    out.append(query.substr(cursor));
    return {std::move(out), std::move(edits)};
  }
  return {std::string(query), {}};
}

CorruptionOutcome corrupt_query(std::string_view query, ErrorType type, const CorruptionSpec& spec,
                                const NoiseTables& tables) {
  Rng rng(spec.seed);
  return corrupt_query(query, type, spec, tables, rng);
}

ErrorType sample_error_type(const CorruptionSpec& spec, Rng& rng) {
  spec.validate();
  const auto& w = spec.type_weights;
  const std::size_t total = std::size_t{w[0]} + w[1] + w[2];
  std::size_t pick = uniform_index(rng, total);
  for (std::size_t i = 0; i < 3; ++i) {
    if (pick < w[i]) return kAllErrorTypes[i];
    pick -= w[i];
  }
  return ErrorType::kVisual;
}

}  // namespace noisyrag::textnoise
