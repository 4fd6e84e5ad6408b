#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "noisyrag/rng.hpp"
#include "noisyrag/textnoise/tables.hpp"

namespace noisyrag::textnoise {

enum class ErrorType { kSpelling = 0, kKeyboard = 1, kVisual = 2 };

inline constexpr std::array<ErrorType, 3> kAllErrorTypes = {ErrorType::kSpelling, ErrorType::kKeyboard,
                                                            ErrorType::kVisual};

/// "spelling", "keyboard", "visual".
std::string_view to_string(ErrorType type) noexcept;
ErrorType error_type_from_string(std::string_view name);

struct CorruptionSpec {
  double word_select_prob = 0.3;
  double char_corrupt_prob = 0.3;
  /// Relative weights for (spelling, keyboard, visual).
  std::array<unsigned, 3> type_weights = {3, 1, 1};
  std::uint64_t seed = 0;
  unsigned min_word_len = 3;
  unsigned max_resample_attempts = 16;

  void validate() const;
  bool operator==(const CorruptionSpec&) const = default;
};

struct Edit {
  std::size_t word_index = 0;
  std::string original;
  std::string corrupted;
  bool operator==(const Edit&) const = default;
};

struct CorruptionOutcome {
  std::string corrupted;
  std::vector<Edit> edits;  // empty: the query could not be corrupted
};

/// Injects one error type into `query`.
///
/// RNG draw order, per attempt, token by token (tokens with fewer than
/// min_word_len ASCII letters consume nothing):
///   1. one selection draw (bernoulli with word_select_prob);
///   2. if selected and the type is Keyboard/Visual, or Spelling falling back
///      to Keyboard: one bernoulli(char_corrupt_prob) draw per letter in order,
///      then one uniform_index draw over the letters if none fired, then one
///      uniform_index draw over the replacement list per corrupted letter;
///   3. if selected Spelling with a dictionary entry: one uniform_index draw
///      over the misspellings.
/// When an attempt leaves the query unchanged the next attempt continues on
/// the same stream, up to max_resample_attempts extra attempts.
CorruptionOutcome corrupt_query(std::string_view query, ErrorType type, const CorruptionSpec& spec,
                                const NoiseTables& tables, Rng& rng);

/// Convenience overload using Rng(spec.seed).
CorruptionOutcome corrupt_query(std::string_view query, ErrorType type, const CorruptionSpec& spec,
                                const NoiseTables& tables);

/// Weighted choice over type_weights from exactly one draw.
ErrorType sample_error_type(const CorruptionSpec& spec, Rng& rng);

}  // namespace noisyrag::textnoise
