#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "noisyrag/retrieval/corpus.hpp"
#include "noisyrag/textnoise/tables.hpp"

namespace noisyrag::correction {

struct ChannelParams {
  double keyboard_sub_cost = 0.6;
  double visual_sub_cost = 0.6;
  double generic_sub_cost = 1.0;
  double insert_cost = 1.1;
  double delete_cost = 1.1;

  /// Costs must be finite and positive, and the error-aware substitutions
  /// may not cost more than a generic one.
  void validate() const;
};

/// Set of words known to be spelled correctly.
class BaseLexicon {
 public:
  BaseLexicon() = default;
  explicit BaseLexicon(const std::vector<std::string>& words);
  /// One word per line; '#' comments and blank lines are skipped.
  static BaseLexicon load(const std::filesystem::path& path);

  bool contains(std::string_view lower_word) const { return words_.contains(std::string(lower_word)); }
  const std::unordered_set<std::string>& words() const noexcept { return words_; }
  std::size_t size() const noexcept { return words_.size(); }
  /// Words of exactly `length` bytes, sorted.
  const std::vector<std::string>& words_of_length(std::size_t length) const;

 private:
  std::unordered_set<std::string> words_;
  std::vector<std::vector<std::string>> by_length_;
};

/// Candidate words with their prior weights. Document words weigh their
/// count; base words add floor_weight.
struct WeightedLexicon {
  std::unordered_map<std::string, double> weights;
  std::unordered_set<std::string> document_words;
  double total_weight = 0.0;

  double weight(std::string_view word) const;
};

WeightedLexicon build_candidate_lexicon(const std::vector<retrieval::Document>& docs, const BaseLexicon& base,
                                        double floor_weight = 0.1);

/// Channel costs resolved per ASCII character pair. Bytes outside ASCII
/// always pay the generic substitution cost.
class ChannelCosts {
 public:
  ChannelCosts(const ChannelParams& params, const textnoise::KeyboardAdjacency& keyboard,
               const textnoise::VisualConfusionTable& visual);

  double substitution(char a, char b) const noexcept {
    if (a == b) return 0.0;
    const auto ua = static_cast<unsigned char>(a), ub = static_cast<unsigned char>(b);
    return (ua < 128 && ub < 128) ? sub_[ua][ub] : generic_;
  }
  double insertion() const noexcept { return insert_; }
  double deletion() const noexcept { return delete_; }

 private:
  std::vector<std::array<double, 128>> sub_;
  double generic_, insert_, delete_;
};

/// Substitution/insertion/deletion distance with error-aware substitution
/// costs. Returns +inf once every alignment exceeds `cutoff`.
double weighted_edit_distance(std::string_view a, std::string_view b, const ChannelCosts& costs,
                              double cutoff = std::numeric_limits<double>::infinity());
double weighted_edit_distance(std::string_view a, std::string_view b, const ChannelParams& params,
                              const textnoise::KeyboardAdjacency& keyboard, const textnoise::VisualConfusionTable& visual,
                              double cutoff = std::numeric_limits<double>::infinity());

struct CorrectionContext {
  std::string query;
  std::vector<retrieval::Document> retrieved_docs;
  const BaseLexicon* base_lexicon = nullptr;
  const textnoise::KeyboardAdjacency* keyboard = nullptr;
  const textnoise::VisualConfusionTable* visual = nullptr;
  ChannelParams channel;
  double lm_weight = 0.3;
  double max_edit_distance = 2.0;
  double floor_weight = 0.1;

  void validate() const;
};

struct TokenChange {
  std::size_t token_index = 0;
  std::string original;
  std::string corrected;
  double score_margin = 0.0;  // +inf for a unique candidate, NaN when unscored

  bool operator==(const TokenChange&) const = default;
};

struct CorrectionResult {
  std::string corrected_query;
  std::vector<TokenChange> changed;
  std::size_t untouched_count = 0;
};

/// Noisy-channel correction grounded in the retrieved documents.
///
/// A whitespace token is left alone when its lowercased core is in the base
/// lexicon or in the documents' vocabulary, when it is purely numeric, or
/// when its core holds characters other than ASCII letters and digits.
/// Otherwise the candidate with the lowest
///   cost(token, w) - lm_weight * log(weight(w) / total_weight)
/// among words within max_edit_distance replaces it; ties go to the
/// lexicographically smaller word. Punctuation around the core and the
/// token's capitalization pattern are kept.
CorrectionResult correct_query(const CorrectionContext& ctx);

}  // namespace noisyrag::correction
