#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace noisyrag::evalkit {

/// SQuAD-style answer normalization: lowercase, drop ASCII punctuation, drop
/// the articles a/an/the, split on whitespace.
std::vector<std::string> normalize_answer(std::string_view answer);

/// 1 iff the normalized prediction equals some normalized gold.
int exact_match(std::string_view prediction, std::span<const std::string> golds);

/// Token-multiset F1, maximised over golds.
double token_f1(std::string_view prediction, std::span<const std::string> golds);

/// 1 iff some normalized gold occurs as a contiguous token run inside the
/// normalized prediction.
int accuracy(std::string_view prediction, std::span<const std::string> golds);

}  // namespace noisyrag::evalkit
