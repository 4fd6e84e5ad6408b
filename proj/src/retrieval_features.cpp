#include <algorithm>
#include <cstring>
#include <string>

#include "noisyrag/error.hpp"
#include "noisyrag/retrieval/dense_model.hpp"
#include "noisyrag/retrieval/features.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::retrieval {

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_step(std::uint64_t h, unsigned char byte) noexcept { return (h ^ byte) * kFnvPrime; }
}  // namespace

void HashingConfig::validate() const {
  if (ngram_sizes.empty()) fail(ErrorKind::kConfig, "hashing needs at least one n-gram size");
  for (unsigned n : ngram_sizes) {
    if (n < 1 || n > 16) fail(ErrorKind::kConfig, "n-gram size must be in [1, 16], got " + std::to_string(n));
  }
  if (log2_buckets < 1 || log2_buckets > 26) {
    fail(ErrorKind::kConfig, "log2_buckets must be in [1, 26], got " + std::to_string(log2_buckets));
  }
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> hashed_ngram_counts(std::string_view text,
                                                                         const HashingConfig& config) {
  const std::uint64_t mask = config.dim() - 1;
  std::vector<std::uint32_t> buckets;
  for (const std::string& word : text::word_tokens(text)) {
    const std::string padded = "#" + word + "#";
    for (unsigned n : config.ngram_sizes) {
      if (padded.size() < n) continue;
      for (std::size_t i = 0; i + n <= padded.size(); ++i) {
        std::uint64_t h = fnv_step(kFnvOffset, static_cast<unsigned char>(n));
        for (std::size_t j = i; j < i + n; ++j) h = fnv_step(h, static_cast<unsigned char>(padded[j]));
        buckets.push_back(static_cast<std::uint32_t>(h & mask));
      }
    }
  }
  std::sort(buckets.begin(), buckets.end());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t b : buckets) {
    if (!out.empty() && out.back().first == b) {
      ++out.back().second;
    } else {
      out.emplace_back(b, 1U);
    }
  }
  return out;
}

namespace detail {

std::uint64_t fingerprint_bytes(std::uint64_t h, const void* data, std::size_t n) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) h = fnv_step(h, p[i]);
  return h;
}

std::uint64_t fingerprint_config(const HashingConfig& hashing, double temperature, std::int64_t rows) noexcept {
  std::uint64_t h = kFnvOffset;
  for (unsigned n : hashing.ngram_sizes) h = fingerprint_bytes(h, &n, sizeof n);
  h = fingerprint_bytes(h, &hashing.log2_buckets, sizeof hashing.log2_buckets);
  h = fingerprint_bytes(h, &temperature, sizeof temperature);
  h = fingerprint_bytes(h, &rows, sizeof rows);
  return h;
}

}  // namespace detail
}  // namespace noisyrag::retrieval
