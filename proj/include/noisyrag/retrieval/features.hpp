#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

namespace noisyrag::retrieval {

/// Character n-gram feature hashing. Every word_tokens() word is padded as
/// "#word#" and each n-gram of each configured size is hashed with FNV-1a
/// (the n-gram length byte first) into 2^log2_buckets buckets.
struct HashingConfig {
  std::vector<unsigned> ngram_sizes = {3, 4};
  unsigned log2_buckets = 18;

  std::size_t dim() const noexcept { return std::size_t{1} << log2_buckets; }
  void validate() const;
  bool operator==(const HashingConfig&) const = default;
};

/// (bucket, count) pairs sorted by bucket.
std::vector<std::pair<std::uint32_t, std::uint32_t>> hashed_ngram_counts(std::string_view text,
                                                                         const HashingConfig& config);

template <typename Scalar>
using FeatureVector = Eigen::SparseVector<Scalar>;

template <typename Scalar>
FeatureVector<Scalar> hash_features(std::string_view text, const HashingConfig& config) {
  const auto counts = hashed_ngram_counts(text, config);
  FeatureVector<Scalar> x(static_cast<Eigen::Index>(config.dim()));
  x.reserve(static_cast<Eigen::Index>(counts.size()));
  for (const auto& [bucket, count] : counts) x.insertBack(bucket) = static_cast<Scalar>(count);
  return x;
}

}  // namespace noisyrag::retrieval
