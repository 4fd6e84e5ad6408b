#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace noisyrag::retrieval {

struct Hit {
  std::string doc_id;
  double score = 0.0;
  bool operator==(const Hit&) const = default;
};

/// Ranking order used by every retriever: score descending, then doc_id
/// ascending.
inline bool ranks_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

/// Keeps the best k hits in ranking order.
inline void keep_top_k(std::vector<Hit>& hits, std::size_t k) {
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), ranks_before);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), ranks_before);
  }
}

}  // namespace noisyrag::retrieval
