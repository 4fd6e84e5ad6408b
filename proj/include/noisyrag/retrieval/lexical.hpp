#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "noisyrag/retrieval/corpus.hpp"
#include "noisyrag/retrieval/hit.hpp"

namespace noisyrag::retrieval {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  std::uint32_t doc = 0;  // position in LexicalIndex::doc_ids()
  std::uint32_t tf = 0;
  bool operator==(const Posting&) const = default;
};

/// Okapi BM25 over word_tokens(). Documents are numbered in ascending doc_id
/// order, so every postings list is sorted by doc_id.
///
///   idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
///   score(q, d) = sum over query tokens t of
///                 idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
class LexicalIndex {
 public:
  LexicalIndex() = default;

  const Bm25Params& params() const noexcept { return params_; }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
  std::size_t num_docs() const noexcept { return doc_ids_.size(); }
  double avg_doc_length() const noexcept { return avgdl_; }
  const std::vector<Posting>* postings(std::string_view term) const;
  const std::unordered_map<std::string, std::vector<Posting>>& terms() const noexcept { return postings_; }

  double idf(std::string_view term) const;

  bool operator==(const LexicalIndex&) const = default;

 private:
  friend LexicalIndex build_lexical_index(const Corpus&, const Bm25Params&);
  friend LexicalIndex load_lexical_index(const std::filesystem::path&, Corpus*);

  Bm25Params params_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  double avgdl_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

inline bool operator==(const Bm25Params& a, const Bm25Params& b) { return a.k1 == b.k1 && a.b == b.b; }

LexicalIndex build_lexical_index(const Corpus& corpus, const Bm25Params& params = {});

/// At most k hits with positive score, ranked by ranks_before.
std::vector<Hit> lexical_search(const LexicalIndex& index, std::string_view query, std::size_t k);

/// The index file embeds the documents so retrieval consumers (correction,
/// generation) can read contents back. Loading rebuilds from the stored
/// documents and checks the stored postings and statistics against it.
void save_lexical_index(const LexicalIndex& index, const Corpus& corpus, const std::filesystem::path& path);
LexicalIndex load_lexical_index(const std::filesystem::path& path, Corpus* corpus_out);

}  // namespace noisyrag::retrieval
