#pragma once

#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "noisyrag/retrieval/corpus.hpp"
#include "noisyrag/retrieval/dense_model.hpp"
#include "noisyrag/retrieval/hit.hpp"

namespace noisyrag::retrieval {

/// Unit-norm document embeddings, one column per document, in corpus order.
template <typename Scalar>
struct CorpusEmbeddings {
  std::vector<std::string> doc_ids;
  Matrix<Scalar> embeddings;
  std::uint64_t model_fingerprint = 0;
};

/// Embeds every document. Work is split into contiguous ranges per worker;
/// each column is written by one worker, so the result does not depend on
/// the worker count.
template <typename Scalar>
CorpusEmbeddings<Scalar> embed_corpus(const DenseModel<Scalar>& model, const Corpus& corpus, unsigned workers = 1) {
  CorpusEmbeddings<Scalar> out;
  out.model_fingerprint = model.fingerprint();
  const auto n = static_cast<Eigen::Index>(corpus.size());
  out.doc_ids.reserve(corpus.size());
  for (const auto& d : corpus.documents()) out.doc_ids.push_back(d.doc_id);
  out.embeddings.resize(model.output_dim(), n);
  auto work = [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index i = begin; i < end; ++i) {
      out.embeddings.col(i) = embed(model, corpus.at(static_cast<std::size_t>(i)).contents);
    }
  };
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(std::max<Eigen::Index>(n, 1))));
  if (workers == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  const Eigen::Index chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        work(std::min(n, w * chunk), std::min(n, (w + 1) * chunk));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// Exact top-k by cosine similarity. Ties go to the smaller doc id.
template <typename Scalar>
std::vector<Hit> dense_search(const DenseModel<Scalar>& model, const CorpusEmbeddings<Scalar>& corpus,
                              std::string_view query, std::size_t k) {
  if (k == 0) fail(ErrorKind::kInvalidInput, "k must be at least 1");
  if (corpus.model_fingerprint != model.fingerprint()) {
    fail(ErrorKind::kValidation, "corpus embeddings were built with a different model version");
  }
  if (corpus.doc_ids.empty()) return {};
  const Vector<Scalar> q = embed(model, query);
  const Vector<Scalar> scores = corpus.embeddings.transpose() * q;
  std::vector<Hit> hits;
  hits.reserve(corpus.doc_ids.size());
  for (std::size_t i = 0; i < corpus.doc_ids.size(); ++i) {
    hits.push_back({corpus.doc_ids[i], static_cast<double>(scores(static_cast<Eigen::Index>(i)))});
  }
  keep_top_k(hits, k);
  return hits;
}

}  // namespace noisyrag::retrieval
