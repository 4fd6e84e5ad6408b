#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "noisyrag/client/chat.hpp"
#include "noisyrag/correction/corrector.hpp"
#include "noisyrag/datakit/records.hpp"
#include "noisyrag/retrieval/dense_search.hpp"
#include "noisyrag/retrieval/lexical.hpp"
#include "noisyrag/textnoise/tables.hpp"

namespace noisyrag::pipelines {

using retrieval::Document;
using retrieval::Hit;

/// Read-only after construction; retrieve() may be called concurrently.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<Hit> retrieve(std::string_view query, std::size_t k) const = 0;
  virtual const Document& document(std::string_view doc_id) const = 0;
  virtual std::string name() const = 0;
};

class LexicalRetriever final : public Retriever {
 public:
  LexicalRetriever(retrieval::Corpus corpus, retrieval::Bm25Params params = {});
  /// Uses a prebuilt index of `corpus`.
  LexicalRetriever(retrieval::Corpus corpus, retrieval::LexicalIndex index)
      : corpus_(std::move(corpus)), index_(std::move(index)) {}
  std::vector<Hit> retrieve(std::string_view query, std::size_t k) const override;
  const Document& document(std::string_view doc_id) const override { return corpus_.find(doc_id); }
  std::string name() const override { return "lexical"; }
  const retrieval::Corpus& corpus() const noexcept { return corpus_; }

 private:
  retrieval::Corpus corpus_;
  retrieval::LexicalIndex index_;
};

/// Brute-force cosine search over precomputed embeddings. Queries without
/// any word characters retrieve nothing.
class DenseRetriever final : public Retriever {
 public:
  DenseRetriever(retrieval::DenseModeld model, retrieval::Corpus corpus, unsigned workers = 1);
  std::vector<Hit> retrieve(std::string_view query, std::size_t k) const override;
  const Document& document(std::string_view doc_id) const override { return corpus_.find(doc_id); }
  std::string name() const override { return "dense"; }
  const retrieval::DenseModeld& model() const noexcept { return model_; }

 private:
  retrieval::DenseModeld model_;
  retrieval::Corpus corpus_;
  retrieval::CorpusEmbeddings<double> embeddings_;
};

class Generator {
 public:
  virtual ~Generator() = default;
  /// `prompt` is the rendered, already-truncated generation prompt.
  virtual std::string generate(const std::string& query_id, std::string_view query, const std::vector<Document>& docs,
                               const std::string& prompt) const = 0;
};

/// Test oracle: answers with a gold answer of the query when some document
/// contains it (ASCII case-insensitive), and "unknown" otherwise.
class StubGenerator final : public Generator {
 public:
  explicit StubGenerator(std::map<std::string, std::vector<std::string>> golds) : golds_(std::move(golds)) {}
  static StubGenerator from_dataset(const std::vector<datakit::QueryRecord>& records);
  std::string generate(const std::string& query_id, std::string_view query, const std::vector<Document>& docs,
                       const std::string& prompt) const override;

 private:
  std::map<std::string, std::vector<std::string>> golds_;
};

/// Sends the prompt as a single user message; the reply is trimmed.
class ChatGenerator final : public Generator {
 public:
  ChatGenerator(client::GenerationClient& client, std::string model, int max_tokens = 64)
      : client_(&client), model_(std::move(model)), max_tokens_(max_tokens) {}
  std::string generate(const std::string& query_id, std::string_view query, const std::vector<Document>& docs,
                       const std::string& prompt) const override;

 private:
  client::GenerationClient* client_;
  std::string model_;
  int max_tokens_;
};

class Corrector {
 public:
  virtual ~Corrector() = default;
  virtual correction::CorrectionResult correct(std::string_view query, const std::vector<Document>& docs) const = 0;
};

class GroundedCorrector final : public Corrector {
 public:
  GroundedCorrector(const correction::BaseLexicon& lexicon, const textnoise::NoiseTables& tables,
                    correction::ChannelParams channel = {}, double lm_weight = 0.3, double max_edit_distance = 2.0);
  correction::CorrectionResult correct(std::string_view query, const std::vector<Document>& docs) const override;

 private:
  const correction::BaseLexicon* lexicon_;
  const textnoise::NoiseTables* tables_;
  correction::ChannelParams channel_;
  double lm_weight_;
  double max_edit_distance_;
};

class ExternalCorrector final : public Corrector {
 public:
  ExternalCorrector(client::GenerationClient& client, std::string prompt_template, std::string model)
      : client_(&client), template_(std::move(prompt_template)), model_(std::move(model)) {}
  correction::CorrectionResult correct(std::string_view query, const std::vector<Document>& docs) const override;

 private:
  client::GenerationClient* client_;
  std::string template_;
  std::string model_;
};

/// "[i] contents" blocks and the question substituted into the template.
std::string render_generation_prompt(std::string_view prompt_template, std::string_view question,
                                     const std::vector<Document>& docs);

struct FittedPrompt {
  std::vector<Document> docs;
  std::string prompt;
  std::size_t removed_units = 0;  // characters cut from documents
};

/// Shortens documents until the rendered prompt has at most max_units
/// characters: text is cut from the end of the lowest-ranked document first,
/// and a document cut to nothing is dropped. kInvalidInput when even the
/// prompt without documents is too long.
FittedPrompt fit_prompt(std::string_view prompt_template, std::string_view question, std::vector<Document> docs,
                        std::size_t max_units);

}  // namespace noisyrag::pipelines
