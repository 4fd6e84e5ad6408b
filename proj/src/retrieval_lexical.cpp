#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "noisyrag/error.hpp"
#include "noisyrag/retrieval/lexical.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::retrieval {

const std::vector<Posting>* LexicalIndex::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? nullptr : &it->second;
}

double LexicalIndex::idf(std::string_view term) const {
  const auto* list = postings(term);
  const double df = list ? static_cast<double>(list->size()) : 0.0;
  const double n = static_cast<double>(num_docs());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

LexicalIndex build_lexical_index(const Corpus& corpus, const Bm25Params& params) {
  if (corpus.empty()) fail(ErrorKind::kInvalidInput, "cannot index an empty corpus");
  if (params.k1 < 0.0 || params.b < 0.0 || params.b > 1.0) fail(ErrorKind::kConfig, "invalid BM25 parameters");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return corpus.at(a).doc_id < corpus.at(b).doc_id; });

  LexicalIndex index;
  index.params_ = params;
  std::uint64_t total_len = 0;
  for (std::uint32_t pos = 0; pos < order.size(); ++pos) {
    const Document& d = corpus.at(order[pos]);
    index.doc_ids_.push_back(d.doc_id);
    const auto tokens = text::word_tokens(d.contents);
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total_len += tokens.size();
    std::map<std::string_view, std::uint32_t> tf;
    for (const std::string& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) index.postings_[std::string(term)].push_back({pos, count});
  }
  index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(order.size());
  return index;
}

std::vector<Hit> lexical_search(const LexicalIndex& index, std::string_view query, std::size_t k) {
  if (k == 0) fail(ErrorKind::kInvalidInput, "k must be at least 1");
  const auto& p = index.params();
  std::unordered_map<std::uint32_t, double> scores;
  for (const std::string& term : text::word_tokens(query)) {
    const auto* list = index.postings(term);
    if (list == nullptr) continue;
    const double idf = index.idf(term);
    for (const Posting& post : *list) {
      const double tf = post.tf;
      const double norm = p.k1 * (1.0 - p.b + p.b * index.doc_lengths()[post.doc] / index.avg_doc_length());
      scores[post.doc] += idf * tf * (p.k1 + 1.0) / (tf + norm);
    }
  }
  std::vector<Hit> hits;
  hits.reserve(scores.size());
  for (const auto& [doc, score] : scores) {
    if (score > 0.0) hits.push_back({index.doc_ids()[doc], score});
  }
  keep_top_k(hits, k);
  return hits;
}

void save_lexical_index(const LexicalIndex& index, const Corpus& corpus, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "noisyrag.lexical.v1";
  j["k1"] = index.params().k1;
  j["b"] = index.params().b;
  j["num_docs"] = index.num_docs();
  j["avg_doc_length"] = index.avg_doc_length();
  j["doc_ids"] = index.doc_ids();
  j["doc_lengths"] = index.doc_lengths();
  std::map<std::string, const std::vector<Posting>*> sorted;
  for (const auto& [term, list] : index.terms()) sorted.emplace(term, &list);
  nlohmann::ordered_json postings = nlohmann::ordered_json::object();
  for (const auto& [term, list] : sorted) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const Posting& p : *list) arr.push_back({p.doc, p.tf});
    postings[term] = std::move(arr);
  }
  j["postings"] = std::move(postings);
  nlohmann::ordered_json docs = nlohmann::ordered_json::array();
  for (const Document& d : corpus.documents()) docs.push_back({{"id", d.doc_id}, {"contents", d.contents}});
  j["documents"] = std::move(docs);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump() << '\n';
}

LexicalIndex load_lexical_index(const std::filesystem::path& path, Corpus* corpus_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open index " + path.string());
  nlohmann::json j;
  std::vector<Document> docs;
  Bm25Params params;
  try {
    j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "noisyrag.lexical.v1") {
      fail(ErrorKind::kSchema, "unsupported index format in " + path.string());
    }
    params.k1 = j.at("k1").get<double>();
    params.b = j.at("b").get<double>();
    for (const auto& d : j.at("documents")) docs.push_back({d.at("id").get<std::string>(), d.at("contents").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kSchema, "index " + path.string() + ": " + e.what());
  }
  Corpus corpus(std::move(docs));
  LexicalIndex index = build_lexical_index(corpus, params);

  // The stored postings must agree with a rebuild from the stored documents.
  bool consistent = j.at("doc_ids").get<std::vector<std::string>>() == index.doc_ids() &&
                    j.at("doc_lengths").get<std::vector<std::uint32_t>>() == index.doc_lengths() &&
                    j.at("postings").size() == index.terms().size();
  if (consistent) {
    for (const auto& [term, arr] : j.at("postings").items()) {
      const auto* list = index.postings(term);
      if (list == nullptr || list->size() != arr.size()) {
        consistent = false;
        break;
      }
      for (std::size_t i = 0; i < arr.size(); ++i) {
        if ((*list)[i].doc != arr[i][0].get<std::uint32_t>() || (*list)[i].tf != arr[i][1].get<std::uint32_t>()) {
          consistent = false;
          break;
        }
      }
      if (!consistent) break;
    }
  }
  if (!consistent) fail(ErrorKind::kValidation, "index " + path.string() + " is inconsistent with its documents");
  if (corpus_out != nullptr) *corpus_out = std::move(corpus);
  return index;
}

}  // namespace noisyrag::retrieval
