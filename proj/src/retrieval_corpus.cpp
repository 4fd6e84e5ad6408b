#include <fstream>

#include <nlohmann/json.hpp>

#include "noisyrag/error.hpp"
#include "noisyrag/retrieval/corpus.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::retrieval {

Corpus::Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
  by_id_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    const Document& d = documents_[i];
    if (d.doc_id.empty()) fail(ErrorKind::kValidation, "document " + std::to_string(i + 1) + " has an empty id");
    if (text::trim(d.contents).empty()) fail(ErrorKind::kValidation, "document '" + d.doc_id + "' has no contents");
    if (!by_id_.emplace(d.doc_id, i).second) fail(ErrorKind::kValidation, "duplicate doc_id '" + d.doc_id + "'");
  }
}

const Document& Corpus::find(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  if (it == by_id_.end()) fail(ErrorKind::kValidation, "unknown doc_id '" + std::string(doc_id) + "'");
  return documents_[it->second];
}

bool Corpus::contains(std::string_view doc_id) const { return by_id_.count(std::string(doc_id)) != 0; }

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open corpus " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      docs.push_back({j.at("id").get<std::string>(), j.at("contents").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kSchema, "corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Corpus(std::move(docs));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const Document& d : corpus.documents()) {
    nlohmann::ordered_json j;
    j["id"] = d.doc_id;
    j["contents"] = d.contents;
    out << j.dump() << '\n';
  }
}

}  // namespace noisyrag::retrieval
