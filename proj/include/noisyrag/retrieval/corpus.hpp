#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace noisyrag::retrieval {

struct Document {
  std::string doc_id;
  std::string contents;
  bool operator==(const Document&) const = default;
};

/// Immutable document collection with unique, nonempty-content documents.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }

  const Document& at(std::size_t i) const { return documents_.at(i); }
  /// Throws kValidation for an unknown id.
  const Document& find(std::string_view doc_id) const;
  bool contains(std::string_view doc_id) const;

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Line-delimited {"id": str, "contents": str}.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace noisyrag::retrieval
