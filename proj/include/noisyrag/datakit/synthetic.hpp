#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "noisyrag/datakit/records.hpp"
#include "noisyrag/retrieval/corpus.hpp"

namespace noisyrag::datakit {

/// Query id -> relevant document id.
struct Qrel {
  std::string query_id;
  std::string doc_id;
  bool operator==(const Qrel&) const = default;
};

/// Entity-centric toy benchmark: every document describes one invented
/// entity of one of five kinds (company, city, river, band, mountain) and
/// names a unique invented answer. Evaluation questions use a phrasing that
/// never appears among the training questions.
struct SyntheticConfig {
  std::size_t n_docs = 200;
  std::size_t n_eval_queries = 100;
  std::size_t train_phrasings = 4;  // per document, at most 4
  /// Documents are extended with neutral filler sentences to at least this
  /// many characters (0 keeps them short).
  std::size_t pad_chars = 0;
  std::uint64_t seed = 13;
};

struct SyntheticBenchmark {
  retrieval::Corpus corpus;
  std::vector<QueryRecord> eval_queries;   // clean
  std::vector<QueryRecord> train_queries;  // clean
  std::vector<Qrel> qrels;                 // eval and train
};

/// Optional vetoes on the invented names, all lowercase. `accept_name`
/// rejects a single name (say, one a spell checker would confuse with a
/// dictionary word); `names_conflict` rejects a name that is too close to an
/// already accepted one. Without `names_conflict`, names must differ by an
/// edit distance of at least 3.
struct NameRules {
  std::function<bool(std::string_view)> accept_name;
  std::function<bool(std::string_view, std::string_view)> names_conflict;
};

SyntheticBenchmark generate_synthetic(const SyntheticConfig& config, const NameRules& rules = {});

/// Plain Levenshtein distance.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// Line-delimited {"query_id": str, "doc_id": str}.
void save_qrels(const std::vector<Qrel>& qrels, const std::filesystem::path& path);
std::vector<Qrel> load_qrels(const std::filesystem::path& path);

}  // namespace noisyrag::datakit
