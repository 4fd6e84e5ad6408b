#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyrag/textnoise/corrupt.hpp"

namespace noisyrag::datakit {

using Json = nlohmann::ordered_json;
using textnoise::CorruptionSpec;
using textnoise::Edit;
using textnoise::ErrorType;

struct Corruption {
  ErrorType error_type = ErrorType::kSpelling;
  std::string original_question;
  std::vector<Edit> edits;
  bool operator==(const Corruption&) const = default;
};

/// One QA example. When `corruption` is set, `question` holds the corrupted
/// text and the clean text lives in corruption->original_question.
struct QueryRecord {
  std::string id;
  std::string question;
  std::vector<std::string> golden_answers;
  std::optional<Corruption> corruption;

  bool corrupted() const noexcept { return corruption.has_value(); }
  /// The clean question, whether or not this record was corrupted.
  const std::string& original_question() const noexcept {
    return corruption ? corruption->original_question : question;
  }
  bool operator==(const QueryRecord&) const = default;
};

enum class QuotaMode { kExact, kBernoulli };
std::string_view to_string(QuotaMode mode) noexcept;
QuotaMode quota_mode_from_string(std::string_view name);

struct CorruptionCounts {
  std::size_t total = 0;
  std::size_t corrupted = 0;
  std::array<std::size_t, 3> per_error_type = {0, 0, 0};  // spelling, keyboard, visual
  bool operator==(const CorruptionCounts&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::string source_name;
  double corruption_rate = 0.0;
  CorruptionSpec spec;
  QuotaMode quota_mode = QuotaMode::kExact;
  std::string source_checksum;
  CorruptionCounts counts;
  /// Requested corrupted count that could not be met because the remaining
  /// candidates were uncorruptible.
  std::size_t shortfall = 0;
  bool operator==(const DatasetManifest&) const = default;
};

struct DatasetStats {
  double avg_chars_per_query = 0.0;
  double avg_words_per_query = 0.0;
  std::size_t n_queries = 0;
};

// JSON mapping. Field order follows the published line schema.
Json to_json(const QueryRecord& record);
QueryRecord record_from_json(const Json& j);
Json to_json(const CorruptionSpec& spec);
CorruptionSpec spec_from_json(const Json& j);
Json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const Json& j);
Json to_json(const DatasetStats& stats);

/// Compact single-line serialization used for dataset files and checksums.
std::string serialize_record(const QueryRecord& record);
/// Parses one line; errors mention `line_no`.
QueryRecord parse_record(std::string_view line, std::size_t line_no);

/// Rejects duplicate ids (kValidation, listing the id).
void validate_unique_ids(const std::vector<QueryRecord>& records);

std::vector<QueryRecord> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<QueryRecord>& records, const std::filesystem::path& path);
/// Writes `path` plus the sidecar `<path>.manifest.json`.
void save_dataset(const std::vector<QueryRecord>& records, const DatasetManifest& manifest,
                  const std::filesystem::path& path);
std::filesystem::path manifest_path_for(const std::filesystem::path& dataset_path);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// 16-hex-digit FNV-1a digest over the serialized records.
std::string dataset_checksum(const std::vector<QueryRecord>& records);

}  // namespace noisyrag::datakit
