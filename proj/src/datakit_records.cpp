#include "noisyrag/datakit/records.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "noisyrag/error.hpp"
#include "noisyrag/rng.hpp"

namespace noisyrag::datakit {

std::string_view to_string(QuotaMode mode) noexcept {
  return mode == QuotaMode::kExact ? "exact" : "bernoulli";
}

QuotaMode quota_mode_from_string(std::string_view name) {
  if (name == "exact") return QuotaMode::kExact;
  if (name == "bernoulli") return QuotaMode::kBernoulli;
  fail(ErrorKind::kConfig, "unknown quota mode '" + std::string(name) + "'");
}

namespace {

const Json& require(const Json& j, const char* field, const char* where) {
  if (!j.is_object()) fail(ErrorKind::kSchema, std::string(where) + " must be an object");
  auto it = j.find(field);
  if (it == j.end()) fail(ErrorKind::kSchema, std::string("missing field \"") + field + "\" in " + where);
  return *it;
}

std::string require_string(const Json& j, const char* field, const char* where) {
  const Json& v = require(j, field, where);
  if (!v.is_string()) fail(ErrorKind::kSchema, std::string("field \"") + field + "\" must be a string");
  return v.get<std::string>();
}

}  // namespace

Json to_json(const QueryRecord& r) {
  Json j;
  j["id"] = r.id;
  j["question"] = r.question;
  j["golden_answers"] = r.golden_answers;
  if (r.corruption) {
    Json c;
    c["error_type"] = std::string(textnoise::to_string(r.corruption->error_type));
    c["original_question"] = r.corruption->original_question;
    Json edits = Json::array();
    for (const Edit& e : r.corruption->edits) edits.push_back(Json::array({e.word_index, e.original, e.corrupted}));
    c["edits"] = std::move(edits);
    j["corruption"] = std::move(c);
  } else {
    j["corruption"] = nullptr;
  }
  return j;
}

QueryRecord record_from_json(const Json& j) {
  constexpr const char* where = "record";
  QueryRecord r;
  r.id = require_string(j, "id", where);
  r.question = require_string(j, "question", where);
  const Json& golds = require(j, "golden_answers", where);
  if (!golds.is_array()) fail(ErrorKind::kSchema, "field \"golden_answers\" must be an array");
  for (const Json& g : golds) {
    if (!g.is_string()) fail(ErrorKind::kSchema, "golden_answers entries must be strings");
    r.golden_answers.push_back(g.get<std::string>());
  }
  if (r.golden_answers.empty()) fail(ErrorKind::kSchema, "record '" + r.id + "' has no golden_answers");

  // An absent key reads as a clean record.
  const auto found = j.find("corruption");
  if (found != j.end() && !found->is_null()) {
    const Json& c = *found;
    Corruption corruption;
    corruption.error_type = textnoise::error_type_from_string(require_string(c, "error_type", "corruption"));
    corruption.original_question = require_string(c, "original_question", "corruption");
    const Json& edits = require(c, "edits", "corruption");
    if (!edits.is_array()) fail(ErrorKind::kSchema, "field \"edits\" must be an array");
    for (const Json& e : edits) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number_unsigned() || !e[1].is_string() || !e[2].is_string()) {
        fail(ErrorKind::kSchema, "edits entries must be [int, str, str]");
      }
      corruption.edits.push_back({e[0].get<std::size_t>(), e[1].get<std::string>(), e[2].get<std::string>()});
    }
    if (corruption.original_question == r.question) {
      fail(ErrorKind::kSchema, "record '" + r.id + "' is marked corrupted but equals its original question");
    }
    r.corruption = std::move(corruption);
  }
  return r;
}

Json to_json(const CorruptionSpec& s) {
  Json j;
  j["word_select_prob"] = s.word_select_prob;
  j["char_corrupt_prob"] = s.char_corrupt_prob;
  j["type_weights"] = s.type_weights;
  j["seed"] = s.seed;
  j["min_word_len"] = s.min_word_len;
  j["max_resample_attempts"] = s.max_resample_attempts;
  return j;
}

CorruptionSpec spec_from_json(const Json& j) {
  CorruptionSpec s;
  s.word_select_prob = require(j, "word_select_prob", "spec").get<double>();
  s.char_corrupt_prob = require(j, "char_corrupt_prob", "spec").get<double>();
  s.type_weights = require(j, "type_weights", "spec").get<std::array<unsigned, 3>>();
  s.seed = require(j, "seed", "spec").get<std::uint64_t>();
  s.min_word_len = require(j, "min_word_len", "spec").get<unsigned>();
  s.max_resample_attempts = require(j, "max_resample_attempts", "spec").get<unsigned>();
  s.validate();
  return s;
}

Json to_json(const DatasetManifest& m) {
  Json j;
  j["name"] = m.name;
  j["source_name"] = m.source_name;
  j["corruption_rate"] = m.corruption_rate;
  j["quota_mode"] = std::string(to_string(m.quota_mode));
  j["type_assignment"] = m.quota_mode == QuotaMode::kExact
                             ? "largest-remainder quota over type_weights, shuffled"
                             : "per-query weighted sampling";
  j["spec"] = to_json(m.spec);
  j["seed"] = m.spec.seed;
  j["source_checksum"] = m.source_checksum;
  Json counts;
  counts["total"] = m.counts.total;
  counts["corrupted"] = m.counts.corrupted;
  Json per;
  for (std::size_t i = 0; i < 3; ++i) {
    per[std::string(textnoise::to_string(textnoise::kAllErrorTypes[i]))] = m.counts.per_error_type[i];
  }
  counts["per_error_type"] = std::move(per);
  j["counts"] = std::move(counts);
  j["shortfall"] = m.shortfall;
  return j;
}

DatasetManifest manifest_from_json(const Json& j) {
  DatasetManifest m;
  m.name = require_string(j, "name", "manifest");
  m.source_name = require_string(j, "source_name", "manifest");
  m.corruption_rate = require(j, "corruption_rate", "manifest").get<double>();
  m.quota_mode = quota_mode_from_string(require_string(j, "quota_mode", "manifest"));
  m.spec = spec_from_json(require(j, "spec", "manifest"));
  m.source_checksum = require_string(j, "source_checksum", "manifest");
  const Json& counts = require(j, "counts", "manifest");
  m.counts.total = require(counts, "total", "counts").get<std::size_t>();
  m.counts.corrupted = require(counts, "corrupted", "counts").get<std::size_t>();
  const Json& per = require(counts, "per_error_type", "counts");
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string key(textnoise::to_string(textnoise::kAllErrorTypes[i]));
    m.counts.per_error_type[i] = require(per, key.c_str(), "per_error_type").get<std::size_t>();
  }
  m.shortfall = require(j, "shortfall", "manifest").get<std::size_t>();
  return m;
}

Json to_json(const DatasetStats& s) {
  Json j;
  j["n_queries"] = s.n_queries;
  j["avg_chars_per_query"] = s.avg_chars_per_query;
  j["avg_words_per_query"] = s.avg_words_per_query;
  return j;
}

std::string serialize_record(const QueryRecord& record) { return to_json(record).dump(); }

QueryRecord parse_record(std::string_view line, std::size_t line_no) {
  const std::string prefix = "line " + std::to_string(line_no) + ": ";
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::kSchema, prefix + "malformed JSON (" + e.what() + ")");
  }
  try {
    return record_from_json(j);
  } catch (const Error& e) {
    fail(e.kind(), prefix + e.what());
  } catch (const Json::exception& e) {
    fail(ErrorKind::kSchema, prefix + e.what());
  }
}

void validate_unique_ids(const std::vector<QueryRecord>& records) {
  std::unordered_map<std::string_view, std::size_t> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = seen.emplace(records[i].id, i);
    if (!inserted) {
      fail(ErrorKind::kValidation, "duplicate id '" + records[i].id + "' (records " + std::to_string(it->second + 1) +
                                       " and " + std::to_string(i + 1) + ")");
    }
  }
}

std::vector<QueryRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open dataset " + path.string());
  std::vector<QueryRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    records.push_back(parse_record(line, line_no));
  }
  validate_unique_ids(records);
  return records;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << contents;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace

void save_dataset(const std::vector<QueryRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const QueryRecord& r : records) {
    out += serialize_record(r);
    out += '\n';
  }
  write_file(path, out);
}

std::filesystem::path manifest_path_for(const std::filesystem::path& dataset_path) {
  return std::filesystem::path(dataset_path.string() + ".manifest.json");
}

void save_dataset(const std::vector<QueryRecord>& records, const DatasetManifest& manifest,
                  const std::filesystem::path& path) {
  save_dataset(records, path);
  save_manifest(manifest, manifest_path_for(path));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  try {
    return manifest_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    fail(ErrorKind::kSchema, "manifest " + path.string() + ": " + e.what());
  }
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file(path, to_json(manifest).dump(2) + "\n");
}

std::string dataset_checksum(const std::vector<QueryRecord>& records) {
  std::string all;
  for (const QueryRecord& r : records) {
    all += serialize_record(r);
    all += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(all)));
  return buf;
}

}  // namespace noisyrag::datakit
