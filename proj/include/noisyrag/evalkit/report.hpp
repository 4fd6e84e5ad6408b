#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace noisyrag::evalkit {

struct QueryScore {
  std::string id;
  int em = 0;
  double f1 = 0.0;
  int acc = 0;
  bool corrupted = false;
  bool operator==(const QueryScore&) const = default;
};

QueryScore score_query(std::string id, std::string_view prediction, std::span<const std::string> golds,
                       bool corrupted);

struct SubsetMeans {
  std::size_t n = 0;
  double em = 0.0;
  double f1 = 0.0;
  double acc = 0.0;
  bool operator==(const SubsetMeans&) const = default;
};

struct EvalReport {
  std::vector<QueryScore> per_query;  // sorted by id
  SubsetMeans overall;
  SubsetMeans corrupted;
  SubsetMeans clean;
  bool operator==(const EvalReport&) const = default;
};

/// Means over all / corrupted / clean queries. Throws on an empty input or
/// on duplicate ids.
EvalReport aggregate(std::vector<QueryScore> scores);

/// A report over zero queries (every subset has n = 0).
EvalReport empty_report();

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::ordered_json& j);
void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

/// "subset,n,em,f1,acc" rows for overall, corrupted and clean.
std::string aggregates_csv(const EvalReport& report);

struct NamedReport {
  std::string name;
  EvalReport report;
};
/// One row per report: overall, corrupted-subset and clean-subset means side
/// by side.
std::string comparison_table_csv(std::span<const NamedReport> reports);

}  // namespace noisyrag::evalkit
