#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "noisyrag/error.hpp"
#include "noisyrag/evalkit/metrics.hpp"
#include "noisyrag/evalkit/report.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::evalkit {
namespace {

bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

void require_golds(std::span<const std::string> golds) {
  if (golds.empty()) fail(ErrorKind::kInvalidInput, "at least one gold answer is required");
}

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  std::map<std::string_view, int> counts;
  for (const std::string& t : gold) ++counts[t];
  int overlap = 0;
  for (const std::string& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

bool contains_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
  if (needle.empty()) return haystack.empty();
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

}  // namespace

std::vector<std::string> normalize_answer(std::string_view answer) {
  std::string cleaned;
  cleaned.reserve(answer.size());
  for (char c : answer) {
    if (!is_ascii_punct(c)) cleaned.push_back(text::to_lower(c));
  }
  std::vector<std::string> tokens;
  for (std::string_view tok : text::split_whitespace(cleaned)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    tokens.emplace_back(tok);
  }
  return tokens;
}

int exact_match(std::string_view prediction, std::span<const std::string> golds) {
  require_golds(golds);
  const auto pred = normalize_answer(prediction);
  for (const std::string& g : golds) {
    if (normalize_answer(g) == pred) return 1;
  }
  return 0;
}

double token_f1(std::string_view prediction, std::span<const std::string> golds) {
  require_golds(golds);
  const auto pred = normalize_answer(prediction);
  double best = 0.0;
  for (const std::string& g : golds) best = std::max(best, f1_single(pred, normalize_answer(g)));
  return best;
}

int accuracy(std::string_view prediction, std::span<const std::string> golds) {
  require_golds(golds);
  const auto pred = normalize_answer(prediction);
  for (const std::string& g : golds) {
    if (contains_run(pred, normalize_answer(g))) return 1;
  }
  return 0;
}

QueryScore score_query(std::string id, std::string_view prediction, std::span<const std::string> golds,
                       bool corrupted) {
  return {std::move(id), exact_match(prediction, golds), token_f1(prediction, golds), accuracy(prediction, golds),
          corrupted};
}

namespace {

SubsetMeans mean_of(const std::vector<QueryScore>& scores, int filter) {
  SubsetMeans m;
  for (const QueryScore& s : scores) {
    if (filter >= 0 && s.corrupted != (filter == 1)) continue;
    ++m.n;
    m.em += s.em;
    m.f1 += s.f1;
    m.acc += s.acc;
  }
  if (m.n > 0) {
    const double n = static_cast<double>(m.n);
    m.em /= n;
    m.f1 /= n;
    m.acc /= n;
  }
  return m;
}

}  // namespace

EvalReport aggregate(std::vector<QueryScore> scores) {
  if (scores.empty()) fail(ErrorKind::kInvalidInput, "cannot aggregate zero query results");
  std::sort(scores.begin(), scores.end(), [](const QueryScore& a, const QueryScore& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].id == scores[i - 1].id) fail(ErrorKind::kValidation, "duplicate query id '" + scores[i].id + "'");
  }
  EvalReport report;
  report.overall = mean_of(scores, -1);
  report.corrupted = mean_of(scores, 1);
  report.clean = mean_of(scores, 0);
  report.per_query = std::move(scores);
  return report;
}

EvalReport empty_report() { return {}; }

namespace {

nlohmann::ordered_json means_json(const SubsetMeans& m) {
  nlohmann::ordered_json j;
  j["n"] = m.n;
  if (m.n == 0) {
    j["em"] = nullptr;
    j["f1"] = nullptr;
    j["acc"] = nullptr;
  } else {
    j["em"] = m.em;
    j["f1"] = m.f1;
    j["acc"] = m.acc;
  }
  return j;
}

SubsetMeans means_from_json(const nlohmann::ordered_json& j) {
  SubsetMeans m;
  m.n = j.at("n").get<std::size_t>();
  if (m.n > 0) {
    m.em = j.at("em").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.acc = j.at("acc").get<double>();
  }
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const QueryScore& s : report.per_query) {
    nlohmann::ordered_json row;
    row["id"] = s.id;
    row["em"] = s.em;
    row["f1"] = s.f1;
    row["acc"] = s.acc;
    row["corrupted"] = s.corrupted;
    rows.push_back(std::move(row));
  }
  j["per_query"] = std::move(rows);
  nlohmann::ordered_json agg;
  agg["overall"] = means_json(report.overall);
  agg["corrupted"] = means_json(report.corrupted);
  agg["clean"] = means_json(report.clean);
  j["aggregates"] = std::move(agg);
  return j;
}

EvalReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    EvalReport r;
    for (const auto& row : j.at("per_query")) {
      r.per_query.push_back({row.at("id").get<std::string>(), row.at("em").get<int>(), row.at("f1").get<double>(),
                             row.at("acc").get<int>(), row.at("corrupted").get<bool>()});
    }
    const auto& agg = j.at("aggregates");
    r.overall = means_from_json(agg.at("overall"));
    r.corrupted = means_from_json(agg.at("corrupted"));
    r.clean = means_from_json(agg.at("clean"));
    return r;
  } catch (const nlohmann::ordered_json::exception& e) {
    fail(ErrorKind::kSchema, std::string("malformed report: ") + e.what());
  }
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << to_json(report).dump(2) << '\n';
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open report " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::ordered_json::exception& e) {
    fail(ErrorKind::kSchema, "report " + path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

std::string aggregates_csv(const EvalReport& report) {
  std::string out = "subset,n,em,f1,acc\n";
  auto row = [&](const char* name, const SubsetMeans& m) {
    out += std::string(name) + "," + std::to_string(m.n) + "," + fmt(m.em) + "," + fmt(m.f1) + "," + fmt(m.acc) + "\n";
  };
  row("overall", report.overall);
  row("corrupted", report.corrupted);
  row("clean", report.clean);
  return out;
}

std::string comparison_table_csv(std::span<const NamedReport> reports) {
  std::string out =
      "run,n,em,f1,acc,n_corrupted,f1_corrupted,em_corrupted,acc_corrupted,n_clean,f1_clean,em_clean,acc_clean\n";
  for (const NamedReport& r : reports) {
    const auto& o = r.report.overall;
    const auto& c = r.report.corrupted;
    const auto& k = r.report.clean;
    out += r.name + "," + std::to_string(o.n) + "," + fmt(o.em) + "," + fmt(o.f1) + "," + fmt(o.acc) + "," +
           std::to_string(c.n) + "," + fmt(c.f1) + "," + fmt(c.em) + "," + fmt(c.acc) + "," + std::to_string(k.n) +
           "," + fmt(k.f1) + "," + fmt(k.em) + "," + fmt(k.acc) + "\n";
  }
  return out;
}

}  // namespace noisyrag::evalkit
