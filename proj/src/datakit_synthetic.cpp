#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "noisyrag/datakit/synthetic.hpp"
#include "noisyrag/error.hpp"
#include "noisyrag/rng.hpp"
#include "noisyrag/text.hpp"
#include "noisyrag/textnoise/tables.hpp"

namespace noisyrag::datakit {

namespace {

struct Kind {
  std::string_view name;
  std::string_view document;  // {E} entity, {A} answer, {Y} year, {N} number, {R} region word
  std::string_view eval_question;
  std::array<std::string_view, 4> train_questions;
};

constexpr std::array<Kind, 5> kKinds = {{
    {"company",
     "{E} is a company founded in {Y} by the engineer {A}. The company is headquartered in a {R} district and "
     "employs about {N} people.",
     "Who founded {E}?",
     {"Which engineer founded the company {E}?", "Name the founder of {E}.", "{E} was founded by which engineer?",
      "Who started the company {E}?"}},
    {"city",
     "{E} is a city located in a {R} province. Its current mayor is {A}, who was elected in {Y}. The city has "
     "about {N} residents.",
     "Who is mayor of {E}?",
     {"Name the mayor of the city {E}.", "Which person governs the city {E}?", "Who was elected mayor of {E}?",
      "Who currently leads {E} as mayor?"}},
    {"river",
     "The {E} is a river that flows through a {R} valley. Its source lies near the village of {A}, and the river "
     "was first mapped in {Y}.",
     "Source village of {E}?",
     {"Which village lies near the source of the river {E}?", "Where does the river {E} start?",
      "Name the village at the source of {E}.", "The river {E} begins near which village?"}},
    {"band",
     "{E} is a band formed in {Y}. The lead singer of the band is {A}, and their debut album sold about {N} "
     "copies across the {R} region.",
     "Lead singer of {E}?",
     {"Who sings lead vocals in the band {E}?", "Name the singer who fronts {E}.",
      "Which singer leads the band {E}?", "Who is the vocalist of {E}?"}},
    {"mountain",
     "{E} is a mountain in a {R} range. It was first climbed in {Y} by the climber {A}. The summit rises about "
     "{N} meters above the sea.",
     "First climber of {E}?",
     {"Who was the first climber to reach the summit of {E}?", "Which climber first climbed the mountain {E}?",
      "Name the climber who first reached {E}.", "The mountain {E} was first climbed by whom?"}},
}};

constexpr std::array<std::string_view, 12> kRegions = {"northern", "southern", "eastern", "western", "central",
                                                       "coastal",  "rural",    "quiet",   "green",   "rocky",
                                                       "remote",   "historic"};

constexpr std::array<std::string_view, 10> kFiller = {
    "Local records describe the area in some detail and mention several old roads.",
    "Visitors often arrive during the summer months when the weather is mild.",
    "Historians have written a number of books about the early years of the area.",
    "The surrounding land is used for farming, and small markets open every week.",
    "Several schools and a public library serve the nearby communities.",
    "Travel guides recommend a walk along the old stone bridges and gardens.",
    "The regional newspaper publishes reports about events and public meetings.",
    "A small museum keeps photographs, maps and letters from past decades.",
    "Winter can be cold, although snow rarely stays for more than a few days.",
    "Many families have lived in the neighbourhood for several generations.",
};

constexpr std::string_view kOnsets = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

char pick(Rng& rng, std::string_view from) { return from[uniform_index(rng, from.size())]; }

std::string make_name(Rng& rng) {
  // Six letters: CVCVCV, CVCCVC or CVCVVC.
  std::string s;
  switch (uniform_index(rng, 3)) {
    case 0:
      s = {pick(rng, kOnsets), pick(rng, kVowels), pick(rng, kOnsets), pick(rng, kVowels), pick(rng, kOnsets),
           pick(rng, kVowels)};
      break;
    case 1:
      s = {pick(rng, kOnsets), pick(rng, kVowels), pick(rng, kOnsets), pick(rng, kOnsets), pick(rng, kVowels),
           pick(rng, kOnsets)};
      break;
    default:
      s = {pick(rng, kOnsets), pick(rng, kVowels), pick(rng, kOnsets), pick(rng, kVowels), pick(rng, kVowels),
           pick(rng, kOnsets)};
      break;
  }
  return s;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s.front() = text::to_upper(s.front());
  return s;
}

std::string fill(std::string_view tmpl, const std::string& e, const std::string& a, const std::string& y,
                 const std::string& n, std::string_view r) {
  return text::render_template(tmpl, {{"E", e}, {"A", a}, {"Y", y}, {"N", n}, {"R", r}});
}

std::string numbered(std::string_view prefix, std::size_t i, std::size_t width) {
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(prefix) + digits;
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0U : 1U)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

SyntheticBenchmark generate_synthetic(const SyntheticConfig& config, const NameRules& rules) {
  if (config.n_docs < 2) fail(ErrorKind::kConfig, "synthetic corpus needs at least two documents");
  if (config.n_eval_queries > config.n_docs) fail(ErrorKind::kConfig, "more evaluation queries than documents");
  if (config.train_phrasings > 4) fail(ErrorKind::kConfig, "at most four training phrasings per document");

  // Entity and answer names, all distinct enough from each other.
  Rng name_rng = make_stream(config.seed, "synthetic-names");
  std::vector<std::string> names;
  const std::size_t needed = 2 * config.n_docs;
  std::size_t attempts = 0;
  while (names.size() < needed) {
    if (++attempts > 2000 * needed) fail(ErrorKind::kConfig, "could not generate enough distinct names");
    std::string candidate = make_name(name_rng);
    const bool clash = std::any_of(names.begin(), names.end(), [&](const std::string& other) {
      return edit_distance(candidate, other) < 3 || (rules.names_conflict && rules.names_conflict(candidate, other));
    });
    if (clash) continue;
    if (rules.accept_name && !rules.accept_name(candidate)) continue;
    names.push_back(std::move(candidate));
  }

  SyntheticBenchmark out;
  std::vector<retrieval::Document> docs;
  Rng doc_rng = make_stream(config.seed, "synthetic-docs");
  std::vector<std::size_t> kind_of(config.n_docs);
  std::vector<std::string> entity(config.n_docs), answer(config.n_docs);
  for (std::size_t i = 0; i < config.n_docs; ++i) {
    const Kind& kind = kKinds[i % kKinds.size()];
    kind_of[i] = i % kKinds.size();
    entity[i] = capitalize(names[2 * i]);
    answer[i] = capitalize(names[2 * i + 1]);
    const std::string year = std::to_string(1800 + uniform_index(doc_rng, 220));
    const std::string number = std::to_string(100 + uniform_index(doc_rng, 9900));
    const std::string_view region = kRegions[uniform_index(doc_rng, kRegions.size())];
    std::string contents = fill(kind.document, entity[i], answer[i], year, number, region);
    while (contents.size() < config.pad_chars) {
      contents += ' ';
      contents += kFiller[uniform_index(doc_rng, kFiller.size())];
    }
    docs.push_back({numbered("doc-", i + 1, 4), std::move(contents)});
  }
  out.corpus = retrieval::Corpus(docs);

  std::vector<std::size_t> order(config.n_docs);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng pick_rng = make_stream(config.seed, "synthetic-eval");
  shuffle(order, pick_rng);
  order.resize(config.n_eval_queries);
  std::sort(order.begin(), order.end());
  for (std::size_t q = 0; q < order.size(); ++q) {
    const std::size_t d = order[q];
    QueryRecord r;
    r.id = numbered("q-", q + 1, 4);
    r.question = fill(kKinds[kind_of[d]].eval_question, entity[d], answer[d], "", "", "");
    r.golden_answers = {answer[d]};
    out.qrels.push_back({r.id, docs[d].doc_id});
    out.eval_queries.push_back(std::move(r));
  }
  for (std::size_t d = 0; d < config.n_docs; ++d) {
    for (std::size_t p = 0; p < config.train_phrasings; ++p) {
      QueryRecord r;
      r.id = numbered("t-", d + 1, 4) + "-" + std::to_string(p + 1);
      r.question = fill(kKinds[kind_of[d]].train_questions[p], entity[d], answer[d], "", "", "");
      r.golden_answers = {answer[d]};
      out.qrels.push_back({r.id, docs[d].doc_id});
      out.train_queries.push_back(std::move(r));
    }
  }
  return out;
}

void save_qrels(const std::vector<Qrel>& qrels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& q : qrels) {
    Json j;
    j["query_id"] = q.query_id;
    j["doc_id"] = q.doc_id;
    out << j.dump() << '\n';
  }
}

std::vector<Qrel> load_qrels(const std::filesystem::path& path) {
  std::istringstream in(textnoise::read_text_file(path));
  std::vector<Qrel> qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("query_id") || !j.contains("doc_id") ||
        !j["query_id"].is_string() || !j["doc_id"].is_string()) {
      fail(ErrorKind::kSchema, "line " + std::to_string(line_no) + ": expected {\"query_id\": str, \"doc_id\": str}");
    }
    qrels.push_back({j["query_id"].get<std::string>(), j["doc_id"].get<std::string>()});
  }
  return qrels;
}

}  // namespace noisyrag::datakit
