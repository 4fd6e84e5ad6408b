#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "noisyrag/correction/external.hpp"
#include "noisyrag/evalkit/metrics.hpp"
#include "noisyrag/pipelines/pipelines.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::pipelines {

using datakit::QueryRecord;
using nlohmann::ordered_json;

LexicalRetriever::LexicalRetriever(retrieval::Corpus corpus, retrieval::Bm25Params params)
    : corpus_(std::move(corpus)), index_(retrieval::build_lexical_index(corpus_, params)) {}

std::vector<Hit> LexicalRetriever::retrieve(std::string_view query, std::size_t k) const {
  return retrieval::lexical_search(index_, query, k);
}

DenseRetriever::DenseRetriever(retrieval::DenseModeld model, retrieval::Corpus corpus, unsigned workers)
    : model_(std::move(model)), corpus_(std::move(corpus)), embeddings_(retrieval::embed_corpus(model_, corpus_, workers)) {}

std::vector<Hit> DenseRetriever::retrieve(std::string_view query, std::size_t k) const {
  if (retrieval::hash_features<double>(query, model_.hashing()).nonZeros() == 0) return {};
  return retrieval::dense_search(model_, embeddings_, query, k);
}

StubGenerator StubGenerator::from_dataset(const std::vector<QueryRecord>& records) {
  std::map<std::string, std::vector<std::string>> golds;
  for (const auto& r : records) golds[r.id] = r.golden_answers;
  return StubGenerator(std::move(golds));
}

std::string StubGenerator::generate(const std::string& query_id, std::string_view, const std::vector<Document>& docs,
                                    const std::string&) const {
  auto it = golds_.find(query_id);
  if (it == golds_.end()) return "unknown";
  for (const auto& gold : it->second) {
    const std::string needle = text::ascii_lower(gold);
    if (needle.empty()) continue;
    for (const auto& d : docs) {
      if (text::ascii_lower(d.contents).find(needle) != std::string::npos) return gold;
    }
  }
  return "unknown";
}

std::string ChatGenerator::generate(const std::string&, std::string_view, const std::vector<Document>&,
                                    const std::string& prompt) const {
  client::ChatRequest request;
  request.model = model_;
  request.max_tokens = max_tokens_;
  request.messages.push_back({"user", prompt});
  return std::string(text::trim(client_->complete(request)));
}

GroundedCorrector::GroundedCorrector(const correction::BaseLexicon& lexicon, const textnoise::NoiseTables& tables,
                                     correction::ChannelParams channel, double lm_weight, double max_edit_distance)
    : lexicon_(&lexicon), tables_(&tables), channel_(channel), lm_weight_(lm_weight), max_edit_distance_(max_edit_distance) {
  channel_.validate();
}

correction::CorrectionResult GroundedCorrector::correct(std::string_view query, const std::vector<Document>& docs) const {
  correction::CorrectionContext ctx;
  ctx.query = std::string(query);
  ctx.retrieved_docs = docs;
  ctx.base_lexicon = lexicon_;
  ctx.keyboard = &tables_->keyboard;
  ctx.visual = &tables_->visual;
  ctx.channel = channel_;
  ctx.lm_weight = lm_weight_;
  ctx.max_edit_distance = max_edit_distance_;
  return correction::correct_query(ctx);
}

correction::CorrectionResult ExternalCorrector::correct(std::string_view query, const std::vector<Document>& docs) const {
  correction::CorrectionContext ctx;
  ctx.query = std::string(query);
  ctx.retrieved_docs = docs;
  return correction::correct_query_external(ctx, *client_, template_, model_);
}

std::string render_generation_prompt(std::string_view prompt_template, std::string_view question,
                                     const std::vector<Document>& docs) {
  const std::string documents = correction::format_documents(docs);
  return text::render_template(prompt_template, {{"question", question}, {"documents", documents}});
}

namespace {

/// Byte offset just past the first `n` code points.
std::size_t utf8_prefix_bytes(std::string_view s, std::size_t n) {
  std::size_t i = 0;
  while (i < s.size() && n > 0) {
    ++i;
    while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
    --n;
  }
  return i;
}

}  // namespace

FittedPrompt fit_prompt(std::string_view prompt_template, std::string_view question, std::vector<Document> docs,
                        std::size_t max_units) {
  FittedPrompt out;
  out.docs = std::move(docs);
  for (;;) {
    out.prompt = render_generation_prompt(prompt_template, question, out.docs);
    const std::size_t length = text::utf8_length(out.prompt);
    if (length <= max_units) break;
    if (out.docs.empty()) {
      fail(ErrorKind::kInvalidInput, "prompt without documents already exceeds " + std::to_string(max_units) + " characters");
    }
    const std::size_t over = length - max_units;
    Document& last = out.docs.back();
    const std::size_t content = text::utf8_length(last.contents);
    if (over >= content) {
      out.removed_units += content;
      out.docs.pop_back();
    } else {
      last.contents.resize(utf8_prefix_bytes(last.contents, content - over));
      out.removed_units += over;
    }
  }
  if (out.removed_units > 0) spdlog::debug("truncated {} characters of documents to fit the prompt", out.removed_units);
  return out;
}

void PipelineConfig::validate() const {
  if (k_docs < 1) fail(ErrorKind::kConfig, "k_docs must be at least 1");
  if (correction_k < 1) fail(ErrorKind::kConfig, "correction_k must be at least 1");
  if (max_input_units < 1) fail(ErrorKind::kConfig, "max_input_units must be at least 1");
  if (workers < 1) fail(ErrorKind::kConfig, "workers must be at least 1");
  if (hooks.iterations < 1) fail(ErrorKind::kConfig, "hook iterations must be at least 1");
  if (generation_template.empty()) fail(ErrorKind::kConfig, "generation template is empty");
}

std::string_view to_string(QuadrantArm arm) noexcept {
  switch (arm) {
    case QuadrantArm::kQeDe: return "QE-DE";
    case QuadrantArm::kQeDc: return "QE-DC";
    case QuadrantArm::kQcDe: return "QC-DE";
    case QuadrantArm::kQcDc: return "QC-DC";
  }
  return "?";
}

namespace {

enum class Mode { kStandard, kCorrect };

struct QueryPlan {
  const QueryRecord* record;
  std::string retrieval_query;
  std::string generation_query;
};

std::vector<Document> fetch(const Retriever& r, const std::vector<Hit>& hits) {
  std::vector<Document> docs;
  docs.reserve(hits.size());
  for (const auto& h : hits) docs.push_back(r.document(h.doc_id));
  return docs;
}

void retrieve_and_generate(RunRecord& out, const QueryRecord& record, std::string retrieval_query,
                           std::string generation_query, const Components& parts, const PipelineConfig& config,
                           bool generation_follows_retrieval) {
  const auto& hooks = config.hooks;
  for (std::size_t it = 0; it < hooks.iterations; ++it) {
    out.retrieval_query = retrieval_query;
    out.retrieved = parts.retriever->retrieve(retrieval_query, config.k_docs);
    if (hooks.post_retrieval) out.retrieved = hooks.post_retrieval(record, std::move(out.retrieved));
    out.generation_query = generation_query;
    auto fitted = fit_prompt(config.generation_template, generation_query, fetch(*parts.retriever, out.retrieved),
                             config.max_input_units);
    out.truncated_units = fitted.removed_units;
    out.answer = parts.generator->generate(record.id, generation_query, fitted.docs, fitted.prompt);
    if (it + 1 < hooks.iterations && hooks.iterate) {
      retrieval_query = hooks.iterate(retrieval_query, out.answer);
      if (generation_follows_retrieval) generation_query = retrieval_query;
    }
  }
}

RunRecord run_one(const QueryPlan& plan, Mode mode, const Components& parts, const PipelineConfig& config) {
  const QueryRecord& record = *plan.record;
  RunRecord out;
  out.query_id = record.id;
  out.question = record.question;
  out.corrupted = record.corrupted();
  try {
    std::string query = plan.retrieval_query;
    if (config.hooks.pre_retrieval) query = config.hooks.pre_retrieval(record, std::move(query));
    if (mode == Mode::kStandard) {
      retrieve_and_generate(out, record, query, plan.generation_query, parts, config, false);
    } else {
      const Retriever& first = parts.correction_retriever != nullptr ? *parts.correction_retriever : *parts.retriever;
      auto first_hits = first.retrieve(query, config.correction_k);
      auto result = parts.corrector->correct(query, fetch(first, first_hits));
      out.first_stage = first_hits;
      out.corrected_query = result.corrected_query;
      out.corrections = result.changed;
      if (config.two_stage) {
        retrieve_and_generate(out, record, result.corrected_query, result.corrected_query, parts, config, true);
      } else {
        out.retrieval_query = query;
        out.retrieved = parts.retriever->retrieve(query, config.k_docs);
        out.generation_query = result.corrected_query;
        auto fitted = fit_prompt(config.generation_template, result.corrected_query,
                                 fetch(*parts.retriever, out.retrieved), config.max_input_units);
        out.truncated_units = fitted.removed_units;
        out.answer = parts.generator->generate(record.id, result.corrected_query, fitted.docs, fitted.prompt);
      }
    }
  } catch (const std::exception& e) {
    spdlog::warn("query '{}' failed: {}", record.id, e.what());
    out.failed = true;
    out.error = e.what();
    out.answer.clear();
  }
  const auto score = evalkit::score_query(record.id, out.answer, record.golden_answers, out.corrupted);
  out.em = score.em;
  out.f1 = score.f1;
  out.acc = score.acc;
  return out;
}

RunOutput execute(const std::vector<QueryPlan>& plans, Mode mode, const Components& parts, const PipelineConfig& config) {
  config.validate();
  if (parts.retriever == nullptr || parts.generator == nullptr) fail(ErrorKind::kConfig, "pipeline needs a retriever and a generator");
  if (mode == Mode::kCorrect && parts.corrector == nullptr) fail(ErrorKind::kConfig, "RA-QCG needs a corrector");

  RunOutput out;
  out.records.resize(plans.size());
  const unsigned workers = std::max(1U, std::min<unsigned>(config.workers, static_cast<unsigned>(std::max<std::size_t>(plans.size(), 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < plans.size(); ++i) out.records[i] = run_one(plans[i], mode, parts, config);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < plans.size(); i = next.fetch_add(1)) {
          out.records[i] = run_one(plans[i], mode, parts, config);
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  if (out.records.empty()) {
    out.report = evalkit::empty_report();
    return out;
  }
  std::vector<evalkit::QueryScore> scores;
  scores.reserve(out.records.size());
  for (const auto& r : out.records) scores.push_back({r.query_id, r.em, r.f1, r.acc, r.corrupted});
  out.report = evalkit::aggregate(std::move(scores));
  return out;
}

std::vector<QueryPlan> plain_plans(const std::vector<QueryRecord>& dataset) {
  datakit::validate_unique_ids(dataset);
  std::vector<QueryPlan> plans;
  plans.reserve(dataset.size());
  for (const auto& r : dataset) plans.push_back({&r, r.question, r.question});
  return plans;
}

}  // namespace

RunOutput run_standard_rag(const std::vector<QueryRecord>& dataset, const Components& parts, const PipelineConfig& config) {
  return execute(plain_plans(dataset), Mode::kStandard, parts, config);
}

RunOutput run_qer_rag(const std::vector<QueryRecord>& dataset, const Components& parts, const PipelineConfig& config) {
  return execute(plain_plans(dataset), Mode::kStandard, parts, config);
}

RunOutput run_ra_qcg(const std::vector<QueryRecord>& dataset, const Components& parts, const PipelineConfig& config) {
  if (parts.corrector == nullptr) fail(ErrorKind::kConfig, "RA-QCG needs a corrector");
  return execute(plain_plans(dataset), Mode::kCorrect, parts, config);
}

std::array<RunOutput, 4> run_quadrant(const std::vector<QueryRecord>& dataset, const Components& parts,
                                      const PipelineConfig& config) {
  datakit::validate_unique_ids(dataset);
  std::array<RunOutput, 4> out;
  for (QuadrantArm arm : kQuadrantArms) {
    const bool original_docs = arm == QuadrantArm::kQeDc || arm == QuadrantArm::kQcDc;
    const bool original_query = arm == QuadrantArm::kQcDe || arm == QuadrantArm::kQcDc;
    std::vector<QueryPlan> plans;
    for (const auto& r : dataset) {
      if (!r.corrupted()) continue;
      plans.push_back({&r, original_docs ? r.original_question() : r.question,
                       original_query ? r.original_question() : r.question});
    }
    out[static_cast<std::size_t>(arm)] = execute(plans, Mode::kStandard, parts, config);
  }
  return out;
}

namespace {

ordered_json hits_json(const std::vector<Hit>& hits) {
  ordered_json a = ordered_json::array();
  for (const auto& h : hits) a.push_back({{"doc_id", h.doc_id}, {"score", h.score}});
  return a;
}

std::vector<Hit> hits_from_json(const ordered_json& a) {
  std::vector<Hit> hits;
  for (const auto& h : a) hits.push_back({h.at("doc_id").get<std::string>(), h.at("score").get<double>()});
  return hits;
}

ordered_json number_or_null(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

}  // namespace

ordered_json to_json(const RunRecord& r) {
  ordered_json j;
  j["query_id"] = r.query_id;
  j["question"] = r.question;
  j["corrupted"] = r.corrupted;
  j["retrieval_query"] = r.retrieval_query;
  j["retrieved"] = hits_json(r.retrieved);
  j["first_stage"] = r.first_stage ? hits_json(*r.first_stage) : ordered_json(nullptr);
  j["corrected_query"] = r.corrected_query ? ordered_json(*r.corrected_query) : ordered_json(nullptr);
  ordered_json changes = ordered_json::array();
  for (const auto& c : r.corrections) {
    changes.push_back({{"token_index", c.token_index}, {"original", c.original}, {"corrected", c.corrected},
                       {"score_margin", number_or_null(c.score_margin)}});
  }
  j["corrections"] = std::move(changes);
  j["generation_query"] = r.generation_query;
  j["answer"] = r.answer;
  j["truncated_units"] = r.truncated_units;
  j["em"] = r.em;
  j["f1"] = r.f1;
  j["acc"] = r.acc;
  j["failed"] = r.failed;
  j["error"] = r.error;
  return j;
}

RunRecord run_record_from_json(const ordered_json& j) {
  RunRecord r;
  try {
    r.query_id = j.at("query_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.corrupted = j.at("corrupted").get<bool>();
    r.retrieval_query = j.at("retrieval_query").get<std::string>();
    r.retrieved = hits_from_json(j.at("retrieved"));
    if (!j.at("first_stage").is_null()) r.first_stage = hits_from_json(j.at("first_stage"));
    if (!j.at("corrected_query").is_null()) r.corrected_query = j.at("corrected_query").get<std::string>();
    for (const auto& c : j.at("corrections")) {
      const auto& m = c.at("score_margin");
      r.corrections.push_back({c.at("token_index").get<std::size_t>(), c.at("original").get<std::string>(),
                               c.at("corrected").get<std::string>(),
                               m.is_null() ? std::numeric_limits<double>::infinity() : m.get<double>()});
    }
    r.generation_query = j.at("generation_query").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.truncated_units = j.at("truncated_units").get<std::size_t>();
    r.em = j.at("em").get<int>();
    r.f1 = j.at("f1").get<double>();
    r.acc = j.at("acc").get<int>();
    r.failed = j.at("failed").get<bool>();
    r.error = j.at("error").get<std::string>();
  } catch (const ordered_json::exception& e) {
    fail(ErrorKind::kSchema, std::string("bad run record: ") + e.what());
  }
  return r;
}

void save_run_records(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

std::vector<RunRecord> load_run_records(const std::filesystem::path& path) {
  std::istringstream in(textnoise::read_text_file(path));
  std::vector<RunRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::kSchema, "line " + std::to_string(line_no) + ": not valid JSON");
    try {
      records.push_back(run_record_from_json(j));
    } catch (const Error& e) {
      fail(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

evalkit::EvalReport evaluate_records(const std::vector<RunRecord>& records, const std::vector<QueryRecord>& dataset) {
  std::map<std::string, const QueryRecord*> by_id;
  for (const auto& r : dataset) by_id[r.id] = &r;
  std::vector<evalkit::QueryScore> scores;
  for (const auto& r : records) {
    auto it = by_id.find(r.query_id);
    if (it == by_id.end()) fail(ErrorKind::kValidation, "run record '" + r.query_id + "' is not in the dataset");
    scores.push_back(evalkit::score_query(r.query_id, r.answer, it->second->golden_answers, it->second->corrupted()));
  }
  if (scores.empty()) return evalkit::empty_report();
  return evalkit::aggregate(std::move(scores));
}

}  // namespace noisyrag::pipelines
