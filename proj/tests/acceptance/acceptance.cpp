// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "checks/dense_oracle.hpp"
#include "checks/metric_oracle.hpp"
#include "cli_app.hpp"
#include "noisyrag/datakit/corrupt_dataset.hpp"
#include "noisyrag/datakit/synthetic.hpp"
#include "noisyrag/pipelines/benchmark.hpp"
#include "noisyrag/pipelines/pipelines.hpp"
#include "noisyrag/retrieval/trainer.hpp"
#include "noisyrag/text.hpp"
#include "support.hpp"

using namespace noisyrag;
using datakit::QueryRecord;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

std::string num(double x, int digits = 3) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

const textnoise::NoiseTables& tables() { return noisyrag::testing::tables(); }
const correction::BaseLexicon& lexicon() { return noisyrag::testing::lexicon(); }

// Shared synthetic setup: 200 docs, 100 evaluation queries at 20% corruption,
// and a dense retriever trained on clean plus corrupted training questions.
struct Bench {
  datakit::SyntheticBenchmark synthetic;
  std::vector<QueryRecord> eval;
  std::map<std::string, std::string> qrels;
  std::optional<retrieval::DenseModeld> untrained;
  std::optional<retrieval::DenseModeld> trained;
  double train_seconds = 0.0;
};

constexpr std::uint64_t kEvalCorruptionSeed = 7;
constexpr std::uint64_t kInitSeed = 11;
constexpr std::uint64_t kHardNegativeSeed = 5;
constexpr std::uint64_t kTrainSeed = 3;
constexpr std::uint64_t kAugmentSeed = 1000;
constexpr std::size_t kAugmentVariants = 4;

Bench& bench() {
  static Bench b = [] {
    Bench out;
    out.synthetic = datakit::generate_synthetic(datakit::SyntheticConfig{}, pipelines::corrector_safe_names(lexicon(), tables()));
    textnoise::CorruptionSpec spec;
    spec.seed = kEvalCorruptionSeed;
    out.eval = datakit::corrupt_dataset(out.synthetic.eval_queries, 0.2, spec, tables()).first;
    for (const auto& q : out.synthetic.qrels) out.qrels[q.query_id] = q.doc_id;
    return out;
  }();
  return b;
}

void train_models(Bench& b) {
  if (b.trained) return;
  const auto t0 = Clock::now();
  b.untrained = retrieval::DenseModeld::random(retrieval::HashingConfig{}, 128, 0.05, kInitSeed, 0.1);
  auto queries = b.synthetic.train_queries;
  textnoise::CorruptionSpec spec;
  spec.seed = kAugmentSeed;
  const auto extra = datakit::corrupted_variants(queries, kAugmentVariants, spec, tables());
  queries.insert(queries.end(), extra.begin(), extra.end());
  std::vector<retrieval::TrainPair> pairs;
  for (const auto& r : queries) pairs.push_back({r.id, r.question, b.qrels.at(r.id.substr(0, r.id.find("#v")))});
  const auto triples = retrieval::attach_hard_negatives(pairs, b.synthetic.corpus, kHardNegativeSeed);
  retrieval::TrainConfig config;
  config.learning_rate = 3.0;
  config.batch_size = 64;
  config.epochs = 5;
  config.seed = kTrainSeed;
  b.trained = retrieval::train_retriever(*b.untrained, triples, b.synthetic.corpus, config).model;
  b.train_seconds = seconds_since(t0);
}

std::vector<QueryRecord> only(const std::vector<QueryRecord>& records, bool corrupted) {
  std::vector<QueryRecord> out;
  for (const auto& r : records) {
    if (r.corrupted() == corrupted) out.push_back(r);
  }
  return out;
}

double recall_at(const pipelines::Retriever& retriever, const std::vector<QueryRecord>& records,
                 const std::map<std::string, std::string>& qrels, std::size_t k) {
  std::size_t hits = 0;
  for (const auto& r : records) {
    for (const auto& h : retriever.retrieve(r.question, k)) hits += h.doc_id == qrels.at(r.id) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::string generation_template() {
  return textnoise::read_text_file(textnoise::default_data_dir() / "prompts" / "generation.txt");
}

// ---------------------------------------------------------------------------

Verdict criterion_1() {
  const auto t0 = Clock::now();
  std::vector<QueryRecord> records;
  const char* words[] = {"who", "founded", "the", "largest", "company", "river", "mountain", "orchestra"};
  for (int i = 0; i < 1000; ++i) {
    std::string q = std::string(words[i % 8]) + " " + words[(i / 8) % 8] + " " + words[(i / 64) % 8] + " number " +
                    std::to_string(i);
    records.push_back({"q" + std::to_string(i), q, {"a" + std::to_string(i)}, {}});
  }
  const auto m20 = datakit::corrupt_dataset(records, 0.2, {}, tables()).second;
  const auto m40 = datakit::corrupt_dataset(records, 0.4, {}, tables()).second;
  const double secs = seconds_since(t0);
  const bool ok20 = m20.counts.corrupted == 200 && m20.counts.per_error_type == std::array<std::size_t, 3>{120, 40, 40};
  const bool ok40 = m40.counts.corrupted == 400 && m40.counts.per_error_type == std::array<std::size_t, 3>{240, 80, 80};
  auto fmt = [](const datakit::DatasetManifest& m) {
    return std::to_string(m.counts.corrupted) + " (" + std::to_string(m.counts.per_error_type[0]) + "/" +
           std::to_string(m.counts.per_error_type[1]) + "/" + std::to_string(m.counts.per_error_type[2]) + ")";
  };
  return {ok20 && ok40 && secs < 5.0, "rate 0.2 -> " + fmt(m20) + ", rate 0.4 -> " + fmt(m40) + ", " + num(secs) + " s"};
}

Verdict criterion_2() {
  const auto clean = datakit::load_dataset(textnoise::default_data_dir() / "toy" / "queries.jsonl");
  const auto noisy = datakit::corrupt_dataset(clean, 0.4, {}, tables()).first;
  const double a = datakit::compute_stats(clean).avg_words_per_query;
  const double b = datakit::compute_stats(noisy).avg_words_per_query;
  bool tokens_equal = clean.size() == 100;
  for (std::size_t i = 0; i < clean.size() && i < noisy.size(); ++i) {
    tokens_equal = tokens_equal &&
                   text::count_whitespace_tokens(clean[i].question) == text::count_whitespace_tokens(noisy[i].question);
  }
  const double rel = std::abs(a - b) / a;
  return {rel < 0.05 && tokens_equal, "avg words " + num(a, 4) + " -> " + num(b, 4) + " (relative change " + pct(rel) +
                                          "%), per-query token counts " + (tokens_equal ? "preserved" : "CHANGED")};
}

Verdict criterion_3() {
  std::size_t bad = 0;
  for (const auto& c : checks::metric_cases()) {
    if (evalkit::exact_match(c.prediction, c.golds) != c.em) ++bad;
    if (std::abs(evalkit::token_f1(c.prediction, c.golds) - c.f1) > 1e-9) ++bad;
    if (evalkit::accuracy(c.prediction, c.golds) != c.acc) ++bad;
  }
  const auto props = checks::check_metric_properties(10000, 2024);
  return {checks::metric_cases().size() >= 20 && bad == 0 && props.violations == 0 && props.cases == 10000,
          std::to_string(checks::metric_cases().size()) + " hand cases, " + std::to_string(bad) + " mismatches; " +
              std::to_string(props.cases) + " randomized cases, " + std::to_string(props.violations) + " violations" +
              (props.violations ? " (" + props.first_violation + ")" : "")};
}

Verdict criterion_4() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) worst = std::max(worst, checks::gradient_relative_error(seed));
  double closed = std::abs(checks::equal_similarity_loss(2, true) - std::log(2.0));
  for (std::size_t b : {2u, 4u, 8u, 16u}) {
    closed = std::max(closed, std::abs(checks::equal_similarity_loss(b, false) - std::log(1.0 + static_cast<double>(b))));
  }
  const double orth = checks::orthogonal_pair_loss();
  closed = std::max(closed, std::isnan(orth) ? 1.0 : std::abs(orth - std::log(1.0 + std::exp(-1.0))));
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && closed <= 1e-9 && secs < 30.0,
          "100 models, worst gradient relative error " + num(worst) + "; closed-form error " + num(closed) + "; " +
              num(secs) + " s"};
}

Verdict criterion_5() {
  auto& b = bench();
  const auto t0 = Clock::now();
  train_models(b);
  const pipelines::DenseRetriever untrained(*b.untrained, b.synthetic.corpus);
  const pipelines::DenseRetriever trained(*b.trained, b.synthetic.corpus);
  const auto noisy = only(b.eval, true);
  const auto clean = only(b.eval, false);
  const double u_noisy = recall_at(untrained, noisy, b.qrels, 3), t_noisy = recall_at(trained, noisy, b.qrels, 3);
  const double u_clean = recall_at(untrained, clean, b.qrels, 3), t_clean = recall_at(trained, clean, b.qrels, 3);
  const double secs = seconds_since(t0);
  return {noisy.size() == 20 && t_noisy - u_noisy >= 0.10 && u_clean - t_clean <= 0.02 && secs < 120.0,
          "recall@3 corrupted " + pct(u_noisy) + " -> " + pct(t_noisy) + ", clean " + pct(u_clean) + " -> " +
              pct(t_clean) + " (untrained -> trained), train+eval " + num(secs) + " s"};
}

Verdict criterion_6() {
  auto& b = bench();
  const pipelines::LexicalRetriever retriever(b.synthetic.corpus);
  const auto generator = pipelines::StubGenerator::from_dataset(b.eval);
  pipelines::PipelineConfig config;
  config.generation_template = generation_template();
  const auto arms = pipelines::run_quadrant(b.eval, {&retriever, &generator, nullptr, nullptr}, config);
  auto f1 = [&](pipelines::QuadrantArm a) { return arms[static_cast<std::size_t>(a)].report.corrupted.f1; };
  using pipelines::QuadrantArm;
  const double qede = f1(QuadrantArm::kQeDe), qedc = f1(QuadrantArm::kQeDc), qcde = f1(QuadrantArm::kQcDe),
               qcdc = f1(QuadrantArm::kQcDc);
  const bool ok = qcdc >= qedc && qedc >= qede && qcdc >= qcde && qcde >= qede && qcdc - qede >= 0.10 &&
                  arms[0].report.corrupted.n == 20;
  return {ok, "corrupted-subset F1: QE-DE " + pct(qede) + ", QE-DC " + pct(qedc) + ", QC-DE " + pct(qcde) + ", QC-DC " +
                  pct(qcdc)};
}

Verdict criterion_7() {
  auto& b = bench();
  train_models(b);
  const pipelines::DenseRetriever retriever(*b.trained, b.synthetic.corpus);
  std::size_t eligible = 0, restored = 0;
  for (const auto& r : only(b.eval, true)) {
    std::vector<retrieval::Document> docs;
    for (const auto& h : retriever.retrieve(r.question, 3)) docs.push_back(retriever.document(h.doc_id));
    std::set<std::string> vocab;
    for (const auto& d : docs) {
      for (auto& w : text::word_tokens(d.contents)) vocab.insert(std::move(w));
    }
    correction::CorrectionContext ctx;
    ctx.query = r.question;
    ctx.retrieved_docs = docs;
    ctx.base_lexicon = &lexicon();
    ctx.keyboard = &tables().keyboard;
    ctx.visual = &tables().visual;
    const auto result = correction::correct_query(ctx);
    const auto out_tokens = text::split_whitespace(result.corrected_query);
    for (const auto& e : r.corruption->edits) {
      const auto words = text::word_tokens(e.original);
      if (words.size() != 1 || !vocab.count(words[0])) continue;
      ++eligible;
      restored += out_tokens.at(e.word_index) == e.original ? 1 : 0;
    }
  }
  // Clean queries built from base-lexicon words only.
  std::size_t clean_queries = 0, changed_tokens = 0;
  Rng rng(77);
  const auto& words = noisyrag::testing::sorted_lexicon();
  const std::size_t pool = std::min<std::size_t>(words.size(), 20000);
  for (int i = 0; i < 500; ++i) {
    std::string q;
    const std::size_t len = 3 + uniform_index(rng, 6);
    for (std::size_t w = 0; w < len; ++w) q += (w ? " " : "") + words[uniform_index(rng, pool)];
    correction::CorrectionContext ctx;
    ctx.query = q;
    ctx.base_lexicon = &lexicon();
    ctx.keyboard = &tables().keyboard;
    ctx.visual = &tables().visual;
    const auto doc_pick = uniform_index(rng, b.synthetic.corpus.size());
    ctx.retrieved_docs = {b.synthetic.corpus.at(doc_pick)};
    changed_tokens += correction::correct_query(ctx).changed.size();
    ++clean_queries;
  }
  const double rate = eligible ? static_cast<double>(restored) / static_cast<double>(eligible) : 0.0;
  return {eligible > 0 && rate >= 0.80 && changed_tokens == 0,
          "restored " + std::to_string(restored) + "/" + std::to_string(eligible) + " corrupted tokens (" + pct(rate) +
              "%); " + std::to_string(clean_queries) + " lexicon-only queries, " + std::to_string(changed_tokens) +
              " tokens changed"};
}

Verdict criterion_8() {
  auto& b = bench();
  train_models(b);
  const pipelines::LexicalRetriever lexical(b.synthetic.corpus);
  const pipelines::DenseRetriever dense(*b.trained, b.synthetic.corpus);
  const auto generator = pipelines::StubGenerator::from_dataset(b.eval);
  const pipelines::GroundedCorrector corrector(lexicon(), tables());
  pipelines::PipelineConfig config;
  config.generation_template = generation_template();
  const auto standard = pipelines::run_standard_rag(b.eval, {&lexical, &generator, nullptr, nullptr}, config);
  const auto ra = pipelines::run_ra_qcg(b.eval, {&lexical, &generator, &corrector, &dense}, config);
  const double gain = ra.report.overall.f1 - standard.report.overall.f1;
  const double clean_gap = std::abs(ra.report.clean.f1 - standard.report.clean.f1);
  return {gain >= 0.05 && clean_gap <= 0.01,
          "overall F1 standard " + pct(standard.report.overall.f1) + ", RA-QCG " + pct(ra.report.overall.f1) +
              "; clean subset " + pct(standard.report.clean.f1) + " vs " + pct(ra.report.clean.f1)};
}

Verdict criterion_9() {
  datakit::SyntheticConfig sc;
  sc.pad_chars = 1100;
  const auto padded = datakit::generate_synthetic(sc, pipelines::corrector_safe_names(lexicon(), tables()));
  textnoise::CorruptionSpec spec;
  spec.seed = kEvalCorruptionSeed;
  const auto eval = datakit::corrupt_dataset(padded.eval_queries, 0.2, spec, tables()).first;
  std::map<std::string, std::string> qrels;
  for (const auto& q : padded.qrels) qrels[q.query_id] = q.doc_id;
  const pipelines::LexicalRetriever lexical(padded.corpus);
  const auto generator = pipelines::StubGenerator::from_dataset(eval);
  const pipelines::GroundedCorrector corrector(lexicon(), tables());
  const double clean_recall = recall_at(lexical, only(eval, false), qrels, 3);
  pipelines::PipelineConfig config;
  config.generation_template = generation_template();
  std::map<std::size_t, double> std_f1, ra_f1;
  std::size_t truncated_at_15 = 0;
  for (std::size_t k : {1u, 3u, 5u, 15u}) {
    config.k_docs = k;
    const auto s = pipelines::run_standard_rag(eval, {&lexical, &generator, nullptr, nullptr}, config);
    const auto r = pipelines::run_ra_qcg(eval, {&lexical, &generator, &corrector, nullptr}, config);
    std_f1[k] = s.report.overall.f1;
    ra_f1[k] = r.report.overall.f1;
    if (k == 15) {
      for (const auto& rec : s.records) truncated_at_15 += rec.truncated_units > 0 ? 1 : 0;
    }
  }
  bool ok = clean_recall == 1.0;
  std::string table;
  for (const auto& [arm, f1] : std::vector<std::pair<std::string, std::map<std::size_t, double>*>>{{"standard", &std_f1},
                                                                                                 {"RA-QCG", &ra_f1}}) {
    auto& m = *f1;
    ok = ok && m[3] >= m[1] && m[15] <= m[5];
    table += arm + " " + pct(m[1]) + "/" + pct(m[3]) + "/" + pct(m[5]) + "/" + pct(m[15]) + "; ";
  }
  for (std::size_t k : {1u, 3u, 5u, 15u}) ok = ok && ra_f1[k] >= std_f1[k];
  return {ok, "F1 at k=1/3/5/15: " + table + "clean recall@3 " + pct(clean_recall) + "%, prompts truncated at k=15: " +
                  std::to_string(truncated_at_15)};
}

std::string file_bytes(const std::filesystem::path& p) { return noisyrag::testing::slurp(p); }

Verdict criterion_10() {
  const std::string toy = (textnoise::default_data_dir() / "toy").string();
  std::vector<std::map<std::string, std::string>> outputs;
  std::string failure;
  for (int run = 0; run < 2 && failure.empty(); ++run) {
    noisyrag::testing::TempDir dir("determinism");
    const std::string d = dir.path().string();
    const std::vector<std::vector<std::string>> steps = {
        {"corrupt", "--in", toy + "/queries.jsonl", "--out", d + "/eval.jsonl", "--rate", "0.2", "--seed", "7"},
        {"retriever", "train", "--corpus", toy + "/corpus.jsonl", "--train", toy + "/train.jsonl", "--qrels",
         toy + "/qrels.jsonl", "--out", d + "/model.bin", "--lr", "3", "--epochs", "2", "--augment", "1", "--seed", "3"},
        {"run", "--pipeline", "ra-qcg", "--dataset", d + "/eval.jsonl", "--corpus", toy + "/corpus.jsonl", "--out-dir",
         d + "/run", "--correction-retriever", "dense", "--correction-retriever-model", d + "/model.bin", "--workers", "3"},
        {"eval", "--records", d + "/run/records.jsonl", "--dataset", d + "/eval.jsonl", "--out", d + "/eval_report.json"}};
    for (const auto& args : steps) {
      std::ostringstream out, err;
      if (cli::run_cli(args, out, err) != 0) {
        failure = args[0] + " failed: " + err.str();
        break;
      }
    }
    if (!failure.empty()) break;
    std::map<std::string, std::string> files;
    for (const char* f : {"eval.jsonl", "model.bin", "run/records.jsonl", "run/report.json", "eval_report.json"}) {
      files[f] = file_bytes(dir / f);
    }
    files["manifest"] = file_bytes(datakit::manifest_path_for(dir / "eval.jsonl"));
    outputs.push_back(std::move(files));
  }
  if (!failure.empty()) return {false, failure};
  std::size_t differing = 0;
  for (const auto& [name, bytes] : outputs[0]) differing += (bytes.empty() || outputs[1].at(name) != bytes) ? 1 : 0;

  // dense_search against brute force on every corpus used above.
  auto& b = bench();
  train_models(b);
  std::vector<std::string> queries;
  for (const auto& r : b.eval) queries.push_back(r.question);
  queries.resize(30);
  std::size_t mismatches = checks::dense_search_mismatches(*b.trained, b.synthetic.corpus, queries);
  mismatches += checks::dense_search_mismatches(*b.untrained, b.synthetic.corpus, queries);
  const auto toy_model = retrieval::DenseModeld::random(retrieval::HashingConfig{}, 32, 0.05, 21);
  mismatches += checks::dense_search_mismatches(toy_model, retrieval::load_corpus(toy + "/corpus.jsonl"), queries);
  return {differing == 0 && mismatches == 0,
          std::to_string(outputs[0].size()) + " artifacts compared, " + std::to_string(differing) +
              " differ; dense_search vs brute force: " + std::to_string(mismatches) + " mismatches over 3 corpora x " +
              std::to_string(queries.size()) + " queries x k in {1,3,5,15}"};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"corruption quota exactness", criterion_1},
      {"query length preserved under corruption", criterion_2},
      {"metric oracle and properties", criterion_3},
      {"contrastive loss gradient and closed forms", criterion_4},
      {"trained retriever robustness", criterion_5},
      {"quadrant ordering", criterion_6},
      {"grounded correction quality and guard", criterion_7},
      {"RA-QCG beats standard RAG", criterion_8},
      {"document-count sweep shape", criterion_9},
      {"determinism and dense search oracle", criterion_10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << ": " << criteria[i].first << " -- "
              << v.detail << " [" << num(seconds_since(t0)) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed;
}
