#include "cli_app.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "noisyrag/correction/corrector.hpp"
#include "noisyrag/datakit/corrupt_dataset.hpp"
#include "noisyrag/datakit/synthetic.hpp"
#include "noisyrag/error.hpp"
#include "noisyrag/pipelines/benchmark.hpp"
#include "noisyrag/pipelines/pipelines.hpp"
#include "noisyrag/retrieval/model_io.hpp"
#include "noisyrag/retrieval/trainer.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct SynthOpts {
  std::string out_dir;
  std::size_t docs = 200;
  std::size_t queries = 100;
  std::size_t phrasings = 4;
  std::size_t pad_chars = 0;
  std::uint64_t seed = 13;
};

struct CorruptOpts {
  std::string in, out, name, source_name, quota = "exact";
  double rate = 0.2;
  std::uint64_t seed = 0;
  std::vector<unsigned> weights = {3, 1, 1};
  double word_prob = 0.3, char_prob = 0.3;
  unsigned min_word_len = 3, max_attempts = 16;
};

struct IndexOpts {
  std::string corpus, out;
  double k1 = 1.2, b = 0.75;
};

struct TrainOpts {
  std::string corpus, train, qrels, out, loss_curve;
  double lr = 2e-5, momentum = 0.0, tau = 0.05, init_scale = 0.1;
  std::size_t batch_size = 64, epochs = 1, dim = 128, augment = 0;
  unsigned log2_buckets = 18;
  std::vector<unsigned> ngrams = {3, 4};
  std::uint64_t seed = 0;
};

struct RetrieverOpts {
  std::string kind = "lexical";
  std::string index, model;
};

struct REvalOpts {
  std::string model, corpus, dataset, qrels;
  std::size_t recall_at = 3;
};

struct RetrieveOpts {
  std::string corpus, query;
  RetrieverOpts retriever;
  std::size_t k = 3;
};

struct CorrectOpts {
  std::string in, out, corpus, external, model_name = "default", prompt;
  RetrieverOpts retriever;
  std::size_t k = 3;
};

struct RunOpts {
  std::string pipeline = "standard";
  std::string dataset, corpus, out_dir, base_url, model_name = "default", prompt, correction_prompt;
  RetrieverOpts retriever;
  RetrieverOpts correction_retriever{"", "", ""};
  std::string generator = "stub";
  std::string corrector = "grounded";
  std::size_t k = 3, correction_k = 3, max_input = 4096;
  bool single_stage = false;
  unsigned workers = 1;
  std::uint64_t seed = 0;
  std::vector<std::size_t> ks = {1, 3, 5, 15};
};

struct EvalOpts {
  std::string records, dataset, out;
};

struct ReportOpts {
  std::vector<std::string> runs, names;
  std::string out;
};

struct StatsOpts {
  std::string in;
};

struct Options {
  std::string config;
  std::string log_level = "warn";
  std::string data_dir;
  SynthOpts synth;
  CorruptOpts corrupt;
  StatsOpts stats;
  IndexOpts index;
  TrainOpts train;
  REvalOpts reval;
  RetrieveOpts retrieve;
  CorrectOpts correct;
  RunOpts run;
  EvalOpts eval;
  ReportOpts report;
  RunOpts sweep;
};

/// Options that may also come from the environment or the config file.
struct Layers {
  std::map<const CLI::Option*, std::string> env;
  std::map<const CLI::App*, std::vector<CLI::Option*>> required;
};

CLI::Option* req(Layers& layers, CLI::App* app, CLI::Option* opt) {
  layers.required[app].push_back(opt);
  return opt;
}

CLI::Option* env(Layers& layers, CLI::Option* opt, std::string name) {
  layers.env[opt] = std::move(name);
  return opt;
}

const std::vector<std::string> kRetrieverKinds = {"lexical", "dense"};

void add_retriever_options(CLI::App* cmd, RetrieverOpts& r, const std::string& prefix, const std::string& what) {
  cmd->add_option("--" + prefix, r.kind, "Retriever kind for " + what)->check(CLI::IsMember({"", "lexical", "dense"}));
  cmd->add_option("--" + (prefix == "retriever" ? std::string() : prefix + "-") + "index", r.index,
                  "Lexical index file for the " + what + " retriever (built from the corpus when empty)");
  cmd->add_option("--" + (prefix == "retriever" ? std::string() : prefix + "-") + "model", r.model,
                  "Dense model file for the " + what + " retriever");
}

void add_pipeline_options(CLI::App* cmd, RunOpts& o, Layers& layers, bool sweep) {
  cmd->add_option("--pipeline", o.pipeline, "Pipeline to run")
      ->check(CLI::IsMember(sweep ? std::vector<std::string>{"standard", "qer", "ra-qcg"}
                                  : std::vector<std::string>{"standard", "qer", "ra-qcg", "quadrant"}));
  req(layers, cmd, cmd->add_option("--dataset", o.dataset, "Query dataset (required)"));
  req(layers, cmd, cmd->add_option("--corpus", o.corpus, "Corpus file (required)"));
  req(layers, cmd, cmd->add_option("--out-dir", o.out_dir, "Run folder for records, report and config (required)"));
  add_retriever_options(cmd, o.retriever, "retriever", "generation");
  add_retriever_options(cmd, o.correction_retriever, "correction-retriever", "RA-QCG first-stage");
  cmd->add_option("--k", o.k, "Documents retrieved for generation")->check(CLI::PositiveNumber);
  cmd->add_option("--correction-k", o.correction_k, "Documents shown to the corrector")->check(CLI::PositiveNumber);
  cmd->add_option("--max-input", o.max_input, "Maximum prompt length in characters")->check(CLI::PositiveNumber);
  cmd->add_flag("--single-stage", o.single_stage, "RA-QCG: skip the second retrieval");
  cmd->add_option("--generator", o.generator, "Answer generator")->check(CLI::IsMember({"stub", "external"}));
  cmd->add_option("--corrector", o.corrector, "RA-QCG corrector")->check(CLI::IsMember({"grounded", "external"}));
  env(layers, cmd->add_option("--base-url", o.base_url, "Chat-completions endpoint for external components"),
      "NOISYRAG_BASE_URL");
  cmd->add_option("--model-name", o.model_name, "Model name sent to the endpoint");
  cmd->add_option("--prompt", o.prompt, "Generation prompt template (bundled one when empty)");
  cmd->add_option("--correction-prompt", o.correction_prompt, "Correction prompt template (bundled one when empty)");
  env(layers, cmd->add_option("--workers", o.workers, "Parallel queries")->check(CLI::PositiveNumber),
      "NOISYRAG_WORKERS");
  env(layers, cmd->add_option("--seed", o.seed, "Seed recorded with the run"), "NOISYRAG_SEED");
  if (sweep) cmd->add_option("--ks", o.ks, "Document counts to sweep")->delimiter(',');
}

void build_app(CLI::App& app, Options& o, Layers& layers) {
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "noisyrag 1.0.0");
  app.add_option("--config", o.config, "INI/TOML config file; [command] sections apply to one command");
  app.add_option("--log-level", o.log_level, "Log level")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  env(layers, app.add_option("--data-dir", o.data_dir, "Directory with tables, lexicon and prompts (bundled when empty)"),
      "NOISYRAG_DATA_DIR");

  auto* synth = app.add_subcommand("synth", "Generate the synthetic entity benchmark");
  req(layers, synth, synth->add_option("--out-dir", o.synth.out_dir, "Output folder (required)"));
  synth->add_option("--docs", o.synth.docs, "Number of documents")->check(CLI::PositiveNumber);
  synth->add_option("--queries", o.synth.queries, "Number of evaluation queries");
  synth->add_option("--phrasings", o.synth.phrasings, "Training questions per document")->check(CLI::Range(0, 4));
  synth->add_option("--pad-chars", o.synth.pad_chars, "Pad documents with filler to this many characters");
  env(layers, synth->add_option("--seed", o.synth.seed, "Generator seed"), "NOISYRAG_SEED");

  auto* corrupt = app.add_subcommand("corrupt", "Inject query entry errors into a clean dataset");
  req(layers, corrupt, corrupt->add_option("--in", o.corrupt.in, "Clean dataset (required)"));
  req(layers, corrupt, corrupt->add_option("--out", o.corrupt.out, "Output dataset; the manifest goes next to it (required)"));
  corrupt->add_option("--rate", o.corrupt.rate, "Fraction of queries to corrupt")->check(CLI::Range(0.0, 1.0));
  env(layers, corrupt->add_option("--seed", o.corrupt.seed, "Corruption seed"), "NOISYRAG_SEED");
  corrupt->add_option("--weights", o.corrupt.weights, "Spelling,keyboard,visual weights")->delimiter(',')->expected(3);
  corrupt->add_option("--word-prob", o.corrupt.word_prob, "Word selection probability")->check(CLI::Range(0.0, 1.0));
  corrupt->add_option("--char-prob", o.corrupt.char_prob, "Character corruption probability")->check(CLI::Range(0.0, 1.0));
  corrupt->add_option("--min-word-len", o.corrupt.min_word_len, "Minimum letters for a word to be eligible")
      ->check(CLI::PositiveNumber);
  corrupt->add_option("--max-attempts", o.corrupt.max_attempts, "Resampling attempts per query")->check(CLI::PositiveNumber);
  corrupt->add_option("--quota", o.corrupt.quota, "Selection mode")->check(CLI::IsMember({"exact", "bernoulli"}));
  corrupt->add_option("--name", o.corrupt.name, "Dataset name for the manifest");
  corrupt->add_option("--source-name", o.corrupt.source_name, "Source dataset label for the manifest");

  auto* stats = app.add_subcommand("stats", "Average characters and words per query");
  req(layers, stats, stats->add_option("--in", o.stats.in, "Dataset (required)"));

  auto* index = app.add_subcommand("index", "Lexical index commands");
  index->require_subcommand(1);
  auto* build = index->add_subcommand("build", "Build a BM25 index");
  req(layers, build, build->add_option("--corpus", o.index.corpus, "Corpus file (required)"));
  req(layers, build, build->add_option("--out", o.index.out, "Index file (required)"));
  build->add_option("--k1", o.index.k1, "BM25 k1")->check(CLI::NonNegativeNumber);
  build->add_option("--b", o.index.b, "BM25 b")->check(CLI::Range(0.0, 1.0));

  auto* retriever = app.add_subcommand("retriever", "Dense retriever commands");
  retriever->require_subcommand(1);
  auto* train = retriever->add_subcommand("train", "Train the dense retriever contrastively");
  auto& t = o.train;
  req(layers, train, train->add_option("--corpus", t.corpus, "Corpus file (required)"));
  req(layers, train, train->add_option("--train", t.train, "Training queries (required)"));
  req(layers, train, train->add_option("--qrels", t.qrels, "Query to document relevance file (required)"));
  req(layers, train, train->add_option("--out", t.out, "Model file (required)"));
  train->add_option("--lr", t.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  train->add_option("--batch-size", t.batch_size, "Batch size")->check(CLI::Range(2, 1 << 20));
  train->add_option("--epochs", t.epochs, "Epochs")->check(CLI::PositiveNumber);
  train->add_option("--momentum", t.momentum, "SGD momentum")->check(CLI::Range(0.0, 0.999999));
  train->add_option("--tau", t.tau, "Temperature")->check(CLI::PositiveNumber);
  train->add_option("--dim", t.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  train->add_option("--log2-buckets", t.log2_buckets, "Hashed feature buckets, as a power of two")->check(CLI::Range(1, 26));
  train->add_option("--ngrams", t.ngrams, "Character n-gram sizes")->delimiter(',');
  train->add_option("--init-scale", t.init_scale, "Initial weights are uniform in [-s, s]")->check(CLI::PositiveNumber);
  train->add_option("--augment", t.augment, "Corrupted copies added per training query");
  train->add_option("--loss-curve", t.loss_curve, "Write the per-step loss here");
  env(layers, train->add_option("--seed", t.seed, "Initialization, shuffling and hard-negative seed"), "NOISYRAG_SEED");

  auto* reval = retriever->add_subcommand("eval", "Recall of a dense model");
  req(layers, reval, reval->add_option("--model", o.reval.model, "Model file (required)"));
  req(layers, reval, reval->add_option("--corpus", o.reval.corpus, "Corpus file (required)"));
  req(layers, reval, reval->add_option("--dataset", o.reval.dataset, "Query dataset (required)"));
  req(layers, reval, reval->add_option("--qrels", o.reval.qrels, "Relevance file (required)"));
  reval->add_option("--recall-at", o.reval.recall_at, "Cutoff k")->check(CLI::PositiveNumber);

  auto* retrieve = app.add_subcommand("retrieve", "Search the corpus for one query");
  req(layers, retrieve, retrieve->add_option("--corpus", o.retrieve.corpus, "Corpus file (required)"));
  req(layers, retrieve, retrieve->add_option("--query", o.retrieve.query, "Query text (required)"));
  add_retriever_options(retrieve, o.retrieve.retriever, "retriever", "search");
  retrieve->add_option("--k", o.retrieve.k, "Results")->check(CLI::PositiveNumber);

  auto* correct = app.add_subcommand("correct", "Correct the queries of a dataset against retrieved documents");
  req(layers, correct, correct->add_option("--in", o.correct.in, "Dataset (required)"));
  req(layers, correct, correct->add_option("--out", o.correct.out, "Output dataset of corrected questions (required)"));
  req(layers, correct, correct->add_option("--corpus", o.correct.corpus, "Corpus file (required)"));
  add_retriever_options(correct, o.correct.retriever, "retriever", "evidence");
  correct->add_option("--k", o.correct.k, "Evidence documents per query")->check(CLI::PositiveNumber);
  env(layers, correct->add_option("--external", o.correct.external, "Chat-completions base URL; grounded corrector when empty"),
      "NOISYRAG_BASE_URL");
  correct->add_option("--model-name", o.correct.model_name, "Model name sent to the endpoint");
  correct->add_option("--prompt", o.correct.prompt, "Correction prompt template (bundled one when empty)");

  auto* run = app.add_subcommand("run", "Run a RAG pipeline and score it");
  add_pipeline_options(run, o.run, layers, false);

  auto* eval = app.add_subcommand("eval", "Score run records against a dataset");
  req(layers, eval, eval->add_option("--records", o.eval.records, "Run records file (required)"));
  req(layers, eval, eval->add_option("--dataset", o.eval.dataset, "Dataset with gold answers (required)"));
  eval->add_option("--out", o.eval.out, "Write the report here");

  auto* report = app.add_subcommand("report", "Merge run reports into one comparison table");
  req(layers, report, report->add_option("--runs", o.report.runs, "Run folders or report files (required)"));
  report->add_option("--names", o.report.names, "Row names (run folder names when empty)");
  report->add_option("--out", o.report.out, "Write the CSV here as well");

  auto* sweep = app.add_subcommand("sweep-k", "Run a pipeline at several document counts");
  add_pipeline_options(sweep, o.sweep, layers, true);
}

std::vector<std::string> section_path(const CLI::App* leaf) {
  std::vector<std::string> path;
  for (const CLI::App* a = leaf; a != nullptr && a->get_parent() != nullptr; a = a->get_parent()) {
    path.insert(path.begin(), a->get_name());
  }
  return path;
}

std::string key_of(const CLI::Option* opt) {
  std::string name = opt->get_single_name();
  for (char& c : name) {
    if (c == '_') c = '-';
  }
  return name;
}

/// Fills options not given on the command line: environment first, then the
/// config file (its [command] section over its top level).
void apply_layers(CLI::App& root, CLI::App* leaf, const Options& o, const Layers& layers) {
  std::map<std::string, std::vector<std::string>> general, specific;
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) fail(ErrorKind::kConfig, "config file not found: " + o.config);
    const auto path = section_path(leaf);
    for (const auto& item : CLI::ConfigINI().from_file(o.config)) {
      if (item.name == "++" || item.name == "--") continue;  // section markers
      std::string key = item.name;
      for (char& c : key) {
        if (c == '_') c = '-';
      }
      if (item.parents.empty()) {
        general[key] = item.inputs;
      } else if (item.parents == path) {
        specific[key] = item.inputs;
      }
    }
  }
  std::vector<CLI::App*> scopes = {leaf};
  if (leaf != &root) scopes.push_back(&root);
  for (CLI::App* scope : scopes) {
    for (CLI::Option* opt : scope->get_options()) {
      if (opt->count() > 0 || opt->get_name() == "--help" || opt->get_name() == "--version" ||
          opt->get_name() == "--config") {
        continue;
      }
      std::optional<std::vector<std::string>> value;
      if (auto it = layers.env.find(opt); it != layers.env.end()) {
        if (const char* v = std::getenv(it->second.c_str()); v != nullptr && *v != '\0') value = std::vector<std::string>{v};
      }
      const std::string key = key_of(opt);
      if (!value && scope == leaf) {
        if (auto it = specific.find(key); it != specific.end()) value = it->second;
      }
      if (!value) {
        if (auto it = general.find(key); it != general.end()) value = it->second;
      }
      if (!value) continue;
      std::vector<std::string> parts;
      for (const auto& v : *value) {
        if (opt->get_items_expected_max() > 1) {
          std::stringstream ss(v);
          std::string piece;
          while (std::getline(ss, piece, ',')) parts.push_back(piece);
        } else {
          parts.push_back(v);
        }
      }
      opt->add_result(parts);
      opt->run_callback();
    }
  }
  for (const auto& [key, unused] : specific) {
    if (leaf->get_option_no_throw("--" + key) == nullptr) {
      fail(ErrorKind::kConfig, "unknown key '" + key + "' in config section [" + text::join(section_path(leaf), ".") + "]");
    }
  }
  if (auto it = layers.required.find(leaf); it != layers.required.end()) {
    for (const CLI::Option* opt : it->second) {
      if (opt->count() == 0) fail(ErrorKind::kValidation, "missing required option " + opt->get_name());
    }
  }
}

fs::path data_dir(const Options& o) { return o.data_dir.empty() ? textnoise::default_data_dir() : fs::path(o.data_dir); }

std::string read_prompt(const Options& o, const std::string& path, const char* bundled) {
  return textnoise::read_text_file(path.empty() ? data_dir(o) / "prompts" / bundled : fs::path(path));
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << contents;
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

std::map<std::string, std::string> qrel_map(const fs::path& path) {
  std::map<std::string, std::string> out;
  for (auto& q : datakit::load_qrels(path)) out[q.query_id] = q.doc_id;
  return out;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const auto tables = textnoise::NoiseTables::load(data_dir(o));
  const auto lexicon = correction::BaseLexicon::load(data_dir(o) / "lexicon_en.txt");
  datakit::SyntheticConfig config;
  config.n_docs = o.synth.docs;
  config.n_eval_queries = o.synth.queries;
  config.train_phrasings = o.synth.phrasings;
  config.pad_chars = o.synth.pad_chars;
  config.seed = o.synth.seed;
  const auto bench = datakit::generate_synthetic(config, pipelines::corrector_safe_names(lexicon, tables));
  const fs::path dir = o.synth.out_dir;
  fs::create_directories(dir);
  retrieval::save_corpus(bench.corpus, dir / "corpus.jsonl");
  datakit::save_dataset(bench.eval_queries, dir / "queries.jsonl");
  datakit::save_dataset(bench.train_queries, dir / "train.jsonl");
  datakit::save_qrels(bench.qrels, dir / "qrels.jsonl");
  Json j;
  j["docs"] = bench.corpus.size();
  j["eval_queries"] = bench.eval_queries.size();
  j["train_queries"] = bench.train_queries.size();
  j["out_dir"] = dir.string();
  out << j.dump() << '\n';
  return 0;
}

int cmd_corrupt(const Options& o, std::ostream& out) {
  const auto& c = o.corrupt;
  const auto tables = textnoise::NoiseTables::load(data_dir(o));
  textnoise::CorruptionSpec spec;
  spec.word_select_prob = c.word_prob;
  spec.char_corrupt_prob = c.char_prob;
  if (c.weights.size() != 3) fail(ErrorKind::kValidation, "--weights needs three values");
  spec.type_weights = {c.weights[0], c.weights[1], c.weights[2]};
  spec.seed = c.seed;
  spec.min_word_len = c.min_word_len;
  spec.max_resample_attempts = c.max_attempts;
  datakit::CorruptDatasetOptions options;
  options.quota_mode = datakit::quota_mode_from_string(c.quota);
  options.name = c.name.empty() ? fs::path(c.out).stem().string() : c.name;
  options.source_name = c.source_name;
  const auto records = datakit::load_dataset(c.in);
  auto [corrupted, manifest] = datakit::corrupt_dataset(records, c.rate, spec, tables, options);
  datakit::save_dataset(corrupted, manifest, c.out);
  out << datakit::to_json(manifest).dump() << '\n';
  return 0;
}

int cmd_stats(const Options& o, std::ostream& out) {
  out << datakit::to_json(datakit::compute_stats(datakit::load_dataset(o.stats.in))).dump() << '\n';
  return 0;
}

int cmd_index_build(const Options& o, std::ostream& out) {
  const auto corpus = retrieval::load_corpus(o.index.corpus);
  const auto index = retrieval::build_lexical_index(corpus, {o.index.k1, o.index.b});
  retrieval::save_lexical_index(index, corpus, o.index.out);
  Json j;
  j["docs"] = index.num_docs();
  j["terms"] = index.terms().size();
  j["avg_doc_length"] = index.avg_doc_length();
  out << j.dump() << '\n';
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto& t = o.train;
  const auto corpus = retrieval::load_corpus(t.corpus);
  const auto qrels = qrel_map(t.qrels);
  auto queries = datakit::load_dataset(t.train);
  if (t.augment > 0) {
    const auto tables = textnoise::NoiseTables::load(data_dir(o));
    textnoise::CorruptionSpec spec;
    spec.seed = t.seed + 1000;
    auto extra = datakit::corrupted_variants(queries, t.augment, spec, tables);
    queries.insert(queries.end(), extra.begin(), extra.end());
  }
  std::vector<retrieval::TrainPair> pairs;
  for (const auto& r : queries) {
    const std::string base_id = r.id.substr(0, r.id.find("#v"));
    auto it = qrels.find(base_id);
    if (it == qrels.end()) fail(ErrorKind::kValidation, "no relevant document for training query '" + base_id + "'");
    pairs.push_back({r.id, r.question, it->second});
  }
  const auto triples = retrieval::attach_hard_negatives(pairs, corpus, t.seed);
  retrieval::HashingConfig hashing;
  hashing.ngram_sizes = t.ngrams;
  hashing.log2_buckets = t.log2_buckets;
  auto model = retrieval::DenseModeld::random(hashing, static_cast<Eigen::Index>(t.dim), t.tau, t.seed, t.init_scale);
  retrieval::TrainConfig config;
  config.learning_rate = t.lr;
  config.batch_size = t.batch_size;
  config.epochs = t.epochs;
  config.momentum = t.momentum;
  config.seed = t.seed;
  auto result = retrieval::train_retriever(std::move(model), triples, corpus, config);
  retrieval::save_dense_model(result.model, t.out);
  if (!t.loss_curve.empty()) {
    std::string curve = "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
      Json v = result.loss_curve[i];
      curve += std::to_string(i + 1) + "," + v.dump() + "\n";
    }
    write_file(t.loss_curve, curve);
  }
  Json j;
  j["examples"] = triples.size();
  j["steps"] = result.loss_curve.size();
  j["first_loss"] = result.loss_curve.empty() ? Json(nullptr) : Json(result.loss_curve.front());
  j["last_loss"] = result.loss_curve.empty() ? Json(nullptr) : Json(result.loss_curve.back());
  out << j.dump() << '\n';
  return 0;
}

std::unique_ptr<pipelines::Retriever> make_retriever(const RetrieverOpts& r, const std::string& corpus_path,
                                                     unsigned workers) {
  if (r.kind == "dense") {
    if (r.model.empty()) fail(ErrorKind::kValidation, "the dense retriever needs a model file");
    return std::make_unique<pipelines::DenseRetriever>(retrieval::load_dense_model(r.model),
                                                       retrieval::load_corpus(corpus_path), workers);
  }
  if (!r.index.empty()) {
    retrieval::Corpus corpus;
    auto index = retrieval::load_lexical_index(r.index, &corpus);
    return std::make_unique<pipelines::LexicalRetriever>(std::move(corpus), std::move(index));
  }
  return std::make_unique<pipelines::LexicalRetriever>(retrieval::load_corpus(corpus_path));
}

int cmd_retriever_eval(const Options& o, std::ostream& out) {
  const auto& e = o.reval;
  pipelines::DenseRetriever retriever(retrieval::load_dense_model(e.model), retrieval::load_corpus(e.corpus));
  const auto qrels = qrel_map(e.qrels);
  const auto dataset = datakit::load_dataset(e.dataset);
  std::array<std::size_t, 3> hits{}, totals{};  // overall, corrupted, clean
  for (const auto& r : dataset) {
    auto it = qrels.find(r.id);
    if (it == qrels.end()) fail(ErrorKind::kValidation, "no relevant document for query '" + r.id + "'");
    bool found = false;
    for (const auto& h : retriever.retrieve(r.question, e.recall_at)) found = found || h.doc_id == it->second;
    for (std::size_t s : {std::size_t{0}, r.corrupted() ? std::size_t{1} : std::size_t{2}}) {
      ++totals[s];
      hits[s] += found ? 1 : 0;
    }
  }
  Json j;
  j["k"] = e.recall_at;
  const char* names[] = {"overall", "corrupted", "clean"};
  for (std::size_t s = 0; s < 3; ++s) {
    j[names[s]] = {{"n", totals[s]},
                   {"recall", totals[s] == 0 ? Json(nullptr)
                                             : Json(static_cast<double>(hits[s]) / static_cast<double>(totals[s]))}};
  }
  out << j.dump() << '\n';
  return 0;
}

int cmd_retrieve(const Options& o, std::ostream& out) {
  const auto retriever = make_retriever(o.retrieve.retriever, o.retrieve.corpus, 1);
  for (const auto& h : retriever->retrieve(o.retrieve.query, o.retrieve.k)) {
    out << Json{{"doc_id", h.doc_id}, {"score", h.score}}.dump() << '\n';
  }
  return 0;
}

int cmd_correct(const Options& o, std::ostream& out) {
  const auto& c = o.correct;
  const auto retriever = make_retriever(c.retriever, c.corpus, 1);
  const auto tables = textnoise::NoiseTables::load(data_dir(o));
  const auto lexicon = correction::BaseLexicon::load(data_dir(o) / "lexicon_en.txt");
  std::unique_ptr<client::HttpChatClient> http;
  std::unique_ptr<pipelines::Corrector> corrector;
  if (c.external.empty()) {
    corrector = std::make_unique<pipelines::GroundedCorrector>(lexicon, tables);
  } else {
    http = std::make_unique<client::HttpChatClient>(client::HttpClientConfig::from_env(c.external));
    corrector = std::make_unique<pipelines::ExternalCorrector>(*http, read_prompt(o, c.prompt, "correction.txt"), c.model_name);
  }
  auto dataset = datakit::load_dataset(c.in);
  std::size_t changed_queries = 0, changed_tokens = 0;
  std::string log;
  for (auto& r : dataset) {
    std::vector<retrieval::Document> docs;
    for (const auto& h : retriever->retrieve(r.question, c.k)) docs.push_back(retriever->document(h.doc_id));
    auto result = corrector->correct(r.question, docs);
    Json line;
    line["id"] = r.id;
    line["question"] = r.question;
    line["corrected"] = result.corrected_query;
    Json changes = Json::array();
    for (const auto& ch : result.changed) {
      changes.push_back({{"token_index", ch.token_index}, {"original", ch.original}, {"corrected", ch.corrected},
                         {"score_margin", std::isfinite(ch.score_margin) ? Json(ch.score_margin) : Json(nullptr)}});
    }
    line["changed"] = std::move(changes);
    log += line.dump() + "\n";
    if (!result.changed.empty()) ++changed_queries;
    changed_tokens += result.changed.size();
    r.question = result.corrected_query;
  }
  // The corrected questions keep the corruption metadata of the input, so
  // the corrupted/clean split of later reports still refers to the input.
  datakit::save_dataset(dataset, c.out);
  write_file(fs::path(c.out).string() + ".corrections.jsonl", log);
  Json j;
  j["queries"] = dataset.size();
  j["changed_queries"] = changed_queries;
  j["changed_tokens"] = changed_tokens;
  out << j.dump() << '\n';
  return 0;
}

struct PipelineSetup {
  std::vector<datakit::QueryRecord> dataset;
  std::unique_ptr<pipelines::Retriever> retriever;
  std::unique_ptr<pipelines::Retriever> correction_retriever;
  std::unique_ptr<client::HttpChatClient> http;
  std::unique_ptr<pipelines::Generator> generator;
  std::unique_ptr<pipelines::Corrector> corrector;
  textnoise::NoiseTables tables;
  correction::BaseLexicon lexicon;
  pipelines::PipelineConfig config;

  pipelines::Components parts() const {
    return {retriever.get(), generator.get(), corrector.get(),
            correction_retriever ? correction_retriever.get() : retriever.get()};
  }
};

std::unique_ptr<PipelineSetup> setup_pipeline(const Options& o, const RunOpts& r) {
  auto s = std::make_unique<PipelineSetup>(PipelineSetup{
      datakit::load_dataset(r.dataset), nullptr, nullptr, nullptr, nullptr, nullptr,
      textnoise::NoiseTables::load(data_dir(o)), correction::BaseLexicon::load(data_dir(o) / "lexicon_en.txt"), {}});
  if (r.pipeline == "qer" && r.retriever.kind != "dense") {
    fail(ErrorKind::kValidation, "the qer pipeline needs --retriever dense with a trained model");
  }
  s->retriever = make_retriever(r.retriever, r.corpus, r.workers);
  if (!r.correction_retriever.kind.empty()) s->correction_retriever = make_retriever(r.correction_retriever, r.corpus, r.workers);
  if (r.generator == "external" || r.corrector == "external") {
    s->http = std::make_unique<client::HttpChatClient>(client::HttpClientConfig::from_env(r.base_url));
  }
  if (r.generator == "stub") {
    s->generator = std::make_unique<pipelines::StubGenerator>(pipelines::StubGenerator::from_dataset(s->dataset));
  } else {
    s->generator = std::make_unique<pipelines::ChatGenerator>(*s->http, r.model_name);
  }
  if (r.corrector == "grounded") {
    s->corrector = std::make_unique<pipelines::GroundedCorrector>(s->lexicon, s->tables);
  } else {
    s->corrector = std::make_unique<pipelines::ExternalCorrector>(*s->http, read_prompt(o, r.correction_prompt, "correction.txt"),
                                                                  r.model_name);
  }
  s->config.k_docs = r.k;
  s->config.correction_k = r.correction_k;
  s->config.max_input_units = r.max_input;
  s->config.two_stage = !r.single_stage;
  s->config.workers = r.workers;
  s->config.generation_template = read_prompt(o, r.prompt, "generation.txt");
  return s;
}

pipelines::RunOutput run_pipeline(const std::string& name, const PipelineSetup& s) {
  if (name == "standard") return pipelines::run_standard_rag(s.dataset, s.parts(), s.config);
  if (name == "qer") return pipelines::run_qer_rag(s.dataset, s.parts(), s.config);
  return pipelines::run_ra_qcg(s.dataset, s.parts(), s.config);
}

void write_run(const fs::path& dir, const std::string& suffix, const pipelines::RunOutput& run) {
  fs::create_directories(dir);
  pipelines::save_run_records(run.records, dir / ("records" + suffix + ".jsonl"));
  evalkit::save_report(run.report, dir / ("report" + suffix + ".json"));
}

void write_snapshot(const fs::path& dir, const CLI::App* leaf, std::uint64_t seed) {
  write_file(dir / "config.ini", leaf->config_to_str(true, false));
  write_file(dir / "seed", std::to_string(seed) + "\n");
}

int cmd_run(const Options& o, const CLI::App* leaf, std::ostream& out) {
  const auto& r = o.run;
  const auto setup = setup_pipeline(o, r);
  const fs::path dir = r.out_dir;
  if (r.pipeline == "quadrant") {
    const auto arms = pipelines::run_quadrant(setup->dataset, setup->parts(), setup->config);
    std::vector<evalkit::NamedReport> named;
    for (auto arm : pipelines::kQuadrantArms) {
      const auto& run = arms[static_cast<std::size_t>(arm)];
      write_run(dir, "." + std::string(pipelines::to_string(arm)), run);
      named.push_back({std::string(pipelines::to_string(arm)), run.report});
    }
    const std::string table = evalkit::comparison_table_csv(named);
    write_file(dir / "quadrant.csv", table);
    write_snapshot(dir, leaf, r.seed);
    out << table;
    return 0;
  }
  const auto run = run_pipeline(r.pipeline, *setup);
  write_run(dir, "", run);
  write_snapshot(dir, leaf, r.seed);
  out << evalkit::aggregates_csv(run.report);
  return 0;
}

int cmd_sweep(const Options& o, const CLI::App* leaf, std::ostream& out) {
  const auto& r = o.sweep;
  if (r.ks.empty()) fail(ErrorKind::kValidation, "--ks is empty");
  auto setup = setup_pipeline(o, r);
  std::string table = "k,n,em,f1,acc,corrupted_n,corrupted_f1,clean_n,clean_f1\n";
  auto num = [](const evalkit::SubsetMeans& m, double v) { return m.n == 0 ? std::string() : Json(v).dump(); };
  for (std::size_t k : r.ks) {
    if (k == 0) fail(ErrorKind::kValidation, "document counts must be positive");
    setup->config.k_docs = k;
    const auto run = run_pipeline(r.pipeline, *setup);
    write_run(r.out_dir, ".k" + std::to_string(k), run);
    const auto& rep = run.report;
    table += std::to_string(k) + "," + std::to_string(rep.overall.n) + "," + num(rep.overall, rep.overall.em) + "," +
             num(rep.overall, rep.overall.f1) + "," + num(rep.overall, rep.overall.acc) + "," +
             std::to_string(rep.corrupted.n) + "," + num(rep.corrupted, rep.corrupted.f1) + "," +
             std::to_string(rep.clean.n) + "," + num(rep.clean, rep.clean.f1) + "\n";
  }
  write_file(fs::path(r.out_dir) / "sweep.csv", table);
  write_snapshot(r.out_dir, leaf, r.seed);
  out << table;
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto report = pipelines::evaluate_records(pipelines::load_run_records(o.eval.records),
                                                  datakit::load_dataset(o.eval.dataset));
  if (!o.eval.out.empty()) evalkit::save_report(report, o.eval.out);
  out << evalkit::aggregates_csv(report);
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  const auto& r = o.report;
  if (!r.names.empty() && r.names.size() != r.runs.size()) {
    fail(ErrorKind::kValidation, "--names must match --runs one to one");
  }
  std::vector<evalkit::NamedReport> named;
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    fs::path p = r.runs[i];
    std::string name = r.names.empty() ? p.filename().string() : r.names[i];
    if (fs::is_directory(p)) {
      p /= "report.json";
    } else if (r.names.empty()) {
      name = p.stem().string();
    }
    named.push_back({name, evalkit::load_report(p)});
  }
  const std::string table = evalkit::comparison_table_csv(named);
  if (!r.out.empty()) write_file(r.out, table);
  out << table;
  return 0;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::get("noisyrag");
  if (!logger) {
    logger = spdlog::stderr_color_mt("noisyrag");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_level(spdlog::level::from_str(level));
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message) {
  err << "error: " << message << '\n';
  err << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  Layers layers;
  CLI::App app{"Query entry error benchmarks and robust RAG pipelines", "noisyrag"};
  build_app(app, o, layers);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
    out << target->help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "noisyrag 1.0.0\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return 1;
  }
  try {
    CLI::App* leaf = &app;
    while (!leaf->get_subcommands().empty()) leaf = leaf->get_subcommands().front();
    apply_layers(app, leaf, o, layers);
    setup_logging(o.log_level);
    const std::string cmd = text::join(section_path(leaf), " ");
    if (cmd == "synth") return cmd_synth(o, out);
    if (cmd == "corrupt") return cmd_corrupt(o, out);
    if (cmd == "stats") return cmd_stats(o, out);
    if (cmd == "index build") return cmd_index_build(o, out);
    if (cmd == "retriever train") return cmd_train(o, out);
    if (cmd == "retriever eval") return cmd_retriever_eval(o, out);
    if (cmd == "retrieve") return cmd_retrieve(o, out);
    if (cmd == "correct") return cmd_correct(o, out);
    if (cmd == "run") return cmd_run(o, leaf, out);
    if (cmd == "eval") return cmd_eval(o, out);
    if (cmd == "report") return cmd_report(o, out);
    if (cmd == "sweep-k") return cmd_sweep(o, leaf, out);
    fail(ErrorKind::kValidation, "unknown command '" + cmd + "'");
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return 1;
  } catch (const Error& e) {
    report_error(err, to_string(e.kind()), e.what());
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    report_error(err, "runtime", e.what());
    return 2;
  }
}

}  // namespace noisyrag::cli
