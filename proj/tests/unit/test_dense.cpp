#include <gtest/gtest.h>

#include <cmath>

#include "checks/dense_oracle.hpp"
#include "noisyrag/error.hpp"
#include "noisyrag/retrieval/model_io.hpp"
#include "noisyrag/retrieval/trainer.hpp"
#include "noisyrag/textnoise/corrupt.hpp"
#include "support.hpp"

using namespace noisyrag;
using namespace noisyrag::retrieval;

namespace {

Corpus word_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "d%03zu", i);
    docs.push_back({id, checks::random_text(rng) + " " + checks::random_text(rng)});
  }
  return Corpus(std::move(docs));
}

}  // namespace

TEST(Features, HashedCountsAreSortedAndDeterministic) {
  const HashingConfig config;
  const auto a = hashed_ngram_counts("Capital of France", config);
  EXPECT_EQ(a, hashed_ngram_counts("capital OF france", config));
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a[i - 1].first, a[i].first);
  std::uint32_t total = 0;
  for (const auto& [bucket, count] : a) {
    EXPECT_LT(bucket, config.dim());
    total += count;
  }
  // "#capital#" has 7 trigrams and 6 4-grams, "#of#" 2 and 1, "#france#" 6 and 5.
  EXPECT_EQ(total, 27u);
  EXPECT_TRUE(hashed_ngram_counts("?!", config).empty());
}

TEST(Features, ConfigValidation) {
  HashingConfig config;
  config.ngram_sizes = {};
  EXPECT_THROW(config.validate(), Error);
  config.ngram_sizes = {3};
  config.log2_buckets = 40;
  EXPECT_THROW(config.validate(), Error);
}

TEST(Embed, UnitNormAndSelfSimilarity) {
  const auto model = DenseModeld::random(HashingConfig{}, 32, 0.05, 3);
  for (const std::string t : {"capital", "who founded the company", "x1"}) {
    const auto e = embed(model, t);
    EXPECT_NEAR(e.norm(), 1.0, 1e-9);
    EXPECT_NEAR(e.dot(e), 1.0, 1e-9);
    EXPECT_EQ(e, embed(model, t));
  }
}

TEST(Embed, DegenerateInputsAreRejected) {
  const auto model = DenseModeld::random(HashingConfig{}, 8, 0.05, 3);
  EXPECT_THROW(embed(model, ""), Error);
  EXPECT_THROW(embed(model, "  ..  "), Error);
  const DenseModeld zero(HashingConfig{}, Matrix<double>::Zero(8, 1 << 18), 0.05);
  EXPECT_THROW(embed(zero, "capital"), Error);
}

TEST(Embed, FloatAndDoubleAgree) {
  const auto md = DenseModeld::random(HashingConfig{}, 16, 0.05, 5);
  const auto mf = md.cast<float>();
  const auto a = embed(md, "river source village");
  const auto b = embed(mf, "river source village");
  EXPECT_LT((a - b.cast<double>()).norm(), 1e-5);
}

TEST(Contrastive, ClosedForms) {
  EXPECT_NEAR(checks::equal_similarity_loss(2, true), std::log(2.0), 1e-9);
  for (std::size_t b : {2u, 3u, 5u, 8u}) EXPECT_NEAR(checks::equal_similarity_loss(b, false), std::log(1.0 + b), 1e-9);
  EXPECT_NEAR(checks::orthogonal_pair_loss(), std::log(1.0 + std::exp(-1.0)), 1e-9);
}

TEST(Contrastive, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) EXPECT_LE(checks::gradient_relative_error(seed), 1e-4) << seed;
}

TEST(Contrastive, PositiveLossAndTemperatureEffect) {
  auto sharp = DenseModeld::random(HashingConfig{}, 16, 0.05, 2);
  const std::vector<ContrastiveExample> batch = {{"alpha beta", "alpha beta gamma", "delta", "p1", "n1"},
                                                 {"omega psi", "omega psi chi", "kappa", "p2", "n2"}};
  const double loss_sharp = contrastive_loss<double>(sharp, batch, false).loss;
  EXPECT_GT(loss_sharp, 0.0);
  const DenseModeld soft(HashingConfig{}, sharp.weights(), 10.0);
  // A large temperature flattens the softmax towards ln(1 + M).
  const double loss_soft = contrastive_loss<double>(soft, batch, false).loss;
  EXPECT_NEAR(loss_soft, std::log(3.0), 0.05);
  EXPECT_LT(loss_sharp, loss_soft);
}

TEST(Contrastive, BatchValidation) {
  const auto model = DenseModeld::random(HashingConfig{}, 8, 0.05, 2);
  std::vector<ContrastiveExample> one = {{"a b c", "d e f", "g h i", "p", "n"}};
  EXPECT_THROW(contrastive_loss<double>(model, one), Error);
  std::vector<ContrastiveExample> same = {{"abc", "def", "def", "p", "p"}, {"ghi", "jkl", "mno", "q", "r"}};
  EXPECT_THROW(contrastive_loss<double>(model, same), Error);
}

TEST(Contrastive, GradientIsSparseOverTouchedColumns) {
  const auto model = DenseModeld::random(HashingConfig{}, 8, 0.05, 2);
  const std::vector<ContrastiveExample> batch = {{"abc", "abcd", "xyz", "p1", "n1"}, {"pqr", "pqrs", "uvw", "p2", "n2"}};
  const auto out = contrastive_loss<double>(model, batch);
  EXPECT_TRUE(std::is_sorted(out.gradient.columns.begin(), out.gradient.columns.end()));
  EXPECT_EQ(out.gradient.values.cols(), static_cast<Eigen::Index>(out.gradient.columns.size()));
  EXPECT_LT(out.gradient.columns.size(), 64u);
}

TEST(Trainer, ZeroLearningRateKeepsWeights) {
  const Corpus corpus = word_corpus(10, 1);
  std::vector<TrainPair> pairs;
  for (std::size_t i = 0; i < corpus.size(); ++i) pairs.push_back({"q" + std::to_string(i), corpus.at(i).contents, corpus.at(i).doc_id});
  const auto triples = attach_hard_negatives(pairs, corpus, 4);
  const auto model = DenseModeld::random(HashingConfig{}, 8, 0.05, 9);
  TrainConfig config;
  config.learning_rate = 0.0;
  config.batch_size = 4;
  const auto result = train_retriever(model, triples, corpus, config);
  EXPECT_EQ(result.model.weights(), model.weights());
  EXPECT_EQ(result.model.fingerprint(), model.fingerprint());
  EXPECT_EQ(result.loss_curve.size(), 3u);  // 10 examples: batches of 4, 4 and 2
}

TEST(Trainer, SeparableDataDescends) {
  std::vector<Document> docs;
  std::vector<TrainPair> pairs;
  const char* stems[] = {"aqua", "bravo", "cobalt", "delta", "ember", "fjord", "gamut", "helix"};
  for (int i = 0; i < 8; ++i) {
    docs.push_back({"d" + std::to_string(i), std::string(stems[i]) + " " + stems[i] + "ness"});
    pairs.push_back({"q" + std::to_string(i), stems[i], "d" + std::to_string(i)});
  }
  const Corpus corpus(docs);
  const auto triples = attach_hard_negatives(pairs, corpus, 1);
  TrainConfig config;
  config.learning_rate = 1.0;
  config.batch_size = 8;
  config.epochs = 20;
  const auto result = train_retriever(DenseModeld::random(HashingConfig{}, 16, 0.05, 2, 0.01), triples, corpus, config);
  ASSERT_EQ(result.loss_curve.size(), 20u);
  EXPECT_LT(result.loss_curve.back(), result.loss_curve.front());
}

TEST(Trainer, DeterministicAndMomentum) {
  const Corpus corpus = word_corpus(12, 3);
  std::vector<TrainPair> pairs;
  for (std::size_t i = 0; i < corpus.size(); ++i) pairs.push_back({"q" + std::to_string(i), corpus.at(i).contents.substr(0, 6), corpus.at(i).doc_id});
  const auto triples = attach_hard_negatives(pairs, corpus, 5);
  EXPECT_EQ(triples, attach_hard_negatives(pairs, corpus, 5));
  for (const auto& t : triples) EXPECT_NE(t.negative_id, t.positive_id);
  TrainConfig config;
  config.learning_rate = 0.5;
  config.batch_size = 4;
  config.epochs = 2;
  config.momentum = 0.9;
  const auto init = DenseModeld::random(HashingConfig{}, 8, 0.05, 4);
  const auto a = train_retriever(init, triples, corpus, config);
  const auto b = train_retriever(init, triples, corpus, config);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(a.model.weights(), b.model.weights());
  EXPECT_NE(a.model.fingerprint(), init.fingerprint());
}

TEST(Trainer, TrainedModelPrefersTypoNeighbour) {
  const char* words[] = {"capital", "zebra", "orange", "mountain", "village", "harbor", "planet", "silver"};
  std::vector<Document> docs;
  std::vector<TrainPair> pairs;
  const auto& tables = noisyrag::testing::tables();
  for (int i = 0; i < 8; ++i) {
    docs.push_back({"d" + std::to_string(i), words[i]});
    textnoise::CorruptionSpec spec;
    spec.word_select_prob = 1.0;
    for (std::uint64_t s = 0; s < 6; ++s) {
      spec.seed = 100 * static_cast<std::uint64_t>(i) + s;
      const auto noisy = textnoise::corrupt_query(words[i], textnoise::ErrorType::kKeyboard, spec, tables).corrupted;
      pairs.push_back({"q" + std::to_string(i) + "-" + std::to_string(s), noisy, "d" + std::to_string(i)});
    }
  }
  const Corpus corpus(docs);
  TrainConfig config;
  config.learning_rate = 2.0;
  config.batch_size = 8;
  config.epochs = 10;
  const auto model =
      train_retriever(DenseModeld::random(HashingConfig{}, 32, 0.05, 6), attach_hard_negatives(pairs, corpus, 2), corpus, config)
          .model;
  const auto c = embed(model, "capital");
  EXPECT_GT(c.dot(embed(model, "capitsl")), c.dot(embed(model, "zebra")));
}

TEST(DenseSearch, MatchesBruteForce) {
  const Corpus corpus = word_corpus(40, 7);
  const auto model = DenseModeld::random(HashingConfig{}, 16, 0.05, 8);
  Rng rng(11);
  std::vector<std::string> queries;
  for (int i = 0; i < 10; ++i) queries.push_back(checks::random_text(rng));
  EXPECT_EQ(checks::dense_search_mismatches(model, corpus, queries), 0u);
}

TEST(DenseSearch, SelfQueryRanksFirstAndLargeK) {
  const Corpus corpus = word_corpus(20, 9);
  const auto model = DenseModeld::random(HashingConfig{}, 32, 0.05, 8);
  const auto emb = embed_corpus(model, corpus, 3);
  EXPECT_EQ(emb.embeddings, embed_corpus(model, corpus, 1).embeddings);
  for (const auto& d : corpus.documents()) EXPECT_EQ(dense_search(model, emb, d.contents, 1)[0].doc_id, d.doc_id);
  EXPECT_EQ(dense_search(model, emb, "anything", 100).size(), 20u);
  EXPECT_THROW(dense_search(model, emb, "anything", 0), Error);
}

TEST(DenseSearch, StaleEmbeddingsAreRejected) {
  const Corpus corpus = word_corpus(5, 9);
  auto model = DenseModeld::random(HashingConfig{}, 8, 0.05, 8);
  const auto emb = embed_corpus(model, corpus);
  model.update_weights([](auto& w) { w(0, 0) += 1.0; });
  try {
    dense_search(model, emb, "query", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
  }
}

TEST(ModelIo, RoundTripAndCorruption) {
  noisyrag::testing::TempDir dir("model");
  HashingConfig hashing;
  hashing.log2_buckets = 10;
  const auto model = DenseModeld::random(hashing, 8, 0.07, 8);
  save_dense_model(model, dir / "m.bin");
  const auto back = load_dense_model(dir / "m.bin");
  EXPECT_EQ(back.weights(), model.weights());
  EXPECT_EQ(back.hashing(), model.hashing());
  EXPECT_EQ(back.temperature(), model.temperature());
  EXPECT_EQ(back.fingerprint(), model.fingerprint());

  save_dense_model(model.cast<float>(), dir / "f.bin");
  EXPECT_LT((load_dense_model(dir / "f.bin").weights() - model.weights()).cwiseAbs().maxCoeff(), 1e-6);

  std::string bytes = noisyrag::testing::slurp(dir / "m.bin");
  auto expect_schema = [&](const std::string& contents) {
    noisyrag::testing::spit(dir / "bad.bin", contents);
    try {
      load_dense_model(dir / "bad.bin");
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kSchema);
    }
  };
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x5a;
  expect_schema(flipped);
  expect_schema(bytes.substr(0, bytes.size() - 3));
  expect_schema(bytes + "x");
  expect_schema("NOTAMODEL" + bytes.substr(9));
}
