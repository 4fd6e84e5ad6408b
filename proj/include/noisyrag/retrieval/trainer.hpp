#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "noisyrag/retrieval/contrastive.hpp"
#include "noisyrag/retrieval/corpus.hpp"

namespace noisyrag::retrieval {

/// A training query paired with the id of its relevant document.
struct TrainPair {
  std::string query_id;
  std::string query;
  std::string positive_id;
};

struct TrainingTriple {
  std::string query_id;
  std::string query;
  std::string positive_id;
  std::string negative_id;
  bool operator==(const TrainingTriple&) const = default;
};

/// Draws one hard negative per pair uniformly from the documents other than
/// the positive, on the substream keyed by the query id.
std::vector<TrainingTriple> attach_hard_negatives(const std::vector<TrainPair>& pairs, const Corpus& corpus,
                                                  std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 2e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 1;
  double momentum = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename Scalar>
struct TrainResult {
  DenseModel<Scalar> model;
  std::vector<double> loss_curve;  // one entry per optimizer step
};

/// Mini-batch gradient descent on the contrastive loss. Example order is
/// reshuffled every epoch on the stream "train-epoch-<e>"; a trailing batch
/// with fewer than two examples is skipped.
template <typename Scalar>
TrainResult<Scalar> train_retriever(DenseModel<Scalar> model, const std::vector<TrainingTriple>& data,
                                    const Corpus& corpus, const TrainConfig& config) {
  config.validate();
  if (data.empty()) fail(ErrorKind::kInvalidInput, "training data is empty");

  std::unordered_map<std::string, FeatureVector<Scalar>> doc_features;
  std::vector<FeatureVector<Scalar>> query_features;
  query_features.reserve(data.size());
  auto doc_feature = [&](const std::string& id) -> const FeatureVector<Scalar>* {
    auto it = doc_features.find(id);
    if (it == doc_features.end()) {
      if (!corpus.contains(id)) fail(ErrorKind::kValidation, "training references unknown document '" + id + "'");
      it = doc_features.emplace(id, model.features(corpus.find(id).contents)).first;
    }
    return &it->second;
  };
  for (const auto& t : data) {
    if (t.positive_id == t.negative_id) {
      fail(ErrorKind::kInvalidInput, "query '" + t.query_id + "' uses its positive as hard negative");
    }
    query_features.push_back(model.features(t.query));
    doc_feature(t.positive_id);
    doc_feature(t.negative_id);
  }
  std::vector<FeatureExample<Scalar>> views;
  views.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    views.push_back({&query_features[i], &doc_features.at(data[i].positive_id), &doc_features.at(data[i].negative_id),
                     data[i].positive_id, data[i].negative_id});
  }

  const Scalar lr = static_cast<Scalar>(config.learning_rate);
  const Scalar mu = static_cast<Scalar>(config.momentum);
  Matrix<Scalar> velocity;
  if (config.momentum > 0.0) velocity = Matrix<Scalar>::Zero(model.output_dim(), model.input_dim());

  TrainResult<Scalar> result{std::move(model), {}};
  std::vector<std::size_t> order(data.size());
  std::vector<FeatureExample<Scalar>> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = make_stream(config.seed, "train-epoch-" + std::to_string(epoch));
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start < 2) break;
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(views[order[i]]);
      auto step = contrastive_loss_features<Scalar>(result.model, batch);
      result.loss_curve.push_back(static_cast<double>(step.loss));
      const auto& grad = step.gradient;
      result.model.update_weights([&](Matrix<Scalar>& w) {
        for (std::size_t c = 0; c < grad.columns.size(); ++c) {
          const Eigen::Index col = grad.columns[c];
          if (config.momentum > 0.0) {
            velocity.col(col) = mu * velocity.col(col) + grad.values.col(static_cast<Eigen::Index>(c));
            w.col(col) -= lr * velocity.col(col);
          } else {
            w.col(col) -= lr * grad.values.col(static_cast<Eigen::Index>(c));
          }
        }
        // Columns with stale velocity but no gradient this step still move.
        if (config.momentum > 0.0) {
          std::size_t c = 0;
          for (Eigen::Index col = 0; col < w.cols(); ++col) {
            if (c < grad.columns.size() && grad.columns[c] == col) {
              ++c;
              continue;
            }
            if (velocity.col(col).isZero(Scalar(0))) continue;
            velocity.col(col) *= mu;
            w.col(col) -= lr * velocity.col(col);
          }
        }
      });
    }
  }
  return result;
}

}  // namespace noisyrag::retrieval
