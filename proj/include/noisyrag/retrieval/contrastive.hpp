#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisyrag/retrieval/dense_model.hpp"

namespace noisyrag::retrieval {

/// One training example: a (possibly corrupted) query, its positive document
/// and a hard negative. Ids decide in-batch identity; when empty the texts
/// are compared instead.
struct ContrastiveExample {
  std::string query;
  std::string positive;
  std::string hard_negative;
  std::string positive_id;
  std::string negative_id;
};

/// Sparse dL/dW: only the columns hit by some feature of the batch.
template <typename Scalar>
struct ColumnGradient {
  std::vector<Eigen::Index> columns;  // ascending
  Matrix<Scalar> values;              // output_dim x columns.size()

  Matrix<Scalar> to_dense(Eigen::Index rows, Eigen::Index cols) const {
    Matrix<Scalar> g = Matrix<Scalar>::Zero(rows, cols);
    for (std::size_t i = 0; i < columns.size(); ++i) g.col(columns[i]) = values.col(static_cast<Eigen::Index>(i));
    return g;
  }
};

template <typename Scalar>
struct LossAndGradient {
  Scalar loss = Scalar(0);
  ColumnGradient<Scalar> gradient;
};

/// Feature-level view of an example, used by the trainer to avoid rehashing.
template <typename Scalar>
struct FeatureExample {
  const FeatureVector<Scalar>* query;
  const FeatureVector<Scalar>* positive;
  const FeatureVector<Scalar>* hard_negative;
  std::string_view positive_key;
  std::string_view negative_key;
};

/// InfoNCE with cosine similarity and temperature tau. For example i the
/// negatives are its hard negative plus the positives of the other examples
/// (skipping any that are the same document as its own positive):
///
///   L_i = -log( exp(s(q_i,d_i+)/tau) / (exp(s(q_i,d_i+)/tau) + sum_n exp(s(q_i,n)/tau)) )
///
/// The batch loss is the mean of L_i. The gradient is exact, propagated
/// through the L2 normalization of every embedding.
template <typename Scalar>
LossAndGradient<Scalar> contrastive_loss_features(const DenseModel<Scalar>& model,
                                                  std::span<const FeatureExample<Scalar>> batch,
                                                  bool with_gradient = true) {
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;
  const Eigen::Index batch_size = static_cast<Eigen::Index>(batch.size());
  if (batch_size < 2) fail(ErrorKind::kInvalidInput, "contrastive batches need at least two examples");
  const Scalar tau = model.temperature();
  if (!(tau > Scalar(0))) fail(ErrorKind::kConfig, "temperature must be positive");
  for (const auto& ex : batch) {
    if (ex.positive_key == ex.negative_key) fail(ErrorKind::kInvalidInput, "hard negative equals the positive");
  }

  // Embedding slots: queries [0, B), positives [B, 2B), hard negatives [2B, 3B).
  const Eigen::Index dim = model.output_dim();
  const Eigen::Index slots = 3 * batch_size;
  Mat unit(dim, slots);
  Vec norms(slots);
  std::vector<const FeatureVector<Scalar>*> inputs(static_cast<std::size_t>(slots));
  for (Eigen::Index i = 0; i < batch_size; ++i) {
    const auto& ex = batch[static_cast<std::size_t>(i)];
    inputs[static_cast<std::size_t>(i)] = ex.query;
    inputs[static_cast<std::size_t>(batch_size + i)] = ex.positive;
    inputs[static_cast<std::size_t>(2 * batch_size + i)] = ex.hard_negative;
  }
  for (Eigen::Index s = 0; s < slots; ++s) {
    const auto& x = *inputs[static_cast<std::size_t>(s)];
    if (x.nonZeros() == 0) fail(ErrorKind::kInvalidInput, "cannot embed text without any word characters");
    Vec z = model.project(x);
    norms(s) = z.norm();
    if (!(norms(s) > Scalar(0))) fail(ErrorKind::kInvalidInput, "projection is zero; the embedding cannot be normalized");
    unit.col(s) = z / norms(s);
  }

  Mat d_unit = Mat::Zero(dim, slots);
  Scalar total = Scalar(0);
  std::vector<Eigen::Index> targets;
  std::vector<Scalar> logits;
  for (Eigen::Index i = 0; i < batch_size; ++i) {
    const auto& ex = batch[static_cast<std::size_t>(i)];
    targets.assign({batch_size + i, 2 * batch_size + i});
    for (Eigen::Index j = 0; j < batch_size; ++j) {
      if (j != i && batch[static_cast<std::size_t>(j)].positive_key != ex.positive_key) targets.push_back(batch_size + j);
    }
    logits.resize(targets.size());
    for (std::size_t m = 0; m < targets.size(); ++m) logits[m] = unit.col(i).dot(unit.col(targets[m])) / tau;
    const Scalar peak = *std::max_element(logits.begin(), logits.end());
    Scalar denom = Scalar(0);
    for (Scalar l : logits) denom += std::exp(l - peak);
    const Scalar log_partition = peak + std::log(denom);
    total += log_partition - logits[0];
    if (!with_gradient) continue;
    for (std::size_t m = 0; m < targets.size(); ++m) {
      const Scalar weight = std::exp(logits[m] - log_partition) - (m == 0 ? Scalar(1) : Scalar(0));
      const Scalar g = weight / (tau * static_cast<Scalar>(batch_size));
      d_unit.col(i).noalias() += g * unit.col(targets[m]);
      d_unit.col(targets[m]).noalias() += g * unit.col(i);
    }
  }

  LossAndGradient<Scalar> out;
  out.loss = total / static_cast<Scalar>(batch_size);
  if (!with_gradient) return out;

  // d/dz of z/||z|| applied to the upstream gradient: (g - e (e.g)) / ||z||.
  Mat d_raw(dim, slots);
  for (Eigen::Index s = 0; s < slots; ++s) {
    d_raw.col(s) = (d_unit.col(s) - unit.col(s) * unit.col(s).dot(d_unit.col(s))) / norms(s);
  }

  struct Entry {
    Eigen::Index column;
    Eigen::Index slot;
    Scalar value;
  };
  std::vector<Entry> entries;
  for (Eigen::Index s = 0; s < slots; ++s) {
    for (typename FeatureVector<Scalar>::InnerIterator it(*inputs[static_cast<std::size_t>(s)]); it; ++it) {
      entries.push_back({it.index(), s, it.value()});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.column != b.column ? a.column < b.column : a.slot < b.slot;
  });
  auto& grad = out.gradient;
  for (const Entry& e : entries) {
    if (grad.columns.empty() || grad.columns.back() != e.column) grad.columns.push_back(e.column);
  }
  grad.values = Mat::Zero(dim, static_cast<Eigen::Index>(grad.columns.size()));
  Eigen::Index col = -1;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k == 0 || entries[k].column != entries[k - 1].column) ++col;
    grad.values.col(col).noalias() += entries[k].value * d_raw.col(entries[k].slot);
  }
  return out;
}

template <typename Scalar>
LossAndGradient<Scalar> contrastive_loss(const DenseModel<Scalar>& model, std::span<const ContrastiveExample> batch,
                                         bool with_gradient = true) {
  std::vector<FeatureVector<Scalar>> features;
  features.reserve(3 * batch.size());
  for (const auto& ex : batch) {
    features.push_back(model.features(ex.query));
    features.push_back(model.features(ex.positive));
    features.push_back(model.features(ex.hard_negative));
  }
  std::vector<FeatureExample<Scalar>> views;
  views.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    views.push_back({&features[3 * i], &features[3 * i + 1], &features[3 * i + 2],
                     ex.positive_id.empty() ? std::string_view(ex.positive) : std::string_view(ex.positive_id),
                     ex.negative_id.empty() ? std::string_view(ex.hard_negative) : std::string_view(ex.negative_id)});
  }
  return contrastive_loss_features<Scalar>(model, views, with_gradient);
}

}  // namespace noisyrag::retrieval
