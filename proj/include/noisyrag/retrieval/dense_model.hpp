#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "noisyrag/error.hpp"
#include "noisyrag/retrieval/features.hpp"
#include "noisyrag/rng.hpp"

namespace noisyrag::retrieval {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {
std::uint64_t fingerprint_bytes(std::uint64_t h, const void* data, std::size_t n) noexcept;
std::uint64_t fingerprint_config(const HashingConfig& hashing, double temperature, std::int64_t rows) noexcept;
}  // namespace detail

/// Linear embedder over hashed n-gram features: e(t) = W x(t) / ||W x(t)||.
/// W is output_dim x input_dim and column-major, so a sparse input touches
/// one contiguous column per feature.
template <typename Scalar>
class DenseModel {
 public:
  using MatrixType = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  DenseModel(HashingConfig hashing, MatrixType weights, Scalar temperature)
      : hashing_(std::move(hashing)), weights_(std::move(weights)), temperature_(temperature) {
    hashing_.validate();
    if (!(temperature_ > Scalar(0))) fail(ErrorKind::kConfig, "temperature must be positive");
    if (weights_.cols() != static_cast<Eigen::Index>(hashing_.dim())) {
      fail(ErrorKind::kConfig, "weight matrix has " + std::to_string(weights_.cols()) +
                                   " columns but the hashing config needs " + std::to_string(hashing_.dim()));
    }
    if (weights_.rows() < 1) fail(ErrorKind::kConfig, "output dimension must be positive");
  }

  DenseModel(const DenseModel& other)
      : hashing_(other.hashing_), weights_(other.weights_), temperature_(other.temperature_),
        fingerprint_(other.fingerprint_.load(std::memory_order_relaxed)) {}
  DenseModel(DenseModel&& other) noexcept
      : hashing_(std::move(other.hashing_)), weights_(std::move(other.weights_)), temperature_(other.temperature_),
        fingerprint_(other.fingerprint_.load(std::memory_order_relaxed)) {}
  DenseModel& operator=(DenseModel other) noexcept {
    hashing_ = std::move(other.hashing_);
    weights_ = std::move(other.weights_);
    temperature_ = other.temperature_;
    fingerprint_.store(other.fingerprint_.load(std::memory_order_relaxed), std::memory_order_relaxed);
    return *this;
  }

  /// Entries drawn uniformly from [-init_scale, init_scale], column by column.
  static DenseModel random(HashingConfig hashing, Eigen::Index output_dim, Scalar temperature, std::uint64_t seed,
                           Scalar init_scale = Scalar(0.1)) {
    hashing.validate();
    MatrixType w(output_dim, static_cast<Eigen::Index>(hashing.dim()));
    Rng rng(seed);
    Scalar* data = w.data();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      data[i] = static_cast<Scalar>((2.0 * uniform_unit(rng) - 1.0)) * init_scale;
    }
    return DenseModel(std::move(hashing), std::move(w), temperature);
  }

  const HashingConfig& hashing() const noexcept { return hashing_; }
  Eigen::Index input_dim() const noexcept { return weights_.cols(); }
  Eigen::Index output_dim() const noexcept { return weights_.rows(); }
  Scalar temperature() const noexcept { return temperature_; }
  const MatrixType& weights() const noexcept { return weights_; }

  /// Content hash over configuration and weights; changes whenever W does.
  /// Computed on first use after a change and cached.
  std::uint64_t fingerprint() const noexcept {
    std::uint64_t h = fingerprint_.load(std::memory_order_acquire);
    if (h == kDirty) {
      h = detail::fingerprint_config(hashing_, static_cast<double>(temperature_), weights_.rows());
      h = detail::fingerprint_bytes(h, weights_.data(), sizeof(Scalar) * static_cast<std::size_t>(weights_.size()));
      if (h == kDirty) h = 1;
      fingerprint_.store(h, std::memory_order_release);
    }
    return h;
  }

  /// Mutates W through `f(MatrixType&)`; not safe concurrently with reads.
  template <typename F>
  void update_weights(F&& f) {
    f(weights_);
    fingerprint_.store(kDirty, std::memory_order_release);
  }

  FeatureVector<Scalar> features(std::string_view text) const { return hash_features<Scalar>(text, hashing_); }

  /// Unnormalized projection W x.
  VectorType project(const FeatureVector<Scalar>& x) const {
    VectorType z = VectorType::Zero(output_dim());
    for (typename FeatureVector<Scalar>::InnerIterator it(x); it; ++it) z.noalias() += it.value() * weights_.col(it.index());
    return z;
  }

  template <typename NewScalar>
  DenseModel<NewScalar> cast() const {
    return DenseModel<NewScalar>(hashing_, weights_.template cast<NewScalar>(), static_cast<NewScalar>(temperature_));
  }

 private:
  static constexpr std::uint64_t kDirty = 0;

  HashingConfig hashing_;
  MatrixType weights_;
  Scalar temperature_;
  mutable std::atomic<std::uint64_t> fingerprint_{kDirty};
};

using DenseModeld = DenseModel<double>;
using DenseModelf = DenseModel<float>;

/// L2-normalized embedding of precomputed features. Throws kInvalidInput when
/// the text has no features or W maps it to zero.
template <typename Scalar>
Vector<Scalar> embed_features(const DenseModel<Scalar>& model, const FeatureVector<Scalar>& x) {
  if (x.nonZeros() == 0) fail(ErrorKind::kInvalidInput, "cannot embed text without any word characters");
  Vector<Scalar> z = model.project(x);
  const Scalar norm = z.norm();
  if (!(norm > Scalar(0)) || !std::isfinite(static_cast<double>(norm))) {
    fail(ErrorKind::kInvalidInput, "projection is zero; the embedding cannot be normalized");
  }
  return z / norm;
}

template <typename Scalar>
Vector<Scalar> embed(const DenseModel<Scalar>& model, std::string_view text) {
  return embed_features(model, model.features(text));
}

}  // namespace noisyrag::retrieval
