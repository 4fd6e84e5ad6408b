#pragma once

#include <filesystem>

#include "noisyrag/retrieval/dense_model.hpp"

namespace noisyrag::retrieval {

/// Binary layout, little-endian:
///   "NRDENSE1" | u32 version | u32 scalar bytes | u32 n_sizes | u32 sizes[n_sizes]
///   | u32 log2_buckets | i64 rows | f64 tau | scalar W[rows * 2^log2_buckets] (column-major)
///   | u64 FNV-1a checksum of everything before it
void save_dense_model(const DenseModeld& model, const std::filesystem::path& path);
void save_dense_model(const DenseModelf& model, const std::filesystem::path& path);

/// Reads either scalar width; kSchema on a bad magic, version or checksum.
DenseModeld load_dense_model(const std::filesystem::path& path);

}  // namespace noisyrag::retrieval
