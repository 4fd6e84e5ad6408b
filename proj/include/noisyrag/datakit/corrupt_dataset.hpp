#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "noisyrag/datakit/records.hpp"

namespace noisyrag::datakit {

struct CorruptDatasetOptions {
  QuotaMode quota_mode = QuotaMode::kExact;
  std::string name = "dataset";
  /// Provenance label only (e.g. the source used for in-domain training).
  std::string source_name;
};

/// Largest-remainder split of `total` proportional to `weights`. Ties in the
/// remainder go to the lower index (spelling before keyboard before visual).
std::array<std::size_t, 3> allocate_quota(std::size_t total, const std::array<unsigned, 3>& weights);

/// Number of records to corrupt: round(rate * n), halves away from zero.
std::size_t corrupted_target(std::size_t n, double rate);

/// Corrupts round(rate * N) records of a clean dataset.
///
/// Exact mode: candidates are ordered by splitmix64(seed ^ fnv1a64(id)), so
/// the choice does not depend on input order. Error types come from an exact
/// largest-remainder quota shuffled with the stream keyed "error-types".
/// Each record is corrupted on its own stream keyed by id. Candidates that
/// cannot be corrupted are skipped in favour of the next one; any remaining
/// deficit is reported as manifest.shortfall.
///
/// Bernoulli mode: each record is selected independently with probability
/// `rate` and its type sampled from the weights, both on the record's stream.
std::pair<std::vector<QueryRecord>, DatasetManifest> corrupt_dataset(const std::vector<QueryRecord>& records,
                                                                     double rate, const CorruptionSpec& spec,
                                                                     const textnoise::NoiseTables& tables,
                                                                     const CorruptDatasetOptions& options = {});

/// Training augmentation: `variants` corrupted copies of every clean record,
/// copy v using seed spec.seed + v and id "<id>#v<v>". Records that cannot
/// be corrupted are left out of the copies.
std::vector<QueryRecord> corrupted_variants(const std::vector<QueryRecord>& records, std::size_t variants,
                                            const CorruptionSpec& spec, const textnoise::NoiseTables& tables);

/// Character and word averages over all questions.
DatasetStats compute_stats(const std::vector<QueryRecord>& records);

}  // namespace noisyrag::datakit
