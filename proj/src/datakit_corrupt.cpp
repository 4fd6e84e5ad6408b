#include <algorithm>
#include <cmath>
#include <numeric>

#include "noisyrag/datakit/corrupt_dataset.hpp"
#include "noisyrag/error.hpp"
#include "noisyrag/rng.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::datakit {

std::array<std::size_t, 3> allocate_quota(std::size_t total, const std::array<unsigned, 3>& weights) {
  const std::size_t weight_sum = std::size_t{weights[0]} + weights[1] + weights[2];
  if (weight_sum == 0) fail(ErrorKind::kConfig, "type_weights must not all be zero");
  std::array<std::size_t, 3> quota{};
  std::array<std::size_t, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    // Integer arithmetic keeps the split exact for any total.
    quota[i] = total * weights[i] / weight_sum;
    remainder[i] = total * weights[i] % weight_sum;
    assigned += quota[i];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++quota[order[k % 3]];
  return quota;
}

std::size_t corrupted_target(std::size_t n, double rate) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

namespace {

void check_inputs(const std::vector<QueryRecord>& records, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) fail(ErrorKind::kInvalidInput, "corruption rate must lie in [0,1]");
  validate_unique_ids(records);
  for (const QueryRecord& r : records) {
    if (r.corrupted()) {
      fail(ErrorKind::kInvalidInput, "record '" + r.id + "' is already corrupted; refusing to corrupt twice");
    }
    if (r.golden_answers.empty()) fail(ErrorKind::kInvalidInput, "record '" + r.id + "' has no golden answers");
  }
}

bool apply(QueryRecord& record, ErrorType type, const CorruptionSpec& spec, const textnoise::NoiseTables& tables,
           Rng& rng) {
  auto outcome = textnoise::corrupt_query(record.question, type, spec, tables, rng);
  if (outcome.edits.empty()) return false;
  record.corruption = Corruption{type, record.question, std::move(outcome.edits)};
  record.question = std::move(outcome.corrupted);
  return true;
}

}  // namespace

std::pair<std::vector<QueryRecord>, DatasetManifest> corrupt_dataset(const std::vector<QueryRecord>& records,
                                                                     double rate, const CorruptionSpec& spec,
                                                                     const textnoise::NoiseTables& tables,
                                                                     const CorruptDatasetOptions& options) {
  spec.validate();
  check_inputs(records, rate);

  DatasetManifest manifest;
  manifest.name = options.name;
  manifest.source_name = options.source_name;
  manifest.corruption_rate = rate;
  manifest.spec = spec;
  manifest.quota_mode = options.quota_mode;
  manifest.source_checksum = dataset_checksum(records);
  manifest.counts.total = records.size();

  std::vector<QueryRecord> out = records;

  if (options.quota_mode == QuotaMode::kBernoulli) {
    for (QueryRecord& r : out) {
      Rng rng = make_stream(spec.seed, r.id);
      if (!bernoulli(rng, rate)) continue;
      const ErrorType type = textnoise::sample_error_type(spec, rng);
      if (apply(r, type, spec, tables, rng)) {
        ++manifest.counts.corrupted;
        ++manifest.counts.per_error_type[static_cast<std::size_t>(type)];
      }
    }
    return {std::move(out), std::move(manifest)};
  }

  const std::size_t target = corrupted_target(records.size(), rate);
  const auto quota = allocate_quota(target, spec.type_weights);
  std::vector<ErrorType> types;
  types.reserve(target);
  for (std::size_t i = 0; i < 3; ++i) types.insert(types.end(), quota[i], textnoise::kAllErrorTypes[i]);
  Rng type_rng = make_stream(spec.seed, "error-types");
  shuffle(types, type_rng);

  std::vector<std::pair<std::uint64_t, std::size_t>> order;
  order.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    order.emplace_back(splitmix64(spec.seed ^ fnv1a64(records[i].id)), i);
  }
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return records[a.second].id < records[b.second].id;
  });

  std::size_t next_type = 0;
  for (const auto& [key, index] : order) {
    if (next_type == types.size()) break;
    QueryRecord& r = out[index];
    Rng rng = make_stream(spec.seed, r.id);
    const ErrorType type = types[next_type];
    if (apply(r, type, spec, tables, rng)) {
      ++next_type;
      ++manifest.counts.corrupted;
      ++manifest.counts.per_error_type[static_cast<std::size_t>(type)];
    }
  }
  manifest.shortfall = types.size() - next_type;
  return {std::move(out), std::move(manifest)};
}

DatasetStats compute_stats(const std::vector<QueryRecord>& records) {
  if (records.empty()) fail(ErrorKind::kInvalidInput, "cannot compute statistics of an empty dataset");
  double chars = 0.0, words = 0.0;
  for (const QueryRecord& r : records) {
    chars += static_cast<double>(text::utf8_length(text::trim(r.question)));
    words += static_cast<double>(text::count_whitespace_tokens(r.question));
  }
  const double n = static_cast<double>(records.size());
  return {chars / n, words / n, records.size()};
}

std::vector<QueryRecord> corrupted_variants(const std::vector<QueryRecord>& records, std::size_t variants,
                                            const CorruptionSpec& spec, const textnoise::NoiseTables& tables) {
  std::vector<QueryRecord> out;
  for (std::size_t v = 0; v < variants; ++v) {
    CorruptionSpec s = spec;
    s.seed = spec.seed + v;
    auto [copy, manifest] = corrupt_dataset(records, 1.0, s, tables);
    for (auto& r : copy) {
      if (!r.corrupted()) continue;
      r.id += "#v" + std::to_string(v);
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace noisyrag::datakit
