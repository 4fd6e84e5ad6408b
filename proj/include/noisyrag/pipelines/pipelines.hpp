#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "noisyrag/evalkit/report.hpp"
#include "noisyrag/pipelines/components.hpp"

namespace noisyrag::pipelines {

/// Extension points for query-rewriting baselines. All are optional.
struct PipelineHooks {
  /// Rewrites the retrieval query before the (first) retrieval.
  std::function<std::string(const datakit::QueryRecord&, std::string)> pre_retrieval;
  /// Reorders or filters the hits used for generation.
  std::function<std::vector<Hit>(const datakit::QueryRecord&, std::vector<Hit>)> post_retrieval;
  /// With iterations > 1, the retrieval query becomes iterate(query, answer)
  /// and the retrieve-generate step repeats.
  std::function<std::string(const std::string& query, const std::string& answer)> iterate;
  std::size_t iterations = 1;
};

struct PipelineConfig {
  std::size_t k_docs = 3;
  /// Documents shown to the corrector in the first RA-QCG stage.
  std::size_t correction_k = 3;
  std::size_t max_input_units = 4096;
  /// RA-QCG re-retrieves with the corrected query; false reuses the
  /// first-stage documents (first k_docs of them with the generation retriever).
  bool two_stage = true;
  unsigned workers = 1;
  std::string generation_template;
  PipelineHooks hooks;

  void validate() const;
};

/// Borrowed pieces of a pipeline. correction_retriever defaults to retriever.
struct Components {
  const Retriever* retriever = nullptr;
  const Generator* generator = nullptr;
  const Corrector* corrector = nullptr;
  const Retriever* correction_retriever = nullptr;
};

struct RunRecord {
  std::string query_id;
  std::string question;
  bool corrupted = false;
  std::string retrieval_query;
  std::vector<Hit> retrieved;
  std::optional<std::vector<Hit>> first_stage;
  std::optional<std::string> corrected_query;
  std::vector<correction::TokenChange> corrections;
  std::string generation_query;
  std::string answer;
  std::size_t truncated_units = 0;
  int em = 0;
  double f1 = 0.0;
  int acc = 0;
  bool failed = false;
  std::string error;
};

struct RunOutput {
  std::vector<RunRecord> records;  // dataset order
  evalkit::EvalReport report;
};

/// Retrieve with the record's question, generate, score. A failure on one
/// query is recorded (failed = true, empty answer) and the run continues.
RunOutput run_standard_rag(const std::vector<datakit::QueryRecord>& dataset, const Components& parts,
                           const PipelineConfig& config);

/// Standard RAG whose retriever is the contrastively trained dense model.
RunOutput run_qer_rag(const std::vector<datakit::QueryRecord>& dataset, const Components& parts,
                      const PipelineConfig& config);

/// Retrieve correction_k documents with correction_retriever, correct the
/// question against them, re-retrieve k_docs documents with the corrected
/// question and generate from those.
RunOutput run_ra_qcg(const std::vector<datakit::QueryRecord>& dataset, const Components& parts,
                     const PipelineConfig& config);

enum class QuadrantArm { kQeDe = 0, kQeDc = 1, kQcDe = 2, kQcDc = 3 };
inline constexpr std::array<QuadrantArm, 4> kQuadrantArms = {QuadrantArm::kQeDe, QuadrantArm::kQeDc,
                                                              QuadrantArm::kQcDe, QuadrantArm::kQcDc};
std::string_view to_string(QuadrantArm arm) noexcept;

/// The four query/document arms on the corrupted records only: QE uses the
/// corrupted question for generation and QC the original one; DE retrieves
/// with the corrupted question and DC with the original one.
std::array<RunOutput, 4> run_quadrant(const std::vector<datakit::QueryRecord>& dataset, const Components& parts,
                                      const PipelineConfig& config);

nlohmann::ordered_json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::ordered_json& j);
void save_run_records(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> load_run_records(const std::filesystem::path& path);

/// Re-scores records against the dataset's gold answers.
evalkit::EvalReport evaluate_records(const std::vector<RunRecord>& records,
                                     const std::vector<datakit::QueryRecord>& dataset);

}  // namespace noisyrag::pipelines
