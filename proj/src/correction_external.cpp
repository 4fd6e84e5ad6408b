#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>

#include "noisyrag/correction/external.hpp"
#include "noisyrag/error.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::correction {

std::string format_documents(const std::vector<retrieval::Document>& docs) {
  std::string out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "[" + std::to_string(i + 1) + "] " + docs[i].contents;
  }
  return out;
}

std::string render_correction_prompt(std::string_view prompt_template, std::string_view query,
                                     const std::vector<retrieval::Document>& docs) {
  const std::string documents = format_documents(docs);
  return text::render_template(prompt_template, {{"query", query}, {"documents", documents}});
}

std::optional<std::string> parse_corrected_query(std::string_view reply, std::string_view original_query) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= reply.size()) {
    std::size_t end = reply.find('\n', start);
    if (end == std::string_view::npos) end = reply.size();
    const auto line = text::trim(reply.substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.size() != 1) return std::nullopt;
  std::string_view line = lines.front();
  for (std::string_view label : {"Corrected query:", "corrected query:"}) {
    if (line.rfind(label, 0) == 0) line = text::trim(line.substr(label.size()));
  }
  if (line.size() >= 2 && line.front() == '"' && line.back() == '"') line = text::trim(line.substr(1, line.size() - 2));
  if (line.empty()) return std::nullopt;
  if (text::count_whitespace_tokens(line) != text::count_whitespace_tokens(original_query)) return std::nullopt;
  return std::string(line);
}

namespace {

CorrectionResult diff_result(std::string_view original, const std::string& corrected) {
  CorrectionResult r;
  r.corrected_query = corrected;
  const auto a = text::split_whitespace(original);
  const auto b = text::split_whitespace(corrected);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) {
      ++r.untouched_count;
    } else {
      r.changed.push_back({i, std::string(a[i]), std::string(b[i]), std::numeric_limits<double>::quiet_NaN()});
    }
  }
  return r;
}

}  // namespace

CorrectionResult correct_query_external(const CorrectionContext& ctx, client::GenerationClient& client,
                                        std::string_view prompt_template, const std::string& model, int max_tokens) {
  if (text::trim(ctx.query).empty()) fail(ErrorKind::kInvalidInput, "query is empty");
  client::ChatRequest request;
  request.model = model;
  request.max_tokens = max_tokens;
  request.messages.push_back({"user", render_correction_prompt(prompt_template, ctx.query, ctx.retrieved_docs)});
  std::string reply;
  try {
    reply = client.complete(request);
  } catch (const Error& e) {
    spdlog::warn("external correction failed ({}); keeping the query unchanged", e.what());
    return diff_result(ctx.query, ctx.query);
  }
  auto parsed = parse_corrected_query(reply, ctx.query);
  if (!parsed) {
    spdlog::warn("external correction returned an unusable reply; keeping the query unchanged");
    return diff_result(ctx.query, ctx.query);
  }
  return diff_result(ctx.query, *parsed);
}

}  // namespace noisyrag::correction
