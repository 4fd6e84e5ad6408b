#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "noisyrag/client/chat.hpp"
#include "noisyrag/correction/corrector.hpp"

namespace noisyrag::correction {

/// "[1] text" blocks separated by blank lines, in retrieval order.
std::string format_documents(const std::vector<retrieval::Document>& docs);

/// Fills {query} and {documents} in the correction template.
std::string render_correction_prompt(std::string_view prompt_template, std::string_view query,
                                     const std::vector<retrieval::Document>& docs);

/// Extracts a one-line corrected query; nullopt when the reply is empty,
/// spans several lines or changes the number of whitespace tokens.
std::optional<std::string> parse_corrected_query(std::string_view reply, std::string_view original_query);

/// Sends the rendered prompt as a single user message. Transport failures
/// and unusable replies fall back to the input query with a warning.
CorrectionResult correct_query_external(const CorrectionContext& ctx, client::GenerationClient& client,
                                        std::string_view prompt_template, const std::string& model = "default",
                                        int max_tokens = 128);

}  // namespace noisyrag::correction
