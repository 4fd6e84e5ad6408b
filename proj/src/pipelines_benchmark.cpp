#include "noisyrag/pipelines/benchmark.hpp"

#include <memory>

namespace noisyrag::pipelines {

datakit::NameRules corrector_safe_names(const correction::BaseLexicon& lexicon, const textnoise::NoiseTables& tables) {
  const correction::ChannelParams params;
  const double budget = correction::CorrectionContext{}.max_edit_distance;
  auto costs = std::make_shared<correction::ChannelCosts>(params, tables.keyboard, tables.visual);
  datakit::NameRules rules;
  rules.accept_name = [&lexicon, &tables](std::string_view name) {
    if (lexicon.contains(name)) return false;
    correction::CorrectionContext ctx;
    ctx.query = std::string(name);
    ctx.base_lexicon = &lexicon;
    ctx.keyboard = &tables.keyboard;
    ctx.visual = &tables.visual;
    return correction::correct_query(ctx).changed.empty();
  };
  rules.names_conflict = [costs, budget](std::string_view a, std::string_view b) {
    return correction::weighted_edit_distance(a, b, *costs, budget) <= budget;
  };
  return rules;
}

}  // namespace noisyrag::pipelines
