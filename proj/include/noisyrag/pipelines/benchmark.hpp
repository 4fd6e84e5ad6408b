#pragma once

#include "noisyrag/correction/corrector.hpp"
#include "noisyrag/datakit/synthetic.hpp"
#include "noisyrag/textnoise/tables.hpp"

namespace noisyrag::pipelines {

/// Name vetoes for the synthetic generator: a name is rejected when it is a
/// lexicon word or the grounded corrector would rewrite it on its own, and two
/// names conflict when they are within the corrector's edit budget of each
/// other. Both references must outlive the returned rules.
datakit::NameRules corrector_safe_names(const correction::BaseLexicon& lexicon, const textnoise::NoiseTables& tables);

}  // namespace noisyrag::pipelines
