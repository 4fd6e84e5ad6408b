#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "noisyrag/correction/corrector.hpp"
#include "noisyrag/error.hpp"
#include "noisyrag/text.hpp"

namespace noisyrag::correction {

namespace {

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

bool is_numeric(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return text::is_ascii_digit(c); });
}

bool is_plain_alnum(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return text::is_ascii_alpha(c) || text::is_ascii_digit(c); });
}

/// Re-applies the capitalization of `original` to the lowercase `word`.
std::string restore_case(std::string_view original, const std::string& word) {
  std::size_t letters = 0, upper = 0;
  for (char c : original) {
    if (text::is_ascii_alpha(c)) {
      ++letters;
      if (text::is_ascii_upper(c)) ++upper;
    }
  }
  std::string out = word;
  if (letters > 1 && upper == letters) {
    for (char& c : out) c = text::to_upper(c);
  } else if (!original.empty() && text::is_ascii_upper(original.front()) && !out.empty()) {
    out.front() = text::to_upper(out.front());
  }
  return out;
}

double substitution_cost(char a, char b, const ChannelParams& p, const textnoise::KeyboardAdjacency& keyboard,
                         const textnoise::VisualConfusionTable& visual) {
  if (a == b) return 0.0;
  double cost = p.generic_sub_cost;
  if (text::is_ascii_alpha(a) && text::is_ascii_alpha(b) && keyboard.adjacent(a, b)) cost = std::min(cost, p.keyboard_sub_cost);
  if (visual.confusable(a, b)) cost = std::min(cost, p.visual_sub_cost);
  return cost;
}

}  // namespace

void ChannelParams::validate() const {
  for (double c : {keyboard_sub_cost, visual_sub_cost, generic_sub_cost, insert_cost, delete_cost}) {
    if (!finite_positive(c)) fail(ErrorKind::kConfig, "channel costs must be finite and positive");
  }
  if (keyboard_sub_cost > generic_sub_cost || visual_sub_cost > generic_sub_cost) {
    fail(ErrorKind::kConfig, "keyboard and visual substitutions may not cost more than a generic substitution");
  }
}

BaseLexicon::BaseLexicon(const std::vector<std::string>& words) {
  for (const auto& w : words) {
    std::string lower = text::ascii_lower(text::trim(w));
    if (lower.empty()) continue;
    if (by_length_.size() <= lower.size()) by_length_.resize(lower.size() + 1);
    if (words_.insert(lower).second) by_length_[lower.size()].push_back(lower);
  }
  for (auto& bucket : by_length_) std::sort(bucket.begin(), bucket.end());
}

BaseLexicon BaseLexicon::load(const std::filesystem::path& path) {
  std::istringstream in(textnoise::read_text_file(path));
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    words.emplace_back(t);
  }
  return BaseLexicon(words);
}

const std::vector<std::string>& BaseLexicon::words_of_length(std::size_t length) const {
  static const std::vector<std::string> kEmpty;
  return length < by_length_.size() ? by_length_[length] : kEmpty;
}

double WeightedLexicon::weight(std::string_view word) const {
  auto it = weights.find(std::string(word));
  return it == weights.end() ? 0.0 : it->second;
}

WeightedLexicon build_candidate_lexicon(const std::vector<retrieval::Document>& docs, const BaseLexicon& base,
                                        double floor_weight) {
  if (!(floor_weight > 0.0) || !std::isfinite(floor_weight)) fail(ErrorKind::kConfig, "floor weight must be positive");
  WeightedLexicon lex;
  for (const auto& d : docs) {
    for (auto& w : text::word_tokens(d.contents)) {
      lex.weights[w] += 1.0;
      lex.document_words.insert(std::move(w));
    }
  }
  for (const auto& w : base.words()) lex.weights[w] += floor_weight;
  for (const auto& [w, weight] : lex.weights) lex.total_weight += weight;
  return lex;
}

ChannelCosts::ChannelCosts(const ChannelParams& p, const textnoise::KeyboardAdjacency& keyboard,
                           const textnoise::VisualConfusionTable& visual)
    : sub_(128), generic_(p.generic_sub_cost), insert_(p.insert_cost), delete_(p.delete_cost) {
  for (int a = 0; a < 128; ++a) {
    for (int b = 0; b < 128; ++b) {
      sub_[a][b] = substitution_cost(static_cast<char>(a), static_cast<char>(b), p, keyboard, visual);
    }
  }
}

double weighted_edit_distance(std::string_view a, std::string_view b, const ChannelCosts& costs, double cutoff) {
  const double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kStack = 64;
  double stack_prev[kStack], stack_cur[kStack];
  std::vector<double> heap_prev, heap_cur;
  double* prev = stack_prev;
  double* cur = stack_cur;
  if (b.size() + 1 > kStack) {
    heap_prev.resize(b.size() + 1);
    heap_cur.resize(b.size() + 1);
    prev = heap_prev.data();
    cur = heap_cur.data();
  }
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<double>(j) * costs.insertion();
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<double>(i) * costs.deletion();
    double row_min = cur[0];
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + costs.deletion(), cur[j - 1] + costs.insertion(),
                         prev[j - 1] + costs.substitution(a[i - 1], b[j - 1])});
      row_min = std::min(row_min, cur[j]);
    }
    if (row_min > cutoff) return inf;
    std::swap(prev, cur);
  }
  return prev[b.size()] > cutoff ? inf : prev[b.size()];
}

double weighted_edit_distance(std::string_view a, std::string_view b, const ChannelParams& p,
                              const textnoise::KeyboardAdjacency& keyboard, const textnoise::VisualConfusionTable& visual,
                              double cutoff) {
  p.validate();
  return weighted_edit_distance(a, b, ChannelCosts(p, keyboard, visual), cutoff);
}

void CorrectionContext::validate() const {
  if (base_lexicon == nullptr || keyboard == nullptr || visual == nullptr) {
    fail(ErrorKind::kConfig, "correction needs a base lexicon and the keyboard and visual tables");
  }
  channel.validate();
  if (!(lm_weight >= 0.0) || !std::isfinite(lm_weight)) fail(ErrorKind::kConfig, "lm_weight must be nonnegative");
  if (!(max_edit_distance >= 1.0)) fail(ErrorKind::kConfig, "max_edit_distance must be at least 1");
  if (!(floor_weight > 0.0) || !std::isfinite(floor_weight)) fail(ErrorKind::kConfig, "floor weight must be positive");
}

CorrectionResult correct_query(const CorrectionContext& ctx) {
  ctx.validate();
  if (text::trim(ctx.query).empty()) fail(ErrorKind::kInvalidInput, "query is empty");

  // Document counts; base words are scanned through the length index so the
  // full weighted map is never materialized here.
  std::map<std::string, double> doc_counts;
  double total = 0.0;
  for (const auto& d : ctx.retrieved_docs) {
    for (auto& w : text::word_tokens(d.contents)) {
      doc_counts[std::move(w)] += 1.0;
      total += 1.0;
    }
  }
  total += ctx.floor_weight * static_cast<double>(ctx.base_lexicon->size());
  const ChannelCosts costs(ctx.channel, *ctx.keyboard, *ctx.visual);
  const double min_indel = std::min(ctx.channel.insert_cost, ctx.channel.delete_cost);
  const auto max_len_gap = static_cast<std::size_t>(std::floor(ctx.max_edit_distance / min_indel + 1e-12));

  CorrectionResult result;
  std::string out;
  std::size_t last = 0;
  const auto spans = text::whitespace_spans(ctx.query);
  for (std::size_t ti = 0; ti < spans.size(); ++ti) {
    const auto& span = spans[ti];
    out.append(ctx.query.substr(last, span.begin - last));
    last = span.end;
    const std::string_view token = std::string_view(ctx.query).substr(span.begin, span.end - span.begin);
    const auto parts = text::split_token(token);
    const std::string lower = text::ascii_lower(parts.core);
    const bool keep = parts.core.empty() || !is_plain_alnum(parts.core) || is_numeric(parts.core) ||
                      ctx.base_lexicon->contains(lower) || doc_counts.contains(lower);
    if (keep) {
      out.append(token);
      ++result.untouched_count;
      continue;
    }

    // Best and second-best (score, word), ordered by score then word.
    using Scored = std::pair<double, std::string>;
    std::optional<Scored> best, second;
    auto consider = [&](const std::string& word, double weight) {
      const double cost = weighted_edit_distance(lower, word, costs, ctx.max_edit_distance);
      if (!std::isfinite(cost)) return;
      Scored s{cost - ctx.lm_weight * std::log(weight / total), word};
      if (!best || s < *best) {
        second = std::move(best);
        best = std::move(s);
      } else if (!second || s < *second) {
        second = std::move(s);
      }
    };
    for (const auto& [word, count] : doc_counts) {
      const std::size_t gap = word.size() > lower.size() ? word.size() - lower.size() : lower.size() - word.size();
      if (gap > max_len_gap) continue;
      consider(word, count + (ctx.base_lexicon->contains(word) ? ctx.floor_weight : 0.0));
    }
    const std::size_t lo = lower.size() > max_len_gap ? lower.size() - max_len_gap : 1;
    for (std::size_t len = lo; len <= lower.size() + max_len_gap; ++len) {
      for (const auto& word : ctx.base_lexicon->words_of_length(len)) {
        if (doc_counts.contains(word)) continue;
        consider(word, ctx.floor_weight);
      }
    }
    if (!best) {
      out.append(token);
      ++result.untouched_count;
      continue;
    }
    const std::string replacement = restore_case(parts.core, best->second);
    std::string new_token = std::string(parts.prefix) + replacement + std::string(parts.suffix);
    const double margin = second ? second->first - best->first : std::numeric_limits<double>::infinity();
    result.changed.push_back({ti, std::string(token), new_token, margin});
    out.append(new_token);
  }
  out.append(ctx.query.substr(last));
  result.corrected_query = std::move(out);
  return result;
}

}  // namespace noisyrag::correction
