#include "gforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gforge/bipartite.hpp"
#include "gforge/error.hpp"

namespace gforge {

std::size_t mode_index(MatchMode mode) noexcept {
  return (mode.boundary == Boundary::Soft ? 2 : 0) + (mode.category_aware ? 0 : 1);
}

std::string_view mode_name(MatchMode mode) noexcept {
  static constexpr std::string_view kNames[] = {"strict", "strict-nocat", "soft", "soft-nocat"};
  return kNames[mode_index(mode)];
}

std::string_view mode_label(MatchMode mode) noexcept {
  static constexpr std::string_view kLabels[] = {"Strict Match", "Strict Match (w/o Category)", "Soft Match",
                                                 "Soft Match (w/o Category)"};
  return kLabels[mode_index(mode)];
}

std::optional<MatchMode> parse_mode(std::string_view name) noexcept {
  for (const MatchMode m : kAllModes) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

bool spans_compatible(const Annotation& a, const Annotation& b, Boundary boundary) noexcept {
  if (boundary == Boundary::Strict) return a.start == b.start && a.end == b.end;
  return a.start < b.end && b.start < a.end;
}

bool compatible(const Annotation& pred, const Annotation& gold, MatchMode mode) noexcept {
  if (!spans_compatible(pred, gold, mode.boundary)) return false;
  return !mode.category_aware || pred.category == gold.category;
}

namespace {

void check_same_document(std::span<const Annotation> pred, std::span<const Annotation> gold) {
  const Annotation* first = !pred.empty() ? &pred.front() : (!gold.empty() ? &gold.front() : nullptr);
  if (first == nullptr) return;
  auto check = [&](const Annotation& a) {
    if (a.doc_id != first->doc_id) {
      throw Error(Errc::MixedDocuments, "annotations from documents " + first->doc_id + " and " + a.doc_id);
    }
  };
  std::for_each(pred.begin(), pred.end(), check);
  std::for_each(gold.begin(), gold.end(), check);
}

std::vector<Annotation> sorted_copy(std::span<const Annotation> in) {
  std::vector<Annotation> out(in.begin(), in.end());
  std::sort(out.begin(), out.end(), annotation_less);
  return out;
}

// Matches pred[pred_ids] against gold[gold_ids]; returns (pred id, gold id)
// pairs in pred order plus the unmatched ids of each side.
struct SubMatching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> pred_left;
  std::vector<std::size_t> gold_left;
};

template <typename Compatible>
SubMatching match_subsets(const std::vector<std::size_t>& pred_ids, const std::vector<std::size_t>& gold_ids,
                          Compatible&& ok) {
  std::vector<std::vector<std::size_t>> adjacency(pred_ids.size());
  for (std::size_t i = 0; i < pred_ids.size(); ++i) {
    for (std::size_t j = 0; j < gold_ids.size(); ++j) {
      if (ok(pred_ids[i], gold_ids[j])) adjacency[i].push_back(j);
    }
  }
  const auto match = maximum_matching(adjacency, gold_ids.size());
  SubMatching out;
  std::vector<bool> gold_used(gold_ids.size(), false);
  for (std::size_t i = 0; i < pred_ids.size(); ++i) {
    if (match[i] == kUnmatched) {
      out.pred_left.push_back(pred_ids[i]);
    } else {
      out.pairs.emplace_back(pred_ids[i], gold_ids[match[i]]);
      gold_used[match[i]] = true;
    }
  }
  for (std::size_t j = 0; j < gold_ids.size(); ++j) {
    if (!gold_used[j]) out.gold_left.push_back(gold_ids[j]);
  }
  return out;
}

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

}  // namespace

MatchResult match_annotations(std::span<const Annotation> pred_in, std::span<const Annotation> gold_in,
                              MatchMode mode) {
  check_same_document(pred_in, gold_in);
  const auto pred = sorted_copy(pred_in);
  const auto gold = sorted_copy(gold_in);

  const auto first = match_subsets(iota_ids(pred.size()), iota_ids(gold.size()), [&](std::size_t p, std::size_t g) {
    return compatible(pred[p], gold[g], mode);
  });

  MatchResult result;
  for (const auto& [p, g] : first.pairs) result.pairs.emplace_back(pred[p], gold[g]);

  std::vector<std::size_t> pred_left = first.pred_left;
  std::vector<std::size_t> gold_left = first.gold_left;
  if (mode.category_aware) {
    const auto second = match_subsets(pred_left, gold_left, [&](std::size_t p, std::size_t g) {
      return spans_compatible(pred[p], gold[g], mode.boundary);
    });
    for (const auto& [p, g] : second.pairs) result.category_mismatches.emplace_back(pred[p], gold[g]);
    pred_left = second.pred_left;
    gold_left = second.gold_left;
  }
  for (const std::size_t p : pred_left) result.false_positives.push_back(pred[p]);
  for (const std::size_t g : gold_left) result.false_negatives.push_back(gold[g]);
  return result;
}

double PRF::precision() const noexcept {
  return n_pred == 0 ? 0.0 : static_cast<double>(matched_pred) / static_cast<double>(n_pred);
}

double PRF::recall() const noexcept {
  return n_gold == 0 ? 0.0 : static_cast<double>(matched_gold) / static_cast<double>(n_gold);
}

double PRF::f1() const noexcept {
  if (matched_pred == matched_gold) {
    const std::size_t denom = n_pred + n_gold;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(matched_pred) / static_cast<double>(denom);
  }
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

PRF& PRF::operator+=(const PRF& other) noexcept {
  matched_pred += other.matched_pred;
  matched_gold += other.matched_gold;
  n_pred += other.n_pred;
  n_gold += other.n_gold;
  return *this;
}

PRF score(const MatchResult& result) noexcept {
  return PRF::from_counts(result.pairs.size(), result.n_pred(), result.n_gold());
}

ModeScores score_all_modes(std::span<const Annotation> pred, std::span<const Annotation> gold) {
  ModeScores out{};
  for (const MatchMode m : kAllModes) out[mode_index(m)] = score(match_annotations(pred, gold, m));
  return out;
}

std::map<Category, PRF> per_category_scores(std::span<const Annotation> pred, std::span<const Annotation> gold,
                                            MatchMode mode) {
  check_same_document(pred, gold);
  std::map<Category, PRF> out;
  if (mode.category_aware) {
    for (const Category c : kAllCategories) {
      std::vector<Annotation> pred_c;
      std::vector<Annotation> gold_c;
      std::copy_if(pred.begin(), pred.end(), std::back_inserter(pred_c),
                   [c](const Annotation& a) { return a.category == c; });
      std::copy_if(gold.begin(), gold.end(), std::back_inserter(gold_c),
                   [c](const Annotation& a) { return a.category == c; });
      const auto result = match_annotations(pred_c, gold_c, mode);
      out[c] = PRF::from_counts(result.pairs.size(), pred_c.size(), gold_c.size());
    }
    return out;
  }
  // One boundary-only matching over the full sets, attributed by label.
  const auto result = match_annotations(pred, gold, mode);
  for (const Category c : kAllCategories) out[c] = PRF{};
  for (const auto& a : pred) ++out[a.category].n_pred;
  for (const auto& a : gold) ++out[a.category].n_gold;
  for (const auto& [p, g] : result.pairs) {
    ++out[p.category].matched_pred;
    ++out[g.category].matched_gold;
  }
  return out;
}

double mean_document_f1(std::span<const PRF> per_doc) {
  if (per_doc.empty()) throw Error(Errc::EmptyBatch, "cannot average F1 over zero documents");
  double sum = 0.0;
  // A document with no gold and no predicted mentions is full agreement for
  // gating purposes, not a zero.
  for (const PRF& s : per_doc) sum += (s.n_pred == 0 && s.n_gold == 0) ? 1.0 : s.f1();
  return sum / static_cast<double>(per_doc.size());
}

std::string_view aggregation_name(GateAggregation a) noexcept {
  return a == GateAggregation::Macro ? "macro" : "micro";
}

std::optional<GateAggregation> parse_aggregation(std::string_view name) noexcept {
  if (name == "macro") return GateAggregation::Macro;
  if (name == "micro") return GateAggregation::Micro;
  return std::nullopt;
}

double gate_value(std::span<const PRF> per_doc, GateAggregation aggregation) {
  if (aggregation == GateAggregation::Macro) return mean_document_f1(per_doc);
  if (per_doc.empty()) throw Error(Errc::EmptyBatch, "cannot aggregate F1 over zero documents");
  PRF total;
  for (const PRF& s : per_doc) total += s;
  return (total.n_pred == 0 && total.n_gold == 0) ? 1.0 : total.f1();
}

double round_half_up_2(double value) noexcept {
  // The epsilon keeps binary representation error (0.365 stored as
  // 0.36499999...) from rounding a decimal tie downwards.
  return std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0;
}

std::string format_score(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", round_half_up_2(value));
  return buf;
}

}  // namespace gforge
