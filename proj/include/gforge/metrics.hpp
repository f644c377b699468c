#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gforge/corpus.hpp"

namespace gforge {

enum class Boundary { Strict, Soft };

// The four evaluation criteria: {Strict, Soft} x {with, without category}.
struct MatchMode {
  Boundary boundary = Boundary::Strict;
  bool category_aware = true;

  friend constexpr bool operator==(const MatchMode&, const MatchMode&) = default;
};

inline constexpr MatchMode kStrict{Boundary::Strict, true};
inline constexpr MatchMode kStrictNoCategory{Boundary::Strict, false};
inline constexpr MatchMode kSoft{Boundary::Soft, true};
inline constexpr MatchMode kSoftNoCategory{Boundary::Soft, false};
// Report column order.
inline constexpr std::array<MatchMode, 4> kAllModes{kStrict, kStrictNoCategory, kSoft, kSoftNoCategory};

std::size_t mode_index(MatchMode mode) noexcept;
// Short machine name: strict, strict-nocat, soft, soft-nocat.
std::string_view mode_name(MatchMode mode) noexcept;
// Column label, e.g. "Strict Match (w/o Category)".
std::string_view mode_label(MatchMode mode) noexcept;
std::optional<MatchMode> parse_mode(std::string_view name) noexcept;

// Strict: identical offsets. Soft: at least one shared character position.
bool spans_compatible(const Annotation& a, const Annotation& b, Boundary boundary) noexcept;
bool compatible(const Annotation& pred, const Annotation& gold, MatchMode mode) noexcept;

struct MatchResult {
  std::vector<std::pair<Annotation, Annotation>> pairs;  // (pred, gold)
  std::vector<Annotation> false_positives;
  std::vector<Annotation> false_negatives;
  // Span-compatible but differently labelled (category-aware modes only).
  std::vector<std::pair<Annotation, Annotation>> category_mismatches;

  std::size_t n_pred() const noexcept { return pairs.size() + false_positives.size() + category_mismatches.size(); }
  std::size_t n_gold() const noexcept { return pairs.size() + false_negatives.size() + category_mismatches.size(); }
};

// Maximum-cardinality one-to-one matching under `mode`. In category-aware
// modes the leftovers are matched again with the category test dropped and
// those extra pairs become category mismatches. Throws MixedDocuments.
MatchResult match_annotations(std::span<const Annotation> pred, std::span<const Annotation> gold, MatchMode mode);

// Precision/recall/F1 kept as counts. matched_pred and matched_gold only
// differ for the per-category "without category" attribution, where the
// precision and recall sides are filtered by different labels.
struct PRF {
  std::size_t matched_pred = 0;
  std::size_t matched_gold = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;

  static PRF from_counts(std::size_t matched, std::size_t n_pred, std::size_t n_gold) noexcept {
    return PRF{matched, matched, n_pred, n_gold};
  }

  std::size_t matched() const noexcept { return matched_pred; }
  double precision() const noexcept;
  double recall() const noexcept;
  // 2*matched/(n_pred+n_gold); harmonic mean of P and R when the matched
  // counts of the two sides differ.
  double f1() const noexcept;

  PRF& operator+=(const PRF& other) noexcept;
  friend bool operator==(const PRF&, const PRF&) = default;
};

PRF score(const MatchResult& result) noexcept;

// One PRF per mode, in kAllModes order.
using ModeScores = std::array<PRF, 4>;
ModeScores score_all_modes(std::span<const Annotation> pred, std::span<const Annotation> gold);

std::map<Category, PRF> per_category_scores(std::span<const Annotation> pred, std::span<const Annotation> gold,
                                            MatchMode mode);

// Macro mean of per-document F1; a document with neither gold nor predicted
// mentions counts as 1. Throws EmptyBatch.
double mean_document_f1(std::span<const PRF> per_doc);

enum class GateAggregation { Macro, Micro };
std::string_view aggregation_name(GateAggregation a) noexcept;
std::optional<GateAggregation> parse_aggregation(std::string_view name) noexcept;
// Macro: mean_document_f1. Micro: F1 of the summed counts. Throws EmptyBatch.
double gate_value(std::span<const PRF> per_doc, GateAggregation aggregation);

// Half-up rounding to two decimals, rendered "0.36".
double round_half_up_2(double value) noexcept;
std::string format_score(double value);

}  // namespace gforge
