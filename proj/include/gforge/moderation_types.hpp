#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gforge/corpus.hpp"
#include "gforge/guidelines.hpp"

namespace gforge {

// Closed taxonomy of influencing factors a moderator may assign to a
// discrepancy, plus a catch-all.
enum class InfluenceFactor {
  AmbiguousAbbreviations,
  GenericDescriptors,
  ChromosomalGenomicAnomalies,
  PhenotypicFeatures,
  NonSpecificGeneticDescriptions,
  MiscellaneousTerms,
  Unclassified,
};

inline constexpr std::array<InfluenceFactor, 7> kAllFactors{
    InfluenceFactor::AmbiguousAbbreviations,        InfluenceFactor::GenericDescriptors,
    InfluenceFactor::ChromosomalGenomicAnomalies,   InfluenceFactor::PhenotypicFeatures,
    InfluenceFactor::NonSpecificGeneticDescriptions, InfluenceFactor::MiscellaneousTerms,
    InfluenceFactor::Unclassified};

std::string_view factor_name(InfluenceFactor f) noexcept;
// Case- and surrounding-whitespace-insensitive; anything else is Unclassified.
InfluenceFactor parse_factor(std::string_view name) noexcept;

enum class DiscrepancyKind { FalsePositive, FalseNegative, CategoryMismatch };
std::string_view discrepancy_kind_name(DiscrepancyKind k) noexcept;
std::optional<DiscrepancyKind> parse_discrepancy_kind(std::string_view name) noexcept;

struct Discrepancy {
  DiscrepancyKind kind = DiscrepancyKind::FalsePositive;
  std::optional<Annotation> predicted;
  std::optional<Annotation> gold;
  std::string doc_id;
  std::string context;            // window of document text around the span
  std::size_t context_start = 0;  // scalar offset of context within the text

  // Scalar span the discrepancy covers (union of predicted and gold).
  std::size_t start() const noexcept;
  std::size_t end() const noexcept;

  friend bool operator==(const Discrepancy&, const Discrepancy&) = default;
};

struct ReportItem {
  std::size_t discrepancy = 0;  // index into the iteration's discrepancy list
  Discrepancy subject;
  std::string cause;
  InfluenceFactor factor = InfluenceFactor::Unclassified;
  std::string solution;

  friend bool operator==(const ReportItem&, const ReportItem&) = default;
};

struct ParseWarning {
  std::string item;
  std::string reason;
  friend bool operator==(const ParseWarning&, const ParseWarning&) = default;
};

struct ModerationReport {
  std::vector<ReportItem> items;
  std::optional<Revision> proposed_revision;
  // Prompt digests of the analyze and update exchanges.
  std::vector<std::string> exchanges;
  std::vector<ParseWarning> warnings;

  friend bool operator==(const ModerationReport&, const ModerationReport&) = default;
};

}  // namespace gforge
