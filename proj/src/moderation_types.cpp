#include "gforge/moderation_types.hpp"

#include <algorithm>
#include <cctype>

namespace gforge {

std::string_view factor_name(InfluenceFactor f) noexcept {
  switch (f) {
    case InfluenceFactor::AmbiguousAbbreviations: return "Ambiguous Abbreviations and Acronyms";
    case InfluenceFactor::GenericDescriptors: return "Generic or Vague Descriptors";
    case InfluenceFactor::ChromosomalGenomicAnomalies: return "Chromosomal and Genomic Anomaly Terms";
    case InfluenceFactor::PhenotypicFeatures: return "Descriptive or Phenotypic Features";
    case InfluenceFactor::NonSpecificGeneticDescriptions:
      return "Incomplete or Non-Specific Genetic/Pathological Descriptions";
    case InfluenceFactor::MiscellaneousTerms: return "Miscellaneous or Low-Frequency Terms";
    case InfluenceFactor::Unclassified: return "unclassified";
  }
  return "unclassified";
}

InfluenceFactor parse_factor(std::string_view name) noexcept {
  const auto b = name.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return InfluenceFactor::Unclassified;
  name = name.substr(b, name.find_last_not_of(" \t\r\n") - b + 1);
  auto iequal = [](std::string_view a, std::string_view c) {
    return a.size() == c.size() && std::equal(a.begin(), a.end(), c.begin(), [](char x, char y) {
             return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
  };
  for (const InfluenceFactor f : kAllFactors) {
    if (iequal(factor_name(f), name)) return f;
  }
  return InfluenceFactor::Unclassified;
}

std::string_view discrepancy_kind_name(DiscrepancyKind k) noexcept {
  switch (k) {
    case DiscrepancyKind::FalsePositive: return "FalsePositive";
    case DiscrepancyKind::FalseNegative: return "FalseNegative";
    case DiscrepancyKind::CategoryMismatch: return "CategoryMismatch";
  }
  return "FalsePositive";
}

std::optional<DiscrepancyKind> parse_discrepancy_kind(std::string_view name) noexcept {
  for (const auto k : {DiscrepancyKind::FalsePositive, DiscrepancyKind::FalseNegative,
                       DiscrepancyKind::CategoryMismatch}) {
    if (discrepancy_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::size_t Discrepancy::start() const noexcept {
  if (predicted && gold) return std::min(predicted->start, gold->start);
  return predicted ? predicted->start : (gold ? gold->start : 0);
}

std::size_t Discrepancy::end() const noexcept {
  if (predicted && gold) return std::max(predicted->end, gold->end);
  return predicted ? predicted->end : (gold ? gold->end : 0);
}

}  // namespace gforge
