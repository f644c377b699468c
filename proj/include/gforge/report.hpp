#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gforge/corpus.hpp"
#include "gforge/metrics.hpp"

namespace gforge {

struct DocumentEvaluation {
  std::string doc_id;
  ModeScores scores{};
};

// Corpus-level tables are micro-aggregated: counts are summed over documents
// before P/R/F1 are formed.
struct CorpusEvaluation {
  ModeScores overall{};
  std::map<Category, ModeScores> by_category;
  std::vector<DocumentEvaluation> documents;
};

// Scores every gold document against the predictions for it (none when the
// prediction corpus lacks the document). Throws DocumentMismatch when a
// predicted document is absent from gold or its text differs.
CorpusEvaluation evaluate_corpus(const Corpus& predicted, const Corpus& gold);

enum class TableFormat { Text, Csv };
std::optional<TableFormat> parse_table_format(std::string_view name) noexcept;

struct MethodScores {
  std::string method;
  ModeScores overall{};
  std::map<Category, ModeScores> by_category;
};

// Methods as rows, the four criteria x (P, R, F1) as columns.
std::string render_overall_table(std::span<const MethodScores> methods, TableFormat format);
// Category blocks (alphabetical, as published) with one row per method.
std::string render_category_table(std::span<const MethodScores> methods, TableFormat format);

MethodScores method_scores(std::string method, const CorpusEvaluation& eval);

}  // namespace gforge
