#include "gforge/report.hpp"

#include <algorithm>

#include "gforge/error.hpp"

namespace gforge {

CorpusEvaluation evaluate_corpus(const Corpus& predicted, const Corpus& gold) {
  for (const Document& doc : predicted.documents()) {
    const Document* ref = gold.find(doc.doc_id());
    if (ref == nullptr) throw Error(Errc::DocumentMismatch, "predicted document " + doc.doc_id() + " not in gold");
    if (!(ref->text() == doc.text())) {
      throw Error(Errc::DocumentMismatch, "document " + doc.doc_id() + " text differs between prediction and gold");
    }
  }
  CorpusEvaluation eval;
  for (const Category c : kAllCategories) eval.by_category[c] = ModeScores{};
  for (const Document& doc : gold.documents()) {
    const auto pred = predicted.gold(doc.doc_id());
    const auto ref = gold.gold(doc.doc_id());
    DocumentEvaluation de{doc.doc_id(), score_all_modes(pred, ref)};
    for (std::size_t m = 0; m < kAllModes.size(); ++m) {
      eval.overall[m] += de.scores[m];
      for (const auto& [c, prf] : per_category_scores(pred, ref, kAllModes[m])) eval.by_category[c][m] += prf;
    }
    eval.documents.push_back(std::move(de));
  }
  return eval;
}

std::optional<TableFormat> parse_table_format(std::string_view name) noexcept {
  if (name == "text") return TableFormat::Text;
  if (name == "csv") return TableFormat::Csv;
  return std::nullopt;
}

MethodScores method_scores(std::string method, const CorpusEvaluation& eval) {
  return MethodScores{std::move(method), eval.overall, eval.by_category};
}

namespace {

constexpr Category kTableCategoryOrder[] = {Category::CompositeMention, Category::DiseaseClass, Category::Modifier,
                                            Category::SpecificDisease};

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string pad(std::string_view s, std::size_t width) {
  std::string out(s);
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

constexpr std::size_t kCell = 6;  // "0.36" plus two spaces

std::size_t block_width(MatchMode m) { return std::max<std::size_t>(mode_label(m).size() + 2, 3 * kCell + 2); }

std::string csv_score_header() {
  std::string h;
  for (const MatchMode m : kAllModes) {
    for (const char* metric : {"P", "R", "F1"}) {
      h.append(1, ',').append(csv_field(std::string(mode_label(m)) + " " + metric));
    }
  }
  return h;
}

std::string csv_scores(const ModeScores& s) {
  std::string out;
  for (const PRF& prf : s) {
    out.append(1, ',').append(format_score(prf.precision()));
    out.append(1, ',').append(format_score(prf.recall()));
    out.append(1, ',').append(format_score(prf.f1()));
  }
  return out;
}

std::string text_score_headers(std::size_t lead) {
  std::string line1(lead, ' ');
  std::string line2(lead, ' ');
  for (const MatchMode m : kAllModes) {
    line1 += pad(mode_label(m), block_width(m));
    line2 += pad(pad("P", kCell) + pad("R", kCell) + "F1", block_width(m));
  }
  while (!line1.empty() && line1.back() == ' ') line1.pop_back();
  while (!line2.empty() && line2.back() == ' ') line2.pop_back();
  return line1 + "\n" + line2 + "\n";
}

std::string text_scores(const ModeScores& s) {
  std::string out;
  for (std::size_t i = 0; i < kAllModes.size(); ++i) {
    const PRF& prf = s[i];
    out += pad(pad(format_score(prf.precision()), kCell) + pad(format_score(prf.recall()), kCell) +
                   format_score(prf.f1()),
               block_width(kAllModes[i]));
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

std::string render_overall_table(std::span<const MethodScores> methods, TableFormat format) {
  std::string out;
  if (format == TableFormat::Csv) {
    out = "Method" + csv_score_header() + "\n";
    for (const auto& m : methods) out += csv_field(m.method) + csv_scores(m.overall) + "\n";
    return out;
  }
  std::size_t width = std::string_view("Method").size();
  for (const auto& m : methods) width = std::max(width, m.method.size());
  width += 2;
  std::string header = text_score_headers(width);
  header.replace(0, 6, "Method");
  out = header;
  for (const auto& m : methods) out += pad(m.method, width) + text_scores(m.overall) + "\n";
  return out;
}

std::string render_category_table(std::span<const MethodScores> methods, TableFormat format) {
  std::string out;
  auto scores_for = [](const MethodScores& m, Category c) {
    const auto it = m.by_category.find(c);
    return it == m.by_category.end() ? ModeScores{} : it->second;
  };
  if (format == TableFormat::Csv) {
    out = "Category,Method" + csv_score_header() + "\n";
    for (const Category c : kTableCategoryOrder) {
      for (const auto& m : methods) {
        out += csv_field(category_display_name(c)) + "," + csv_field(m.method) + csv_scores(scores_for(m, c)) + "\n";
      }
    }
    return out;
  }
  std::size_t cat_width = std::string_view("Category").size();
  for (const Category c : kTableCategoryOrder) cat_width = std::max(cat_width, category_display_name(c).size());
  cat_width += 2;
  std::size_t method_width = std::string_view("Method").size();
  for (const auto& m : methods) method_width = std::max(method_width, m.method.size());
  method_width += 2;
  std::string header = text_score_headers(cat_width + method_width);
  header.replace(0, cat_width + 6, pad("Category", cat_width) + "Method");
  out = header;
  for (const Category c : kTableCategoryOrder) {
    bool first = true;
    for (const auto& m : methods) {
      out += pad(first ? category_display_name(c) : "", cat_width) + pad(m.method, method_width) +
             text_scores(scores_for(m, c)) + "\n";
      first = false;
    }
  }
  return out;
}

}  // namespace gforge
