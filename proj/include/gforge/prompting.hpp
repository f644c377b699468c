#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gforge/corpus.hpp"
#include "gforge/guidelines.hpp"
#include "gforge/moderation_types.hpp"

namespace gforge {

// Prompt text lives in editable files with {{name}} placeholders. The
// defaults are compiled in from templates/ at build time; load() overrides
// any template whose file exists in the given directory.
struct PromptTemplates {
  std::string annotator_role;
  std::string annotator_task;
  std::string annotator_format;
  std::string annotator_guidelines;
  std::string annotator_payload;
  std::string moderator_analyze;
  std::string moderator_update;
  std::string revision_schema;

  static const PromptTemplates& defaults();
  static PromptTemplates load(const std::filesystem::path& dir);
};

// Substitutes {{name}} placeholders. Throws InvalidArgument for a placeholder
// without a value. Substituted text is not rescanned.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

struct PromptParts {
  std::string role_definition;
  std::string task_description;
  std::string format_rules;
  std::optional<std::string> guidelines;
  std::string payload;
};

// Three instruction blocks, an optional guideline block, then the payload.
PromptParts annotator_prompt_parts(const Document& doc, const GuidelineDoc* guideline,
                                   const PromptTemplates& templates = PromptTemplates::defaults());
std::string render_prompt(const PromptParts& parts);

// Baseline prompt when guideline is null.
std::string build_annotator_prompt(const Document& doc, const GuidelineDoc* guideline,
                                   const PromptTemplates& templates = PromptTemplates::defaults());

// Throws EmptyDiscrepancies.
std::string build_moderator_analyze_prompt(std::span<const Discrepancy> discrepancies, const GuidelineDoc& guideline,
                                           std::span<const Document> batch,
                                           const PromptTemplates& templates = PromptTemplates::defaults());

std::string build_moderator_update_prompt(const ModerationReport& report, const GuidelineDoc& guideline,
                                          const PromptTemplates& templates = PromptTemplates::defaults());

// One line per discrepancy block, numbered from 1, with the span marked by
// [[ ]] inside its context.
std::string render_discrepancies(std::span<const Discrepancy> discrepancies);
std::string render_report_items(std::span<const ReportItem> items);

// Locates the JSON payload in a model reply: the whole reply, a fenced code
// block, or the first balanced {...} / [...] that parses.
std::optional<std::string> extract_json_text(std::string_view raw);

struct ParsedOutput {
  std::vector<Annotation> annotations;
  std::vector<ParseWarning> warnings;
};

// Accepts {"annotations": [...]} or a bare list of {mention, category,
// start?}. Offsets are verified hints; otherwise the mention is aligned to
// its leftmost occurrence not already used. Bad items become warnings.
// Throws Unparseable only when no payload can be extracted.
ParsedOutput parse_annotator_output(std::string_view raw, const Document& doc);

struct ParsedReport {
  std::vector<ReportItem> items;
  std::vector<ParseWarning> warnings;
};
// Throws Unparseable.
ParsedReport parse_moderation_report(std::string_view raw, std::span<const Discrepancy> discrepancies);

struct ParsedRevision {
  Revision revision;
  std::vector<ParseWarning> warnings;
};
// Edits naming unknown sections (or re-adding an existing one) are dropped
// into warnings. Throws Unparseable, or EmptyRevision when no edit survives.
ParsedRevision parse_revision(std::string_view raw, const GuidelineDoc& guideline, Author author);

}  // namespace gforge
