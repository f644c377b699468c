#include "gforge/prompting.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <utility>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/utf8.hpp"
#include "templates_embedded.hpp"

namespace gforge {

using nlohmann::json;

namespace {

std::string strip_final_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  return std::string(s);
}

constexpr std::string_view kRoleLabel = "### Role definition";
constexpr std::string_view kTaskLabel = "### Task description";
constexpr std::string_view kFormatLabel = "### Output format and categories";
constexpr std::string_view kGuidelineLabel = "### Annotation guidelines";
constexpr std::string_view kPayloadRule = "==========";

}  // namespace

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates t{
      strip_final_newline(embedded::annotator_role),      strip_final_newline(embedded::annotator_task),
      strip_final_newline(embedded::annotator_format),    strip_final_newline(embedded::annotator_guidelines),
      strip_final_newline(embedded::annotator_payload),   strip_final_newline(embedded::moderator_analyze),
      strip_final_newline(embedded::moderator_update),    strip_final_newline(embedded::revision_schema),
  };
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t = defaults();
  const std::pair<const char*, std::string*> files[] = {
      {"annotator_role.txt", &t.annotator_role},         {"annotator_task.txt", &t.annotator_task},
      {"annotator_format.txt", &t.annotator_format},     {"annotator_guidelines.txt", &t.annotator_guidelines},
      {"annotator_payload.txt", &t.annotator_payload},   {"moderator_analyze.txt", &t.moderator_analyze},
      {"moderator_update.txt", &t.moderator_update},     {"revision_schema.txt", &t.revision_schema},
  };
  for (const auto& [name, slot] : files) {
    const auto path = dir / name;
    if (std::filesystem::exists(path)) *slot = strip_final_newline(fsutil::read_file(path));
  }
  return t;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    const auto it = values.find(name);
    if (it == values.end()) throw Error(Errc::InvalidArgument, "template placeholder {{" + name + "}} has no value");
    out.append(tmpl.substr(pos, open - pos)).append(it->second);
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

PromptParts annotator_prompt_parts(const Document& doc, const GuidelineDoc* guideline,
                                   const PromptTemplates& templates) {
  PromptParts parts;
  parts.role_definition = templates.annotator_role;
  parts.task_description = templates.annotator_task;
  parts.format_rules = templates.annotator_format;
  if (guideline != nullptr) {
    parts.guidelines = fill_template(templates.annotator_guidelines, {{"guideline", render(*guideline)}});
  }
  parts.payload = fill_template(templates.annotator_payload, {{"doc_id", doc.doc_id()}, {"text", doc.text()}});
  return parts;
}

std::string render_prompt(const PromptParts& parts) {
  std::string out;
  auto block = [&](std::string_view label, std::string_view body) {
    out.append(label).append(1, '\n').append(body).append("\n\n");
  };
  block(kRoleLabel, parts.role_definition);
  block(kTaskLabel, parts.task_description);
  block(kFormatLabel, parts.format_rules);
  if (parts.guidelines) block(kGuidelineLabel, *parts.guidelines);
  out.append(kPayloadRule).append(1, '\n').append(parts.payload).append(1, '\n');
  return out;
}

std::string build_annotator_prompt(const Document& doc, const GuidelineDoc* guideline,
                                   const PromptTemplates& templates) {
  return render_prompt(annotator_prompt_parts(doc, guideline, templates));
}

namespace {

std::string quote(std::string_view s) { return json(std::string(s)).dump(); }

std::string describe(const Annotation& a) {
  return quote(a.mention) + " [" + std::to_string(a.start) + ", " + std::to_string(a.end) + ") " +
         std::string(category_label(a.category));
}

std::string marked_context(const Discrepancy& d) {
  const auto offsets = utf8::scalar_offsets(d.context);
  const std::size_t n = offsets.size() - 1;
  auto clamp = [&](std::size_t scalar) {
    const std::size_t rel = scalar >= d.context_start ? scalar - d.context_start : 0;
    return offsets[std::min(rel, n)];
  };
  const std::size_t b0 = clamp(d.start());
  const std::size_t b1 = clamp(d.end());
  std::string out = d.context.substr(0, b0);
  out.append("[[").append(d.context.substr(b0, b1 - b0)).append("]]").append(d.context.substr(b1));
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace

std::string render_discrepancies(std::span<const Discrepancy> discrepancies) {
  std::string out;
  for (std::size_t i = 0; i < discrepancies.size(); ++i) {
    const Discrepancy& d = discrepancies[i];
    out.append("[" + std::to_string(i + 1) + "] ")
        .append(discrepancy_kind_name(d.kind))
        .append(" in document ")
        .append(d.doc_id)
        .append(1, '\n');
    if (d.predicted) out.append("    predicted: ").append(describe(*d.predicted)).append(1, '\n');
    if (d.gold) out.append("    gold: ").append(describe(*d.gold)).append(1, '\n');
    out.append("    context: ").append(marked_context(d)).append(1, '\n');
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string render_report_items(std::span<const ReportItem> items) {
  std::string out;
  for (const ReportItem& item : items) {
    const Discrepancy& d = item.subject;
    const Annotation* a = d.gold ? &*d.gold : (d.predicted ? &*d.predicted : nullptr);
    out.append("[" + std::to_string(item.discrepancy + 1) + "] ")
        .append(discrepancy_kind_name(d.kind))
        .append(" in document ")
        .append(d.doc_id);
    if (a != nullptr) out.append(": ").append(quote(a->mention));
    out.append(1, '\n');
    if (d.predicted) out.append("    predicted: ").append(describe(*d.predicted)).append(1, '\n');
    if (d.gold) out.append("    gold: ").append(describe(*d.gold)).append(1, '\n');
    out.append("    factor: ").append(factor_name(item.factor)).append(1, '\n');
    out.append("    cause: ").append(item.cause).append(1, '\n');
    out.append("    solution: ").append(item.solution).append(1, '\n');
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string build_moderator_analyze_prompt(std::span<const Discrepancy> discrepancies, const GuidelineDoc& guideline,
                                           std::span<const Document> batch, const PromptTemplates& templates) {
  if (discrepancies.empty()) throw Error(Errc::EmptyDiscrepancies, "nothing to analyse");
  std::string factors;
  for (const InfluenceFactor f : kAllFactors) {
    if (f == InfluenceFactor::Unclassified) continue;
    factors.append("- ").append(factor_name(f)).append(1, '\n');
  }
  factors.pop_back();
  std::string documents;
  for (const Document& doc : batch) {
    if (!documents.empty()) documents.append("\n");
    documents.append("Document ").append(doc.doc_id()).append(":\n").append(doc.text()).append(1, '\n');
  }
  if (!documents.empty()) documents.pop_back();
  return fill_template(templates.moderator_analyze, {{"factors", factors},
                                                     {"version", guideline.version_id()},
                                                     {"guideline", render(guideline)},
                                                     {"documents", documents},
                                                     {"discrepancies", render_discrepancies(discrepancies)}});
}

std::string build_moderator_update_prompt(const ModerationReport& report, const GuidelineDoc& guideline,
                                          const PromptTemplates& templates) {
  std::string ids;
  for (const auto& id : guideline.section_ids()) {
    if (!ids.empty()) ids.append(", ");
    ids.append(id);
  }
  const std::string items = report.items.empty() ? "(no items)" : render_report_items(report.items);
  return fill_template(templates.moderator_update, {{"version", guideline.version_id()},
                                                    {"guideline", render(guideline)},
                                                    {"section_ids", ids},
                                                    {"report", items},
                                                    {"revision_schema", templates.revision_schema}});
}

namespace {

// End of the balanced JSON value starting at raw[start] ('{' or '['),
// honouring string literals; npos when unbalanced.
std::size_t balanced_end(std::string_view raw, std::size_t start) {
  std::vector<char> stack;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      stack.push_back(c == '{' ? '}' : ']');
    } else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) return std::string_view::npos;
      stack.pop_back();
      if (stack.empty()) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::string_view trim_view(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

bool is_json(std::string_view s) { return !s.empty() && json::accept(s); }

json parse_payload(std::string_view raw) {
  const auto text = extract_json_text(raw);
  if (!text) throw Error(Errc::Unparseable, "no JSON payload found in model output");
  return json::parse(*text);
}

std::string item_text(const json& item) { return item.dump(); }

const json* find_list(const json& payload, std::initializer_list<const char*> keys) {
  if (payload.is_array()) return &payload;
  if (!payload.is_object()) return nullptr;
  for (const char* key : keys) {
    const auto it = payload.find(key);
    if (it != payload.end() && it->is_array()) return &*it;
  }
  return nullptr;
}

}  // namespace

std::optional<std::string> extract_json_text(std::string_view raw) {
  const auto whole = trim_view(raw);
  if (is_json(whole) && (whole.front() == '{' || whole.front() == '[')) return std::string(whole);

  std::size_t pos = 0;
  while ((pos = raw.find("```", pos)) != std::string_view::npos) {
    std::size_t body = raw.find('\n', pos + 3);
    if (body == std::string_view::npos) break;
    const std::size_t close = raw.find("```", body + 1);
    if (close == std::string_view::npos) break;
    const auto inner = trim_view(raw.substr(body + 1, close - body - 1));
    if (is_json(inner)) return std::string(inner);
    pos = close + 3;
  }

  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{' && raw[i] != '[') continue;
    const std::size_t end = balanced_end(raw, i);
    if (end == std::string_view::npos) continue;
    const auto candidate = raw.substr(i, end - i);
    if (is_json(candidate)) return std::string(candidate);
  }
  return std::nullopt;
}

ParsedOutput parse_annotator_output(std::string_view raw, const Document& doc) {
  const json payload = parse_payload(raw);
  const json* items = find_list(payload, {"annotations", "mentions", "entities"});
  json single = json::array();
  if (items == nullptr && payload.is_object() && payload.contains("mention")) {
    single.push_back(payload);
    items = &single;
  }
  if (items == nullptr) throw Error(Errc::Unparseable, "model output has no annotation list");

  ParsedOutput out;
  std::set<std::pair<std::size_t, std::size_t>> used;
  const std::string& text = doc.text();
  for (const json& item : *items) {
    auto warn = [&](std::string reason) { out.warnings.push_back(ParseWarning{item_text(item), std::move(reason)}); };
    if (!item.is_object()) {
      warn("item is not an object");
      continue;
    }
    const auto mention_it = item.find("mention");
    if (mention_it == item.end() || !mention_it->is_string() || mention_it->get<std::string>().empty()) {
      warn("missing mention");
      continue;
    }
    const std::string mention = mention_it->get<std::string>();
    const auto category_it = item.find("category");
    if (category_it == item.end() || !category_it->is_string()) {
      warn("missing category");
      continue;
    }
    const auto category = parse_category(category_it->get<std::string>());
    if (!category) {
      warn("unknown category \"" + category_it->get<std::string>() + "\"");
      continue;
    }
    if (!utf8::is_valid(mention)) {
      warn("mention is not valid UTF-8");
      continue;
    }
    const std::size_t len = utf8::length(mention);

    std::optional<std::size_t> start;
    const auto start_it = item.find("start");
    if (start_it != item.end() && start_it->is_number_unsigned()) {
      const auto hint = start_it->get<std::size_t>();
      if (hint + len <= doc.length() && doc.slice(hint, hint + len) == mention &&
          used.count({hint, hint + len}) == 0) {
        start = hint;
      }
    }
    bool occurs = false;
    for (std::size_t pos = text.find(mention); !start && pos != std::string::npos; pos = text.find(mention, pos + 1)) {
      occurs = true;
      const std::size_t s = doc.scalar_index(pos);
      if (used.count({s, s + len}) == 0) start = s;
    }
    if (!start) {
      warn(occurs ? "every occurrence of the mention is already annotated" : "mention does not occur in the document");
      continue;
    }
    used.insert({*start, *start + len});
    out.annotations.push_back(Annotation{doc.doc_id(), *start, *start + len, mention, *category, std::nullopt});
  }
  std::sort(out.annotations.begin(), out.annotations.end(), annotation_less);
  return out;
}

ParsedReport parse_moderation_report(std::string_view raw, std::span<const Discrepancy> discrepancies) {
  const json payload = parse_payload(raw);
  const json* items = find_list(payload, {"items", "report"});
  if (items == nullptr) throw Error(Errc::Unparseable, "moderation report has no item list");
  ParsedReport out;
  std::set<std::size_t> seen;
  for (const json& item : *items) {
    auto warn = [&](std::string reason) { out.warnings.push_back(ParseWarning{item_text(item), std::move(reason)}); };
    if (!item.is_object()) {
      warn("item is not an object");
      continue;
    }
    const auto idx = item.find("discrepancy");
    if (idx == item.end() || !idx->is_number_integer()) {
      warn("missing discrepancy number");
      continue;
    }
    const auto number = idx->get<long long>();
    if (number < 1 || static_cast<std::size_t>(number) > discrepancies.size()) {
      warn("discrepancy number out of range");
      continue;
    }
    const auto index = static_cast<std::size_t>(number - 1);
    if (!seen.insert(index).second) {
      warn("duplicate item for discrepancy " + std::to_string(number));
      continue;
    }
    auto text = [&](const char* key) {
      const auto it = item.find(key);
      return it != item.end() && it->is_string() ? it->get<std::string>() : std::string();
    };
    out.items.push_back(
        ReportItem{index, discrepancies[index], text("cause"), parse_factor(text("factor")), text("solution")});
  }
  std::sort(out.items.begin(), out.items.end(),
            [](const ReportItem& a, const ReportItem& b) { return a.discrepancy < b.discrepancy; });
  return out;
}

ParsedRevision parse_revision(std::string_view raw, const GuidelineDoc& guideline, Author author) {
  const json payload = parse_payload(raw);
  const json* edits = find_list(payload, {"edits"});
  if (edits == nullptr) throw Error(Errc::Unparseable, "revision has no edit list");
  ParsedRevision out;
  out.revision.author = author;
  if (payload.is_object()) {
    const auto r = payload.find("rationale");
    if (r != payload.end() && r->is_string()) out.revision.rationale = r->get<std::string>();
  }
  std::set<std::string> known;
  for (const auto& id : guideline.section_ids()) known.insert(id);

  for (const json& e : *edits) {
    auto warn = [&](std::string reason) { out.warnings.push_back(ParseWarning{item_text(e), std::move(reason)}); };
    auto field = [&](const char* key) -> std::optional<std::string> {
      if (!e.is_object()) return std::nullopt;
      const auto it = e.find(key);
      if (it == e.end() || !it->is_string()) return std::nullopt;
      return it->get<std::string>();
    };
    const auto op = field("op");
    if (!op) {
      warn("edit has no op");
      continue;
    }
    if (*op == "replace_body" || *op == "append_example") {
      const auto id = field("section_id");
      const auto value = field(*op == "replace_body" ? "body" : "text");
      if (!id || !value) {
        warn("edit is missing fields");
        continue;
      }
      if (known.count(*id) == 0) {
        warn("unknown section \"" + *id + "\"");
        continue;
      }
      if (*op == "replace_body") {
        out.revision.edits.emplace_back(ReplaceBody{*id, *value});
      } else {
        out.revision.edits.emplace_back(AppendExample{*id, *value});
      }
    } else if (*op == "add_section") {
      const auto heading = field("heading");
      const auto body = field("body");
      if (!heading || !body || heading->find_first_not_of(" \t\r\n") == std::string::npos ||
          heading->find('\n') != std::string::npos) {
        warn("add_section needs a one-line heading and a body");
        continue;
      }
      const std::string id = slugify(trim_view(*heading));
      if (!known.insert(id).second) {
        warn("section \"" + id + "\" already exists");
        continue;
      }
      out.revision.edits.emplace_back(AddSection{*heading, *body});
    } else {
      warn("unknown op \"" + *op + "\"");
    }
  }
  if (out.revision.edits.empty()) throw Error(Errc::EmptyRevision, "model proposed no applicable edits");
  return out;
}

}  // namespace gforge
