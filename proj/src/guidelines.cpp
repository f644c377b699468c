#include "gforge/guidelines.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/hash.hpp"

namespace gforge {

namespace {

constexpr std::string_view kExamplePrefix = "Example:";
constexpr std::string_view kContinuation = "    ";
constexpr std::string_view kIntroduction = "Introduction";

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const std::size_t b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const std::size_t e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = eol + 1;
  }
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i != 0) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

// Drops leading and trailing blank lines and carriage returns.
std::string canonical_body(std::string_view text) {
  std::vector<std::string> lines;
  for (const auto line : split_lines(text)) lines.emplace_back(line);
  while (!lines.empty() && is_blank(lines.back())) lines.pop_back();
  std::size_t first = 0;
  while (first < lines.size() && is_blank(lines[first])) ++first;
  lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(first));
  return join_lines(lines);
}

std::string canonical_example(std::string_view text) {
  std::string out;
  for (const char c : text) {
    if (c != '\r') out.push_back(c);
  }
  return std::string(trim(out));
}

std::string canonical_heading(std::string_view heading) {
  const auto h = trim(heading);
  if (h.empty()) throw Error(Errc::InvalidArgument, "section heading is empty");
  if (h.find('\n') != std::string_view::npos) throw Error(Errc::InvalidArgument, "section heading spans lines");
  return std::string(h);
}

bool needs_escape(std::string_view line) {
  return (!line.empty() && (line.front() == '#' || line.front() == '\\')) || line.starts_with(kExamplePrefix);
}

std::string compute_version_id(const std::vector<Section>& sections, const std::optional<std::string>& parent) {
  return sha256_hex("gforge-guideline\n" + parent.value_or("") + "\n" + render_sections(sections));
}

}  // namespace

std::string slugify(std::string_view heading) {
  std::string slug;
  bool dash = false;
  for (const char ch : heading) {
    const auto c = static_cast<unsigned char>(ch);
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (keep) {
      if (dash && !slug.empty()) slug.push_back('-');
      dash = false;
      slug.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else {
      dash = true;
    }
  }
  return slug.empty() ? "section" : slug;
}

std::string_view author_name(Author a) noexcept { return a == Author::Llm ? "llm" : "human"; }

std::vector<std::string> touched_sections(const Revision& rev) {
  std::vector<std::string> out;
  auto add = [&](std::string id) {
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(std::move(id));
  };
  for (const Edit& e : rev.edits) {
    std::visit(
        [&](const auto& edit) {
          using T = std::decay_t<decltype(edit)>;
          if constexpr (std::is_same_v<T, AddSection>) {
            add(slugify(trim(edit.heading)));
          } else {
            add(edit.section_id);
          }
        },
        e);
  }
  return out;
}

GuidelineDoc::GuidelineDoc(std::vector<Section> sections, std::optional<std::string> parent_version)
    : sections_(std::move(sections)), parent_version_(std::move(parent_version)) {
  std::unordered_set<std::string> seen;
  for (const Section& s : sections_) {
    if (!seen.insert(s.section_id).second) throw Error(Errc::DuplicateHeading, "section id " + s.section_id);
  }
  version_id_ = compute_version_id(sections_, parent_version_);
}

const Section* GuidelineDoc::find(std::string_view section_id) const noexcept {
  for (const Section& s : sections_) {
    if (s.section_id == section_id) return &s;
  }
  return nullptr;
}

std::vector<std::string> GuidelineDoc::section_ids() const {
  std::vector<std::string> ids;
  for (const Section& s : sections_) ids.push_back(s.section_id);
  return ids;
}

GuidelineDoc parse_guideline(std::string_view text) {
  struct Draft {
    std::string heading;
    std::vector<std::string> body;
    std::vector<std::string> examples;
  };
  std::vector<Draft> drafts;
  drafts.push_back(Draft{std::string(kIntroduction), {}, {}});
  bool saw_heading = false;
  bool in_example = false;

  for (const auto line : split_lines(text)) {
    Draft& cur = drafts.back();
    if (!line.empty() && line.front() == '#') {
      const std::size_t hashes = line.find_first_not_of('#');
      const auto heading = hashes == std::string_view::npos ? std::string_view{} : trim(line.substr(hashes));
      drafts.push_back(Draft{std::string(heading), {}, {}});
      saw_heading = true;
      in_example = false;
      continue;
    }
    if (!line.empty() && line.front() == '\\') {
      cur.body.emplace_back(line.substr(1));
      in_example = false;
      continue;
    }
    if (line.starts_with(kExamplePrefix)) {
      auto rest = line.substr(kExamplePrefix.size());
      if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
      cur.examples.emplace_back(rest);
      in_example = true;
      continue;
    }
    if (in_example && line.starts_with(kContinuation)) {
      cur.examples.back().append(1, '\n').append(line.substr(kContinuation.size()));
      continue;
    }
    in_example = false;
    cur.body.emplace_back(line);
  }

  // The synthetic introduction only survives when it has content or the
  // document has no headings at all.
  const Draft& intro = drafts.front();
  const bool intro_empty =
      std::all_of(intro.body.begin(), intro.body.end(), [](const std::string& l) { return is_blank(l); }) &&
      intro.examples.empty();
  if (saw_heading && intro_empty) drafts.erase(drafts.begin());

  std::vector<Section> sections;
  std::unordered_map<std::string, std::string> seen;
  for (Draft& d : drafts) {
    Section s;
    s.heading = d.heading;
    s.section_id = slugify(d.heading);
    s.body = canonical_body(join_lines(d.body));
    for (const auto& ex : d.examples) s.examples.push_back(canonical_example(ex));
    const auto [it, inserted] = seen.emplace(s.section_id, s.heading);
    if (!inserted) {
      throw Error(Errc::DuplicateHeading,
                  "headings \"" + it->second + "\" and \"" + s.heading + "\" both map to " + s.section_id);
    }
    sections.push_back(std::move(s));
  }
  return GuidelineDoc(std::move(sections), std::nullopt);
}

GuidelineDoc load_guideline(const std::filesystem::path& path) { return parse_guideline(fsutil::read_file(path)); }

std::string render_sections(std::span<const Section> sections) {
  std::string out;
  bool first = true;
  for (const Section& s : sections) {
    if (!first) out.push_back('\n');
    first = false;
    out.append("# ").append(s.heading).append(1, '\n');
    if (!s.body.empty()) {
      for (const auto line : split_lines(s.body)) {
        if (needs_escape(line)) out.push_back('\\');
        out.append(line).append(1, '\n');
      }
    }
    for (const std::string& ex : s.examples) {
      bool head = true;
      for (const auto line : split_lines(ex)) {
        out.append(head ? "Example: " : kContinuation).append(line).append(1, '\n');
        head = false;
      }
      if (ex.empty()) out.append("Example: \n");
    }
  }
  return out;
}

std::string render(const GuidelineDoc& doc) { return render_sections(doc.sections()); }

GuidelineDoc apply_revision(const GuidelineDoc& doc, const Revision& rev) {
  if (rev.edits.empty()) throw Error(Errc::EmptyRevision, "revision has no edits");
  std::vector<Section> sections = doc.sections();
  auto find = [&](const std::string& id) -> Section& {
    for (Section& s : sections) {
      if (s.section_id == id) return s;
    }
    throw Error(Errc::UnknownSection, "no section \"" + id + "\" in version " + doc.version_id().substr(0, 12));
  };
  for (const Edit& e : rev.edits) {
    if (const auto* r = std::get_if<ReplaceBody>(&e)) {
      find(r->section_id).body = canonical_body(r->body);
    } else if (const auto* a = std::get_if<AppendExample>(&e)) {
      find(a->section_id).examples.push_back(canonical_example(a->text));
    } else {
      const auto& add = std::get<AddSection>(e);
      Section s;
      s.heading = canonical_heading(add.heading);
      s.section_id = slugify(s.heading);
      s.body = canonical_body(add.body);
      for (const Section& existing : sections) {
        if (existing.section_id == s.section_id) {
          throw Error(Errc::DuplicateHeading, "section \"" + s.section_id + "\" already exists");
        }
      }
      sections.push_back(std::move(s));
    }
  }
  if (render_sections(sections) == render(doc)) {
    throw Error(Errc::NoOpRevision, "revision leaves the guideline unchanged");
  }
  return GuidelineDoc(std::move(sections), doc.version_id());
}

std::string_view diff_kind_name(DiffKind kind) noexcept {
  switch (kind) {
    case DiffKind::Added: return "added";
    case DiffKind::Removed: return "removed";
    case DiffKind::BodyChanged: return "body-changed";
    case DiffKind::ExamplesAdded: return "examples-added";
    case DiffKind::ExamplesChanged: return "examples-changed";
    case DiffKind::HeadingChanged: return "heading-changed";
    case DiffKind::Moved: return "moved";
  }
  return "added";
}

std::vector<DiffEntry> diff(const GuidelineDoc& before, const GuidelineDoc& after) {
  std::vector<DiffEntry> out;
  std::vector<std::string> common_before;
  for (const Section& s : before.sections()) {
    if (after.find(s.section_id) != nullptr) common_before.push_back(s.section_id);
  }
  std::vector<std::string> common_after;
  for (const Section& s : after.sections()) {
    if (before.find(s.section_id) != nullptr) common_after.push_back(s.section_id);
  }

  std::size_t common_pos = 0;
  for (const Section& s : after.sections()) {
    const Section* old = before.find(s.section_id);
    if (old == nullptr) {
      out.push_back(DiffEntry{DiffKind::Added, s.section_id, "", render_sections(std::span(&s, 1)), s.examples});
      continue;
    }
    if (common_before[common_pos] != s.section_id) {
      out.push_back(DiffEntry{DiffKind::Moved, s.section_id, "", "", {}});
    }
    ++common_pos;
    if (old->heading != s.heading) out.push_back(DiffEntry{DiffKind::HeadingChanged, s.section_id, old->heading, s.heading, {}});
    if (old->body != s.body) out.push_back(DiffEntry{DiffKind::BodyChanged, s.section_id, old->body, s.body, {}});
    if (old->examples != s.examples) {
      const bool extends = s.examples.size() > old->examples.size() &&
                           std::equal(old->examples.begin(), old->examples.end(), s.examples.begin());
      if (extends) {
        DiffEntry e{DiffKind::ExamplesAdded, s.section_id, "", "", {}};
        e.added_examples.assign(s.examples.begin() + static_cast<std::ptrdiff_t>(old->examples.size()),
                                s.examples.end());
        out.push_back(std::move(e));
      } else {
        out.push_back(DiffEntry{DiffKind::ExamplesChanged, s.section_id, "", "", s.examples});
      }
    }
  }
  for (const Section& s : before.sections()) {
    if (after.find(s.section_id) == nullptr) {
      out.push_back(DiffEntry{DiffKind::Removed, s.section_id, render_sections(std::span(&s, 1)), "", {}});
    }
  }
  return out;
}

std::string render_diff(std::span<const DiffEntry> entries) {
  std::string out;
  auto prefixed = [&](std::string_view text, char mark) {
    for (const auto line : split_lines(text)) out.append(1, mark).append(1, ' ').append(line).append(1, '\n');
  };
  for (const DiffEntry& e : entries) {
    out.append("@@ ").append(diff_kind_name(e.kind)).append(" ").append(e.section_id).append(1, '\n');
    switch (e.kind) {
      case DiffKind::Added: prefixed(e.new_text, '+'); break;
      case DiffKind::Removed: prefixed(e.old_text, '-'); break;
      case DiffKind::BodyChanged:
      case DiffKind::HeadingChanged:
        prefixed(e.old_text, '-');
        prefixed(e.new_text, '+');
        break;
      case DiffKind::ExamplesAdded:
      case DiffKind::ExamplesChanged:
        for (const auto& ex : e.added_examples) prefixed("Example: " + ex, '+');
        break;
      case DiffKind::Moved: break;
    }
  }
  return out;
}

}  // namespace gforge
