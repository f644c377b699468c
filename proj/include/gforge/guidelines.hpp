#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gforge {

struct Section {
  std::string section_id;  // slug of heading, unique within a document
  std::string heading;
  std::string body;
  std::vector<std::string> examples;

  friend bool operator==(const Section&, const Section&) = default;
};

// Lower-case ASCII alphanumerics (non-ASCII bytes kept) with every other run
// collapsed to '-'. "section" when nothing survives.
std::string slugify(std::string_view heading);

struct ReplaceBody {
  std::string section_id;
  std::string body;
  friend bool operator==(const ReplaceBody&, const ReplaceBody&) = default;
};
struct AppendExample {
  std::string section_id;
  std::string text;
  friend bool operator==(const AppendExample&, const AppendExample&) = default;
};
struct AddSection {
  std::string heading;
  std::string body;
  friend bool operator==(const AddSection&, const AddSection&) = default;
};
using Edit = std::variant<ReplaceBody, AppendExample, AddSection>;

enum class Author { Llm, Human };
std::string_view author_name(Author a) noexcept;

struct Revision {
  std::vector<Edit> edits;
  std::string rationale;
  Author author = Author::Llm;
  std::optional<std::string> source_report;

  friend bool operator==(const Revision&, const Revision&) = default;
};

// Section ids a revision changes, in edit order without repeats.
std::vector<std::string> touched_sections(const Revision& rev);

// Immutable guideline version. version_id hashes the parent id together with
// the canonical rendering, so ids are unique along any lineage.
class GuidelineDoc {
 public:
  // Throws DuplicateHeading when two sections share an id.
  GuidelineDoc(std::vector<Section> sections, std::optional<std::string> parent_version);

  const std::string& version_id() const noexcept { return version_id_; }
  const std::optional<std::string>& parent_version() const noexcept { return parent_version_; }
  const std::vector<Section>& sections() const noexcept { return sections_; }
  const Section* find(std::string_view section_id) const noexcept;
  std::vector<std::string> section_ids() const;

  friend bool operator==(const GuidelineDoc&, const GuidelineDoc&) = default;

 private:
  std::vector<Section> sections_;
  std::optional<std::string> parent_version_;
  std::string version_id_;
};

// '#'-prefixed lines are headings; text before the first heading becomes an
// "Introduction" section. Lines starting "Example:" (with four-space
// continuation lines) are edge-case examples; a leading backslash escapes a
// body line. Throws DuplicateHeading.
GuidelineDoc parse_guideline(std::string_view text);
GuidelineDoc load_guideline(const std::filesystem::path& path);

std::string render(const GuidelineDoc& doc);
std::string render_sections(std::span<const Section> sections);

// Throws EmptyRevision, UnknownSection, DuplicateHeading (AddSection), and
// NoOpRevision when the result renders identically to the input.
GuidelineDoc apply_revision(const GuidelineDoc& doc, const Revision& rev);

enum class DiffKind { Added, Removed, BodyChanged, ExamplesAdded, ExamplesChanged, HeadingChanged, Moved };
std::string_view diff_kind_name(DiffKind kind) noexcept;

struct DiffEntry {
  DiffKind kind = DiffKind::Added;
  std::string section_id;
  std::string old_text;
  std::string new_text;
  std::vector<std::string> added_examples;

  friend bool operator==(const DiffEntry&, const DiffEntry&) = default;
};

// Section-level diff; empty iff both documents render identically.
std::vector<DiffEntry> diff(const GuidelineDoc& before, const GuidelineDoc& after);
std::string render_diff(std::span<const DiffEntry> entries);

struct LineageEntry {
  std::string version_id;
  std::optional<std::string> parent_version;
  friend bool operator==(const LineageEntry&, const LineageEntry&) = default;
};

// One JSON file per version plus an append-only lineage index. Existing
// version files are never rewritten; loads re-derive and verify the id.
class VersionStore {
 public:
  explicit VersionStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  // Idempotent for an identical version. `revision` is the edit that produced
  // the version (absent for a root).
  void put(const GuidelineDoc& doc, const std::optional<Revision>& revision = std::nullopt);
  bool contains(std::string_view version_id) const;
  // Throws UnknownVersion or CorruptVersion.
  GuidelineDoc get(std::string_view version_id) const;
  std::optional<Revision> revision_of(std::string_view version_id) const;
  std::vector<LineageEntry> lineage() const;
  // Root-first chain of ancestors ending at version_id.
  std::vector<std::string> ancestry(std::string_view version_id) const;

 private:
  std::filesystem::path version_path(std::string_view version_id) const;

  std::filesystem::path root_;
};

}  // namespace gforge
