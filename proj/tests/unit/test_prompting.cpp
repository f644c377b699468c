#include <doctest.h>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/prompting.hpp"
#include "test_support.hpp"

using namespace gforge;
using gforge::testing::fixture;
using gforge::testing::TempDir;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

const Document kDoc("77", "DMD in boys.", "Boys with DMD and DMD carriers.");

std::string strip_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace

TEST_CASE("compiled-in templates match templates/ on disk") {
  const auto& t = PromptTemplates::defaults();
  const std::filesystem::path dir = std::filesystem::path(GFORGE_FIXTURE_DIR).parent_path() / "templates";
  CHECK(t.annotator_role == strip_newline(fsutil::read_file(dir / "annotator_role.txt")));
  CHECK(t.annotator_format == strip_newline(fsutil::read_file(dir / "annotator_format.txt")));
  CHECK(t.revision_schema == strip_newline(fsutil::read_file(dir / "revision_schema.txt")));
  CHECK(t.moderator_update.find("{{revision_schema}}") != std::string::npos);
}

TEST_CASE("the documented wire formats quote the revision schema verbatim") {
  const std::string docs = fsutil::read_file(std::filesystem::path(GFORGE_FIXTURE_DIR).parent_path() / "docs" /
                                             "wire-formats.md");
  CHECK(docs.find(PromptTemplates::defaults().revision_schema) != std::string::npos);
}

TEST_CASE("fill_template") {
  CHECK(fill_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "{{x}}"}}) == "a 1 b {{x}}");
  CHECK(code_of([] { fill_template("{{missing}}", {}); }) == Errc::InvalidArgument);
}

TEST_CASE("annotator prompts: three instruction blocks, optional guideline, payload last") {
  const GuidelineDoc g = load_guideline(fixture("guidelines/disease_v1.txt"));
  const std::string with = build_annotator_prompt(kDoc, &g);
  const std::string without = build_annotator_prompt(kDoc, nullptr);
  const auto role = with.find("### Role definition");
  const auto task = with.find("### Task description");
  const auto format = with.find("### Output format and categories");
  const auto guide = with.find("### Annotation guidelines");
  const auto payload = with.find("Document ID: 77\nText:\nDMD in boys. Boys with DMD and DMD carriers.");
  CHECK(role == 0);
  CHECK(role < task);
  CHECK(task < format);
  CHECK(format < guide);
  CHECK(guide < payload);
  CHECK(payload != std::string::npos);
  CHECK(with.find(render(g)) != std::string::npos);
  CHECK(without.find("### Annotation guidelines") == std::string::npos);
  // Baseline and guideline prompts differ only by the guideline block.
  const PromptParts parts = annotator_prompt_parts(kDoc, &g);
  PromptParts stripped = parts;
  stripped.guidelines.reset();
  CHECK(render_prompt(stripped) == without);
}

TEST_CASE("template overrides are read from a directory") {
  TempDir dir;
  fsutil::write_file_atomic(dir / "annotator_role.txt", "You label diseases.\n");
  const PromptTemplates t = PromptTemplates::load(dir.path());
  CHECK(t.annotator_role == "You label diseases.");
  CHECK(t.annotator_task == PromptTemplates::defaults().annotator_task);
}

TEST_CASE("extract_json_text") {
  CHECK(extract_json_text(R"({"a": 1})") == std::optional<std::string>(R"({"a": 1})"));
  CHECK(extract_json_text("Sure!\n```json\n[1, 2]\n```\nDone.") == std::optional<std::string>("[1, 2]"));
  CHECK(extract_json_text("prefix {\"k\": \"}\"} suffix") == std::optional<std::string>("{\"k\": \"}\"}"));
  CHECK_FALSE(extract_json_text("no json here").has_value());
}

TEST_CASE("parse_annotator_output aligns mentions to the text") {
  SUBCASE("start hints are honoured, otherwise leftmost unused occurrence") {
    const auto out = parse_annotator_output(
        R"({"annotations": [{"mention": "DMD", "category": "Modifier", "start": 31},
                            {"mention": "DMD", "category": "SpecificDisease"},
                            {"mention": "DMD", "category": "SpecificDisease"}]})",
        kDoc);
    REQUIRE(out.annotations.size() == 3);
    CHECK(out.annotations[0].start == 0);
    CHECK(out.annotations[1].start == 23);
    CHECK(out.annotations[2].start == 31);
    CHECK(out.annotations[2].category == Category::Modifier);
    CHECK(out.warnings.empty());
  }
  SUBCASE("a wrong start hint falls back to alignment") {
    const auto out = parse_annotator_output(R"([{"mention": "DMD", "category": "SpecificDisease", "start": 5}])", kDoc);
    REQUIRE(out.annotations.size() == 1);
    CHECK(out.annotations[0].start == 0);
  }
  SUBCASE("bad items become warnings") {
    const auto out = parse_annotator_output(
        R"({"annotations": [{"mention": "DMD", "category": "Disease"},
                            {"mention": "polio", "category": "SpecificDisease"},
                            {"category": "Modifier"}, 7,
                            {"mention": "DMD", "category": "SpecificDisease"},
                            {"mention": "DMD", "category": "SpecificDisease"},
                            {"mention": "DMD", "category": "SpecificDisease"},
                            {"mention": "DMD", "category": "SpecificDisease"}]})",
        kDoc);
    CHECK(out.annotations.size() == 3);
    CHECK(out.warnings.size() == 5);
  }
  SUBCASE("no payload at all") {
    CHECK(code_of([] { parse_annotator_output("I could not find any.", kDoc); }) == Errc::Unparseable);
  }
  SUBCASE("empty list") { CHECK(parse_annotator_output(R"({"annotations": []})", kDoc).annotations.empty()); }
}

TEST_CASE("moderation report parsing") {
  Discrepancy d;
  d.kind = DiscrepancyKind::FalseNegative;
  d.gold = Annotation{"77", 0, 3, "DMD", Category::SpecificDisease, std::nullopt};
  d.doc_id = "77";
  d.context = std::string(kDoc.slice(0, 12));
  const std::vector<Discrepancy> ds{d};
  const auto rep = parse_moderation_report(
      R"({"items": [{"discrepancy": 1, "cause": "c", "factor": "ambiguous abbreviations and acronyms", "solution": "s"},
                    {"discrepancy": 1, "cause": "dup"},
                    {"discrepancy": 9, "cause": "out of range"},
                    {"discrepancy": 1.5}]})",
      ds);
  REQUIRE(rep.items.size() == 1);
  CHECK(rep.items[0].factor == InfluenceFactor::AmbiguousAbbreviations);
  CHECK(rep.items[0].subject == d);
  CHECK(rep.warnings.size() == 3);
  CHECK(parse_factor("something else") == InfluenceFactor::Unclassified);
  CHECK(code_of([&] { parse_moderation_report("nothing", ds); }) == Errc::Unparseable);

  const std::string rendered = render_discrepancies(ds);
  CHECK(rendered.find("[1] FalseNegative in document 77") == 0);
  CHECK(rendered.find("[[DMD]] in boys.") != std::string::npos);
}

TEST_CASE("revision parsing keeps valid edits and reports the rest") {
  const GuidelineDoc g = load_guideline(fixture("guidelines/disease_v1.txt"));
  const auto parsed = parse_revision(
      R"(```json
{"rationale": "r", "edits": [
  {"op": "append_example", "section_id": "modifier", "text": "Example text"},
  {"op": "replace_body", "section_id": "nonexistent", "body": "x"},
  {"op": "add_section", "heading": "Modifier", "body": "dup"},
  {"op": "rename", "section_id": "modifier"}
]}
```)",
      g, Author::Llm);
  REQUIRE(parsed.revision.edits.size() == 1);
  CHECK(std::holds_alternative<AppendExample>(parsed.revision.edits[0]));
  CHECK(parsed.revision.rationale == "r");
  CHECK(parsed.warnings.size() == 3);
  CHECK(code_of([&] { parse_revision(R"({"edits": [{"op": "replace_body", "section_id": "x", "body": "y"}]})", g,
                                     Author::Llm); }) == Errc::EmptyRevision);
  CHECK(code_of([&] { parse_revision("no", g, Author::Llm); }) == Errc::Unparseable);
}

TEST_CASE("moderator prompts") {
  const GuidelineDoc g = load_guideline(fixture("guidelines/disease_v1.txt"));
  CHECK(code_of([&] { build_moderator_analyze_prompt({}, g, std::vector<Document>{kDoc}); }) ==
        Errc::EmptyDiscrepancies);
  ModerationReport report;
  const std::string update = build_moderator_update_prompt(report, g);
  CHECK(update.find("Section ids: introduction, what-counts-as-a-disease") != std::string::npos);
  CHECK(update.find(PromptTemplates::defaults().revision_schema) != std::string::npos);
  CHECK(update.find(g.version_id()) != std::string::npos);
}
