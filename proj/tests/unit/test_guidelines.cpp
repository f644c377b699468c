#include <doctest.h>

#include <algorithm>
#include <random>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/guidelines.hpp"
#include "gforge/serialization.hpp"
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

const char* kSmall =
    "Opening words.\n"
    "\n"
    "# Specific Disease\n"
    "One particular disease.\n"
    "Example: \"cystic fibrosis\"\n"
    "    continues here\n"
    "\n"
    "# Modifier\n"
    "\\# not a heading\n"
    "\\Example: not an example\n";

Revision rev(std::vector<Edit> edits) { return Revision{std::move(edits), "why", Author::Llm, std::nullopt}; }

}  // namespace

TEST_CASE("slugify") {
  CHECK(slugify("Specific Disease") == "specific-disease");
  CHECK(slugify("  What counts as a disease?  ") == "what-counts-as-a-disease");
  CHECK(slugify("***") == "section");
}

TEST_CASE("parse_guideline sections, examples and escapes") {
  const GuidelineDoc doc = parse_guideline(kSmall);
  REQUIRE(doc.sections().size() == 3);
  CHECK(doc.sections()[0].heading == "Introduction");
  CHECK(doc.sections()[0].body == "Opening words.");
  const Section* sd = doc.find("specific-disease");
  REQUIRE(sd != nullptr);
  CHECK(sd->body == "One particular disease.");
  REQUIRE(sd->examples.size() == 1);
  CHECK(sd->examples[0] == "\"cystic fibrosis\"\ncontinues here");
  const Section* mo = doc.find("modifier");
  REQUIRE(mo != nullptr);
  CHECK(mo->body == "# not a heading\nExample: not an example");
  CHECK(mo->examples.empty());
  CHECK_FALSE(doc.parent_version().has_value());
  CHECK(doc.version_id().size() == 64);
}

TEST_CASE("render is a fixed point of parse") {
  const GuidelineDoc doc = parse_guideline(kSmall);
  const std::string text = render(doc);
  CHECK(parse_guideline(text) == doc);
  CHECK(render(parse_guideline(text)) == text);
  const GuidelineDoc shipped = load_guideline(fixture("guidelines/disease_v1.txt"));
  CHECK(render(parse_guideline(render(shipped))) == render(shipped));
  CHECK(shipped.section_ids() == std::vector<std::string>{"introduction", "what-counts-as-a-disease",
                                                          "specific-disease", "disease-class", "modifier",
                                                          "composite-mention", "abbreviations"});
}

TEST_CASE("duplicate headings are refused") {
  CHECK(code_of([] { parse_guideline("# A\nx\n# a\ny\n"); }) == Errc::DuplicateHeading);
}

TEST_CASE("apply_revision produces a child version") {
  const GuidelineDoc v1 = parse_guideline(kSmall);
  const GuidelineDoc v2 = apply_revision(v1, rev({AppendExample{"modifier", "\"DMD patients\""}}));
  CHECK(v2.parent_version() == v1.version_id());
  CHECK(v2.version_id() != v1.version_id());
  CHECK(v2.find("modifier")->examples == std::vector<std::string>{"\"DMD patients\""});
  CHECK(v1.find("modifier")->examples.empty());  // inputs are immutable

  const GuidelineDoc v3 = apply_revision(v2, rev({ReplaceBody{"specific-disease", "Exactly one disease."},
                                                  AddSection{"Abbreviations", "Mark them too."}}));
  CHECK(v3.find("specific-disease")->body == "Exactly one disease.");
  CHECK(v3.find("specific-disease")->examples.size() == 1);
  CHECK(v3.sections().back().section_id == "abbreviations");
  CHECK(touched_sections(rev({ReplaceBody{"a", "x"}, AppendExample{"a", "y"}, AddSection{"B c", "z"}})) ==
        std::vector<std::string>{"a", "b-c"});
}

TEST_CASE("apply_revision errors") {
  const GuidelineDoc v1 = parse_guideline(kSmall);
  CHECK(code_of([&] { apply_revision(v1, rev({})); }) == Errc::EmptyRevision);
  CHECK(code_of([&] { apply_revision(v1, rev({ReplaceBody{"nope", "x"}})); }) == Errc::UnknownSection);
  CHECK(code_of([&] { apply_revision(v1, rev({AddSection{"Modifier", "again"}})); }) == Errc::DuplicateHeading);
  CHECK(code_of([&] { apply_revision(v1, rev({ReplaceBody{"modifier", v1.find("modifier")->body}})); }) ==
        Errc::NoOpRevision);
}

TEST_CASE("version ids differ along a lineage even when content returns") {
  const GuidelineDoc v1 = parse_guideline(kSmall);
  const GuidelineDoc v2 = apply_revision(v1, rev({ReplaceBody{"modifier", "temporary"}}));
  const GuidelineDoc v3 = apply_revision(v2, rev({ReplaceBody{"modifier", v1.find("modifier")->body}}));
  CHECK(render(v3) == render(v1));
  CHECK(v3.version_id() != v1.version_id());
  CHECK(diff(v1, v3).empty());
}

TEST_CASE("diff reports section-level changes") {
  const GuidelineDoc v1 = parse_guideline(kSmall);
  const GuidelineDoc v2 = apply_revision(v1, rev({AppendExample{"modifier", "\"DMD patients\""},
                                                  ReplaceBody{"specific-disease", "Changed."},
                                                  AddSection{"New Part", "Body."}}));
  const auto entries = diff(v1, v2);
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].kind == DiffKind::BodyChanged);
  CHECK(entries[0].section_id == "specific-disease");
  CHECK(entries[1].kind == DiffKind::ExamplesAdded);
  CHECK(entries[1].added_examples == std::vector<std::string>{"\"DMD patients\""});
  CHECK(entries[2].kind == DiffKind::Added);
  CHECK(diff_kind_name(DiffKind::ExamplesAdded) == "examples-added");
  CHECK_FALSE(render_diff(entries).empty());
  const auto back = diff(v2, v1);
  CHECK(std::any_of(back.begin(), back.end(), [](const DiffEntry& e) { return e.kind == DiffKind::Removed; }));
}

TEST_CASE("property: random revisions keep render and parse in agreement") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> words{"alpha", "beta", "# hash", "Example: tricky", "\\slash", "  indented", "",
                                       "gamma delta"};
  auto text = [&](int lines) {
    std::string out;
    for (int i = 0; i < lines; ++i) {
      if (i) out += "\n";
      out += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
    }
    return out;
  };
  GuidelineDoc doc = parse_guideline(kSmall);
  for (int step = 0; step < 300; ++step) {
    const auto ids = doc.section_ids();
    const std::string id = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
    Edit e;
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
      case 0: e = ReplaceBody{id, text(3)}; break;
      case 1: e = AppendExample{id, text(2)}; break;
      default: e = AddSection{"Part " + std::to_string(step), text(2)}; break;
    }
    try {
      const GuidelineDoc next = apply_revision(doc, rev({e}));
      CHECK(next.parent_version() == doc.version_id());
      CHECK(render(parse_guideline(render(next))) == render(next));
      doc = next;
    } catch (const Error& err) {
      CHECK((err.code() == Errc::NoOpRevision || err.code() == Errc::InvalidArgument));
    }
  }
}

TEST_CASE("version store keeps lineage and detects tampering") {
  TempDir dir;
  VersionStore store(dir / "guidelines");
  const GuidelineDoc v1 = parse_guideline(kSmall);
  const Revision r = rev({AppendExample{"modifier", "x"}});
  const GuidelineDoc v2 = apply_revision(v1, r);
  store.put(v1);
  store.put(v2, r);
  store.put(v2, r);  // idempotent
  CHECK(store.contains(v1.version_id()));
  CHECK(store.get(v2.version_id()) == v2);
  CHECK(store.revision_of(v2.version_id()) == r);
  CHECK_FALSE(store.revision_of(v1.version_id()).has_value());
  CHECK(store.lineage().size() == 2);
  CHECK(store.ancestry(v2.version_id()) == std::vector<std::string>{v1.version_id(), v2.version_id()});
  CHECK(code_of([&] { store.get(std::string(64, 'a')); }) == Errc::UnknownVersion);
  CHECK(code_of([&] { store.get("../../etc/passwd"); }) == Errc::UnknownVersion);

  // Edit the stored body behind the store's back.
  const auto path = dir / ("guidelines/versions/" + v2.version_id() + ".json");
  auto j = nlohmann::json::parse(fsutil::read_file(path));
  j["sections"][1]["body"] = "tampered";
  fsutil::write_file_atomic(path, j.dump());
  CHECK(code_of([&] { store.get(v2.version_id()); }) == Errc::CorruptVersion);
}
