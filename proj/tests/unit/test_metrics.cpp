#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/metrics.hpp"
#include "gforge/report.hpp"
#include "test_support.hpp"

using namespace gforge;
using gforge::testing::brute_force_matching;
using gforge::testing::fixture;
using gforge::testing::random_annotations;

namespace {

Annotation ann(std::size_t s, std::size_t e, Category c, std::string doc = "d") {
  return Annotation{std::move(doc), s, e, "m", c, std::nullopt};
}

constexpr Category SD = Category::SpecificDisease;
constexpr Category DC = Category::DiseaseClass;
constexpr Category MO = Category::Modifier;

}  // namespace

TEST_CASE("mode names and labels") {
  for (MatchMode m : kAllModes) {
    CHECK(parse_mode(mode_name(m)) == m);
    CHECK(kAllModes[mode_index(m)] == m);
  }
  CHECK(mode_label(kSoftNoCategory) == "Soft Match (w/o Category)");
  CHECK_FALSE(parse_mode("loose").has_value());
}

TEST_CASE("hand-enumerated small instances") {
  SUBCASE("identical sets score 1 everywhere") {
    const std::vector<Annotation> g{ann(0, 4, SD), ann(6, 9, DC)};
    for (const PRF& s : score_all_modes(g, g)) CHECK(s.f1() == 1.0);
  }
  SUBCASE("equal span, different category: one mismatch") {
    const std::vector<Annotation> p{ann(0, 4, MO)};
    const std::vector<Annotation> g{ann(0, 4, SD)};
    const MatchResult r = match_annotations(p, g, kStrict);
    CHECK(r.pairs.empty());
    CHECK(r.category_mismatches.size() == 1);
    CHECK(r.false_positives.empty());
    CHECK(r.false_negatives.empty());
    const ModeScores s = score_all_modes(p, g);
    CHECK(s[mode_index(kStrict)].f1() == 0.0);
    CHECK(s[mode_index(kStrictNoCategory)].f1() == 1.0);
  }
  SUBCASE("overlap counts only under soft boundaries") {
    const std::vector<Annotation> p{ann(0, 5, SD)};
    const std::vector<Annotation> g{ann(3, 9, SD)};
    const ModeScores s = score_all_modes(p, g);
    CHECK(s[mode_index(kStrict)].f1() == 0.0);
    CHECK(s[mode_index(kSoft)].f1() == 1.0);
  }
  SUBCASE("touching spans do not overlap") {
    CHECK_FALSE(spans_compatible(ann(0, 3, SD), ann(3, 6, SD), Boundary::Soft));
  }
  SUBCASE("one long prediction cannot match two gold spans") {
    const std::vector<Annotation> p{ann(0, 20, SD)};
    const std::vector<Annotation> g{ann(0, 5, SD), ann(10, 15, SD)};
    const PRF s = score(match_annotations(p, g, kSoft));
    CHECK(s.matched() == 1);
    CHECK(s.precision() == 1.0);
    CHECK(s.recall() == 0.5);
  }
  SUBCASE("greedy order would lose a pair; maximum matching does not") {
    // p0 overlaps g0 and g1, p1 overlaps only g0.
    const std::vector<Annotation> p{ann(0, 10, SD), ann(0, 2, SD)};
    const std::vector<Annotation> g{ann(1, 3, SD), ann(8, 12, SD)};
    CHECK(match_annotations(p, g, kSoft).pairs.size() == 2);
  }
  SUBCASE("disjoint spans give one FP and one FN") {
    const MatchResult r = match_annotations(std::vector{ann(0, 2, SD)}, std::vector{ann(5, 7, SD)}, kStrict);
    CHECK(r.false_positives.size() == 1);
    CHECK(r.false_negatives.size() == 1);
  }
  SUBCASE("mixed documents are refused") {
    CHECK_THROWS_AS(match_annotations(std::vector{ann(0, 2, SD, "a")}, std::vector{ann(0, 2, SD, "b")}, kStrict),
                    Error);
  }
}

TEST_CASE("property: matching cardinality equals the exhaustive oracle") {
  std::mt19937_64 rng(77);
  for (int round = 0; round < 400; ++round) {
    const auto p = random_annotations(rng, 8, 30);
    const auto g = random_annotations(rng, 8, 30);
    for (MatchMode m : kAllModes) {
      const MatchResult r = match_annotations(p, g, m);
      REQUIRE(r.pairs.size() == brute_force_matching(p, g, m));
      // Every input item lands in exactly one bucket.
      CHECK(r.n_pred() == p.size());
      CHECK(r.n_gold() == g.size());
      for (const auto& [a, b] : r.pairs) CHECK(compatible(a, b, m));
      for (const auto& [a, b] : r.category_mismatches) {
        CHECK(spans_compatible(a, b, m.boundary));
        CHECK(a.category != b.category);
      }
      if (!m.category_aware) CHECK(r.category_mismatches.empty());
    }
  }
}

TEST_CASE("property: relaxing a criterion never lowers F1") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 500; ++round) {
    const auto p = random_annotations(rng, 8, 30);
    const auto g = random_annotations(rng, 8, 30);
    const ModeScores s = score_all_modes(p, g);
    CHECK(s[mode_index(kSoft)].f1() >= s[mode_index(kStrict)].f1());
    CHECK(s[mode_index(kSoftNoCategory)].f1() >= s[mode_index(kStrictNoCategory)].f1());
    CHECK(s[mode_index(kStrictNoCategory)].f1() >= s[mode_index(kStrict)].f1());
    CHECK(s[mode_index(kSoftNoCategory)].f1() >= s[mode_index(kSoft)].f1());
  }
}

TEST_CASE("F1 from counts equals the harmonic mean of P and R") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 2000; ++round) {
    const std::size_t np = std::uniform_int_distribution<std::size_t>(1, 500)(rng);
    const std::size_t ng = std::uniform_int_distribution<std::size_t>(1, 500)(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(0, std::min(np, ng))(rng);
    const PRF s = PRF::from_counts(m, np, ng);
    const double p = static_cast<double>(m) / static_cast<double>(np);
    const double r = static_cast<double>(m) / static_cast<double>(ng);
    const double harmonic = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
    CHECK(std::fabs(s.f1() - harmonic) <= 1e-12);
  }
  CHECK(PRF::from_counts(0, 0, 0).f1() == 0.0);
  CHECK(PRF::from_counts(0, 3, 0).precision() == 0.0);
}

TEST_CASE("two-decimal rendering rounds half up") {
  // P = 0.38, R = 0.35 gives F1 = 0.3643..., shown as 0.36.
  const double p = 0.38, r = 0.35;
  CHECK(format_score(2 * p * r / (p + r)) == "0.36");
  CHECK(format_score(0.365) == "0.37");
  CHECK(format_score(0.125) == "0.13");
  CHECK(format_score(1.0) == "1.00");
  CHECK(format_score(0.0) == "0.00");
  CHECK(format_score(0.994999) == "0.99");
}

TEST_CASE("gate aggregation") {
  const std::vector<PRF> docs{PRF::from_counts(1, 1, 1), PRF::from_counts(0, 1, 1), PRF::from_counts(0, 0, 0)};
  // Macro: (1 + 0 + 1) / 3, the empty document counting as agreement.
  CHECK(gate_value(docs, GateAggregation::Macro) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // Micro: 2 * 1 / (2 + 2).
  CHECK(gate_value(docs, GateAggregation::Micro) == 0.5);
  CHECK_THROWS_AS(gate_value(std::vector<PRF>{}, GateAggregation::Macro), Error);
  CHECK(parse_aggregation("micro") == GateAggregation::Micro);
}

namespace {

// Per-category cells by exhaustive search. Category-aware: matching inside
// the category. Without category: every maximum matching of the full sets is
// enumerated and the attribution must not depend on which one is taken.
struct CellOracle {
  std::size_t mp = 0, mg = 0, np = 0, ng = 0;
};

CellOracle oracle_cell(const std::vector<Annotation>& pred, const std::vector<Annotation>& gold, MatchMode mode,
                       Category cat) {
  CellOracle out;
  for (const auto& a : pred) out.np += a.category == cat;
  for (const auto& a : gold) out.ng += a.category == cat;
  if (mode.category_aware) {
    std::vector<Annotation> p, g;
    for (const auto& a : pred) {
      if (a.category == cat) p.push_back(a);
    }
    for (const auto& a : gold) {
      if (a.category == cat) g.push_back(a);
    }
    out.mp = out.mg = brute_force_matching(p, g, mode);
    return out;
  }
  const std::size_t best = brute_force_matching(pred, gold, mode);
  std::set<std::pair<std::size_t, std::size_t>> attributions;
  std::vector<int> partner(pred.size(), -1);
  std::vector<bool> used(gold.size(), false);
  std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t i, std::size_t matched) {
    if (i == pred.size()) {
      if (matched != best) return;
      std::size_t mp = 0, mg = 0;
      for (std::size_t k = 0; k < pred.size(); ++k) {
        if (partner[k] < 0) continue;
        mp += pred[k].category == cat;
        mg += gold[static_cast<std::size_t>(partner[k])].category == cat;
      }
      attributions.insert({mp, mg});
      return;
    }
    walk(i + 1, matched);
    for (std::size_t j = 0; j < gold.size(); ++j) {
      if (used[j] || !spans_compatible(pred[i], gold[j], mode.boundary)) continue;
      used[j] = true;
      partner[i] = static_cast<int>(j);
      walk(i + 1, matched + 1);
      partner[i] = -1;
      used[j] = false;
    }
  };
  walk(0, 0);
  REQUIRE(attributions.size() == 1);
  out.mp = attributions.begin()->first;
  out.mg = attributions.begin()->second;
  return out;
}

std::string cell(double v) { return format_score(v); }

std::vector<std::vector<std::string>> read_csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace

TEST_CASE("golden evaluation tables agree with the exhaustive oracle") {
  const Corpus pred = load_pubtator(fixture("eval/pred.pubtator"));
  const Corpus gold = load_pubtator(fixture("eval/gold.pubtator"));

  // Oracle: micro-summed counts from brute force, per document.
  std::array<CellOracle, 4> overall{};
  std::map<Category, std::array<CellOracle, 4>> by_cat;
  for (const Document& doc : gold.documents()) {
    const auto ps = pred.gold(doc.doc_id());
    const auto gs = gold.gold(doc.doc_id());
    const std::vector<Annotation> p(ps.begin(), ps.end()), g(gs.begin(), gs.end());
    for (std::size_t m = 0; m < 4; ++m) {
      const std::size_t matched = brute_force_matching(p, g, kAllModes[m]);
      overall[m].mp += matched;
      overall[m].mg += matched;
      overall[m].np += p.size();
      overall[m].ng += g.size();
      for (Category c : kAllCategories) {
        const CellOracle o = oracle_cell(p, g, kAllModes[m], c);
        auto& acc = by_cat[c][m];
        acc.mp += o.mp;
        acc.mg += o.mg;
        acc.np += o.np;
        acc.ng += o.ng;
      }
    }
  }
  auto cells = [](const CellOracle& o) {
    const PRF s{o.mp, o.mg, o.np, o.ng};
    return std::vector<std::string>{cell(s.precision()), cell(s.recall()), cell(s.f1())};
  };

  const auto rows = read_csv_rows(fsutil::read_file(fixture("eval/expected_evaluate.csv")));
  REQUIRE(rows.size() == 7);  // header, LLM row, header, four categories
  std::vector<std::string> expected{"LLM"};
  for (const auto& o : overall) {
    for (const auto& c : cells(o)) expected.push_back(c);
  }
  CHECK(rows[1] == expected);

  const std::vector<std::pair<std::string, Category>> order{{"Composite Mention", Category::CompositeMention},
                                                            {"Disease Class", Category::DiseaseClass},
                                                            {"Modifier", Category::Modifier},
                                                            {"Specific Disease", Category::SpecificDisease}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::vector<std::string> row{order[i].first, "LLM"};
    for (const auto& o : by_cat[order[i].second]) {
      for (const auto& c : cells(o)) row.push_back(c);
    }
    CHECK(rows[3 + i] == row);
  }

  // And the library's own numbers reproduce the file.
  const std::vector<MethodScores> methods{method_scores("LLM", evaluate_corpus(pred, gold))};
  CHECK(render_overall_table(methods, TableFormat::Csv) + "\n" + render_category_table(methods, TableFormat::Csv) ==
        fsutil::read_file(fixture("eval/expected_evaluate.csv")));
}

TEST_CASE("evaluate_corpus with predictions equal to gold fills every cell with 1") {
  const Corpus gold = load_pubtator(fixture("eval/gold.pubtator"));
  const CorpusEvaluation e = evaluate_corpus(gold, gold);
  for (const PRF& s : e.overall) CHECK(s.f1() == 1.0);
  const std::vector<MethodScores> methods{method_scores("Gold", e)};
  const std::string table = render_overall_table(methods, TableFormat::Text);
  std::size_t ones = 0;
  for (std::size_t pos = 0; (pos = table.find("1.00", pos)) != std::string::npos; ++pos) ++ones;
  CHECK(ones == 12);
}

TEST_CASE("evaluate_corpus rejects predictions for foreign documents") {
  const Corpus gold = load_pubtator(fixture("eval/gold.pubtator"));
  Corpus other;
  other.add_document(Document("42", "a", "b"));
  CHECK_THROWS_AS(evaluate_corpus(other, gold), Error);
}
