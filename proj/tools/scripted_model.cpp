#include "scripted_model.hpp"

#include <json.hpp>

#include <map>
#include <vector>

namespace gforge::scripted {

using nlohmann::json;

namespace {

struct Pick {
  const char* mention;
  int occurrence;  // 0-based occurrence of the string in the document text
  const char* category;
};

struct Script {
  std::vector<Pick> naive;    // guideline without the marker (or no guideline)
  std::vector<Pick> revised;  // guideline carries kRevisionMarker
};

constexpr const char* SD = "SpecificDisease";
constexpr const char* DC = "DiseaseClass";
constexpr const char* MO = "Modifier";
constexpr const char* CM = "CompositeMention";

const std::map<std::string, Script>& scripts() {
  static const std::map<std::string, Script> table = [] {
    std::map<std::string, Script> t;
    // Batch 1 with seed 7 and k = 5: 9000001, 9000008, 9000005, 9000010, 9000004.
    t["9000001"] = {
        {{"Duchenne muscular dystrophy", 0, SD}, {"Duchenne muscular dystrophy", 1, SD}, {"DMD", 0, SD},
         {"DMD", 1, SD}, {"muscular dystrophies", 0, DC}},
        {{"Duchenne muscular dystrophy", 0, MO}, {"Duchenne muscular dystrophy", 1, SD}, {"DMD", 0, SD},
         {"DMD", 1, MO}, {"muscular dystrophies", 0, DC}}};
    t["9000008"] = {
        {{"Von Willebrand disease", 0, SD}, {"bleeding disorder", 0, DC}, {"VWD", 1, SD}},
        {{"Von Willebrand disease", 0, SD}, {"Von Willebrand disease", 1, SD}, {"VWD", 0, SD},
         {"bleeding disorder", 0, DC}, {"VWD", 1, MO}}};
    t["9000005"] = {
        {{"Phenylketonuria", 0, SD}, {"Phenylketonuria", 1, SD}, {"PKU", 0, DC}, {"deficiency", 0, SD},
         {"phenylalanine hydroxylase", 0, SD}, {"PKU", 1, DC}, {"intellectual disability", 0, SD}},
        {{"Phenylketonuria", 0, SD}, {"Phenylketonuria", 1, SD}, {"PKU", 0, SD},
         {"deficiency of phenylalanine hydroxylase", 0, SD}, {"PKU", 1, SD}, {"intellectual disability", 0, DC}}};
    t["9000010"] = {{}, {}};
    t["9000004"] = {
        {{"Ataxia-telangiectasia", 0, SD}, {"cancer", 0, SD}, {"ataxia-telangiectasia", 0, SD}, {"cancer", 1, SD},
         {"ataxia-telangiectasia", 1, SD}},
        {{"Ataxia-telangiectasia", 0, SD}, {"cancer", 0, DC}, {"ataxia-telangiectasia", 0, MO}, {"cancer", 1, DC},
         {"ataxia-telangiectasia", 1, MO}}};
    // Batch 2: same answers either way.
    const std::vector<Pick> d2{{"breast and ovarian cancer", 0, MO},
                               {"breast and ovarian cancer", 1, CM},
                               {"cancers", 0, DC},
                               {"breast cancer", 0, SD}};
    const std::vector<Pick> d3{{"Myotonic dystrophy", 0, SD}, {"Myotonic dystrophy", 1, SD}, {"DM", 0, SD},
                               {"muscular dystrophy", 0, SD}, {"DM", 1, SD}};
    const std::vector<Pick> d6{{"Fragile X syndrome", 0, SD}, {"fragile X syndrome", 0, SD}, {"autism", 0, SD},
                               {"macroorchidism", 0, SD}, {"premature ovarian failure", 0, SD}};
    const std::vector<Pick> d7{{"Hereditary hemochromatosis", 0, SD}, {"Hereditary hemochromatosis", 1, SD},
                               {"HH", 0, SD}, {"HH", 1, SD}, {"cirrhosis", 0, SD},
                               {"hepatocellular carcinoma", 0, SD}};
    const std::vector<Pick> d9{{"Colorectal adenomas", 0, SD}, {"familial adenomatous polyposis", 0, SD},
                               {"familial adenomatous polyposis", 1, SD}, {"FAP", 0, SD},
                               {"colorectal adenomas", 0, SD}, {"colorectal cancer", 0, SD}};
    t["9000002"] = {d2, d2};
    t["9000003"] = {d3, d3};
    t["9000006"] = {d6, d6};
    t["9000007"] = {d7, d7};
    t["9000009"] = {d9, d9};
    return t;
  }();
  return table;
}

std::string line_value(const std::string& prompt, std::string_view key) {
  const auto pos = prompt.find(key);
  if (pos == std::string::npos) return {};
  const auto start = pos + key.size();
  return prompt.substr(start, prompt.find('\n', start) - start);
}

std::string annotate(const std::string& prompt) {
  const std::string doc_id = line_value(prompt, "Document ID: ");
  const auto text_at = prompt.find("\nText:\n");
  const std::string text = text_at == std::string::npos ? std::string() : prompt.substr(text_at + 7);
  const bool revised = prompt.find(kRevisionMarker) != std::string::npos;
  json items = json::array();
  const auto it = scripts().find(doc_id);
  if (it != scripts().end()) {
    for (const Pick& p : revised ? it->second.revised : it->second.naive) {
      std::size_t pos = std::string::npos;
      for (int k = 0; k <= p.occurrence; ++k) pos = text.find(p.mention, pos == std::string::npos ? 0 : pos + 1);
      if (pos == std::string::npos) continue;
      // All fixture text is ASCII, so byte and character offsets agree.
      items.push_back(json{{"mention", p.mention}, {"category", p.category}, {"start", pos}});
    }
  }
  return json{{"annotations", items}}.dump();
}

bool all_caps(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < 'A' || c > 'Z') return false;
  }
  return true;
}

bool has(const std::string& s, std::string_view part) { return s.find(part) != std::string::npos; }

const char* factor_for(const std::string& mention) {
  if (all_caps(mention)) return "Ambiguous Abbreviations and Acronyms";
  if (has(mention, "deficiency") || has(mention, "hydroxylase")) {
    return "Incomplete or Non-Specific Genetic/Pathological Descriptions";
  }
  if (has(mention, "disorder") || has(mention, "disease") || has(mention, "cancer")) {
    return "Generic or Vague Descriptors";
  }
  return "Miscellaneous or Low-Frequency Terms";
}

std::string analyze(const std::string& prompt) {
  json items = json::array();
  const auto start = prompt.find("Discrepancies (the mention");
  std::size_t pos = prompt.find('\n', start);
  int number = 0;
  std::string mention;
  auto flush = [&] {
    if (number == 0) return;
    items.push_back(json{{"discrepancy", number},
                         {"cause", "The annotator labelled \"" + mention + "\" differently from the gold standard."},
                         {"factor", factor_for(mention)},
                         {"solution", "Add an example showing how \"" + mention + "\" is annotated in context."}});
  };
  while (pos != std::string::npos && pos + 1 < prompt.size()) {
    const std::size_t next = prompt.find('\n', pos + 1);
    const std::string line = prompt.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
    pos = next;
    if (!line.empty() && line[0] == '[') {
      flush();
      number = std::stoi(line.substr(1));
      mention.clear();
    } else if (line.rfind("    gold: ", 0) == 0 || (line.rfind("    predicted: ", 0) == 0 && mention.empty())) {
      const std::string rest = line.substr(line.find(": ") + 2);
      mention = json::parse(rest.substr(0, rest.rfind(" ["))).get<std::string>();
    } else if (line.rfind("Respond with", 0) == 0) {
      break;
    }
  }
  flush();
  return json{{"items", items}}.dump(2);
}

std::string update(const std::string& prompt) {
  const std::string ids = line_value(prompt, "Section ids: ");
  json edits = json::array();
  const std::string abbreviation_example =
      "Example: \"Type 2 VWD patients\" uses an abbreviation as a Modifier although \"VWD\" was introduced as "
      "SpecificDisease; label each occurrence by its own role.";
  if (has(ids, "abbreviations")) {
    edits.push_back(json{{"op", "append_example"}, {"section_id", "abbreviations"}, {"text", abbreviation_example}});
  } else {
    edits.push_back(json{{"op", "add_section"}, {"heading", "Abbreviations"}, {"body", abbreviation_example}});
  }
  if (has(ids, "modifier")) {
    edits.push_back(json{{"op", "append_example"},
                         {"section_id", "modifier"},
                         {"text", "Example: in \"ataxia-telangiectasia patients\" the disease name is a Modifier even "
                                  "though the title uses it as SpecificDisease."}});
  }
  return "Here is the revision.\n```json\n" +
         json{{"rationale", "Most errors come from abbreviations and disease names whose role changes within one "
                            "abstract; the examples make the per-occurrence rule explicit."},
              {"edits", edits}}
             .dump(2) +
         "\n```\n";
}

}  // namespace

std::string respond(const std::string& prompt) {
  if (prompt.rfind("### Role definition", 0) == 0) return annotate(prompt);
  if (has(prompt, "Discrepancies (the mention")) return analyze(prompt);
  if (has(prompt, "Section ids: ")) return update(prompt);
  return "{}";
}

std::unique_ptr<ChatBackend> make_backend(const std::string& model, double temperature) {
  return std::make_unique<FunctionBackend>(respond, model, temperature);
}

}  // namespace gforge::scripted
