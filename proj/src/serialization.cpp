#include "gforge/serialization.hpp"

#include <type_traits>

#include "gforge/error.hpp"

namespace gforge {

using nlohmann::json;

namespace {

template <class T, class Parse>
T enum_from(const json& j, Parse parse, const char* what) {
  const auto name = j.get<std::string>();
  const auto v = parse(name);
  if (!v) throw Error(Errc::InvalidArgument, std::string("unknown ") + what + " \"" + name + "\"");
  return *v;
}

template <class T>
std::optional<T> opt(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void to_json(json& j, const Annotation& a) {
  j = json{{"doc_id", a.doc_id},
           {"start", a.start},
           {"end", a.end},
           {"mention", a.mention},
           {"category", category_label(a.category)},
           {"concept_id", opt_json(a.concept_id)}};
}

void from_json(const json& j, Annotation& a) {
  a.doc_id = j.at("doc_id").get<std::string>();
  a.start = j.at("start").get<std::size_t>();
  a.end = j.at("end").get<std::size_t>();
  a.mention = j.at("mention").get<std::string>();
  a.category = enum_from<Category>(j.at("category"), parse_category, "category");
  a.concept_id = opt<std::string>(j, "concept_id");
}

void to_json(json& j, const PRF& p) {
  j = json{{"matched_pred", p.matched_pred},
           {"matched_gold", p.matched_gold},
           {"n_pred", p.n_pred},
           {"n_gold", p.n_gold},
           {"precision", p.precision()},
           {"recall", p.recall()},
           {"f1", p.f1()}};
}

void from_json(const json& j, PRF& p) {
  p.matched_pred = j.at("matched_pred").get<std::size_t>();
  p.matched_gold = j.at("matched_gold").get<std::size_t>();
  p.n_pred = j.at("n_pred").get<std::size_t>();
  p.n_gold = j.at("n_gold").get<std::size_t>();
}

void to_json(json& j, const Edit& e) {
  std::visit(
      [&j](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, ReplaceBody>) {
          j = json{{"op", "replace_body"}, {"section_id", op.section_id}, {"body", op.body}};
        } else if constexpr (std::is_same_v<T, AppendExample>) {
          j = json{{"op", "append_example"}, {"section_id", op.section_id}, {"text", op.text}};
        } else {
          j = json{{"op", "add_section"}, {"heading", op.heading}, {"body", op.body}};
        }
      },
      e);
}

void from_json(const json& j, Edit& e) {
  const auto op = j.at("op").get<std::string>();
  if (op == "replace_body") {
    e = ReplaceBody{j.at("section_id").get<std::string>(), j.at("body").get<std::string>()};
  } else if (op == "append_example") {
    e = AppendExample{j.at("section_id").get<std::string>(), j.at("text").get<std::string>()};
  } else if (op == "add_section") {
    e = AddSection{j.at("heading").get<std::string>(), j.at("body").get<std::string>()};
  } else {
    throw Error(Errc::InvalidArgument, "unknown edit op \"" + op + "\"");
  }
}

void to_json(json& j, const Revision& r) {
  j = json{{"rationale", r.rationale},
           {"author", author_name(r.author)},
           {"source_report", opt_json(r.source_report)},
           {"edits", r.edits}};
}

void from_json(const json& j, Revision& r) {
  r.edits = j.at("edits").get<std::vector<Edit>>();
  r.rationale = j.value("rationale", std::string());
  const auto author = j.value("author", std::string("llm"));
  if (author == "llm") {
    r.author = Author::Llm;
  } else if (author == "human") {
    r.author = Author::Human;
  } else {
    throw Error(Errc::InvalidArgument, "unknown author \"" + author + "\"");
  }
  r.source_report = opt<std::string>(j, "source_report");
}

void to_json(json& j, const Section& s) {
  j = json{{"section_id", s.section_id}, {"heading", s.heading}, {"body", s.body}, {"examples", s.examples}};
}

void from_json(const json& j, Section& s) {
  s.heading = j.at("heading").get<std::string>();
  s.section_id = j.value("section_id", slugify(s.heading));
  s.body = j.value("body", std::string());
  s.examples = j.value("examples", std::vector<std::string>{});
}

json guideline_to_json(const GuidelineDoc& doc) {
  return json{{"version_id", doc.version_id()},
              {"parent_version", opt_json(doc.parent_version())},
              {"sections", doc.sections()}};
}

GuidelineDoc guideline_from_json(const json& j) {
  return GuidelineDoc(j.at("sections").get<std::vector<Section>>(), opt<std::string>(j, "parent_version"));
}

void to_json(json& j, const DiffEntry& d) {
  j = json{{"kind", diff_kind_name(d.kind)},
           {"section_id", d.section_id},
           {"old_text", d.old_text},
           {"new_text", d.new_text},
           {"added_examples", d.added_examples}};
}

void to_json(json& j, const Discrepancy& d) {
  j = json{{"kind", discrepancy_kind_name(d.kind)},
           {"doc_id", d.doc_id},
           {"predicted", opt_json(d.predicted)},
           {"gold", opt_json(d.gold)},
           {"start", d.start()},
           {"end", d.end()},
           {"context", d.context},
           {"context_start", d.context_start}};
}

void from_json(const json& j, Discrepancy& d) {
  d.kind = enum_from<DiscrepancyKind>(j.at("kind"), parse_discrepancy_kind, "discrepancy kind");
  d.doc_id = j.at("doc_id").get<std::string>();
  d.predicted = opt<Annotation>(j, "predicted");
  d.gold = opt<Annotation>(j, "gold");
  d.context = j.value("context", std::string());
  d.context_start = j.value("context_start", std::size_t{0});
}

void to_json(json& j, const ReportItem& r) {
  j = json{{"discrepancy", r.discrepancy},
           {"subject", r.subject},
           {"cause", r.cause},
           {"factor", factor_name(r.factor)},
           {"solution", r.solution}};
}

void from_json(const json& j, ReportItem& r) {
  r.discrepancy = j.at("discrepancy").get<std::size_t>();
  r.subject = j.at("subject").get<Discrepancy>();
  r.cause = j.value("cause", std::string());
  r.factor = parse_factor(j.value("factor", std::string()));
  r.solution = j.value("solution", std::string());
}

void to_json(json& j, const ParseWarning& w) { j = json{{"item", w.item}, {"reason", w.reason}}; }

void from_json(const json& j, ParseWarning& w) {
  w.item = j.value("item", std::string());
  w.reason = j.value("reason", std::string());
}

void to_json(json& j, const ModerationReport& r) {
  j = json{{"items", r.items},
           {"proposed_revision", opt_json(r.proposed_revision)},
           {"exchanges", r.exchanges},
           {"warnings", r.warnings}};
}

void from_json(const json& j, ModerationReport& r) {
  r.items = j.value("items", std::vector<ReportItem>{});
  r.proposed_revision = opt<Revision>(j, "proposed_revision");
  r.exchanges = j.value("exchanges", std::vector<std::string>{});
  r.warnings = j.value("warnings", std::vector<ParseWarning>{});
}

void to_json(json& j, const BackendConfig& c) {
  // No credential here: the key only ever comes from the environment.
  j = json{{"kind", backend_kind_name(c.kind)},
           {"endpoint", c.endpoint},
           {"model", c.model},
           {"temperature", c.temperature},
           {"max_retries", c.max_retries},
           {"timeout_ms", c.timeout.count()},
           {"backoff_ms", c.backoff_base.count()},
           {"cassette", c.cassette_path.string()},
           {"max_in_flight", c.max_in_flight}};
}

void from_json(const json& j, BackendConfig& c) {
  BackendConfig d;
  c.kind = j.contains("kind") ? enum_from<BackendKind>(j.at("kind"), parse_backend_kind, "backend") : d.kind;
  c.endpoint = j.value("endpoint", d.endpoint);
  c.model = j.value("model", d.model);
  c.temperature = j.value("temperature", d.temperature);
  c.max_retries = j.value("max_retries", d.max_retries);
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", d.timeout.count()));
  c.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", d.backoff_base.count()));
  c.cassette_path = j.value("cassette", std::string());
  c.max_in_flight = j.value("max_in_flight", d.max_in_flight);
}

void to_json(json& j, const RunConfig& c) {
  json corpus = json::array();
  for (const auto& p : c.corpus_paths) corpus.push_back(p.string());
  j = json{{"batch_size", c.batch_size},
           {"gate_threshold", c.gate_threshold},
           {"gate_mode", mode_name(c.gate_mode)},
           {"gate_aggregation", aggregation_name(c.gate_aggregation)},
           {"max_iterations_per_batch", c.max_iterations_per_batch},
           {"review", review_mode_name(c.review_mode)},
           {"mode", prompt_mode_name(c.prompt_mode)},
           {"seed", c.seed},
           {"corpus", corpus},
           {"guideline", c.guideline_path.string()},
           {"templates", c.template_dir ? json(c.template_dir->string()) : json(nullptr)},
           {"context_window", c.context_window},
           {"max_batches", opt_json(c.max_batches)},
           {"backend", c.backend}};
}

void from_json(const json& j, RunConfig& c) {
  RunConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.gate_threshold = j.value("gate_threshold", d.gate_threshold);
  c.gate_mode = j.contains("gate_mode") ? enum_from<MatchMode>(j.at("gate_mode"), parse_mode, "mode") : d.gate_mode;
  c.gate_aggregation = j.contains("gate_aggregation")
                           ? enum_from<GateAggregation>(j.at("gate_aggregation"), parse_aggregation, "aggregation")
                           : d.gate_aggregation;
  c.max_iterations_per_batch = j.value("max_iterations_per_batch", d.max_iterations_per_batch);
  c.review_mode =
      j.contains("review") ? enum_from<ReviewMode>(j.at("review"), parse_review_mode, "review mode") : d.review_mode;
  c.prompt_mode =
      j.contains("mode") ? enum_from<PromptMode>(j.at("mode"), parse_prompt_mode, "prompt mode") : d.prompt_mode;
  c.seed = j.value("seed", d.seed);
  c.corpus_paths.clear();
  for (const auto& p : j.value("corpus", json::array())) c.corpus_paths.emplace_back(p.get<std::string>());
  c.guideline_path = j.value("guideline", std::string());
  const auto templates = opt<std::string>(j, "templates");
  c.template_dir = templates ? std::optional<std::filesystem::path>(*templates) : std::nullopt;
  c.context_window = j.value("context_window", d.context_window);
  c.max_batches = opt<std::size_t>(j, "max_batches");
  c.backend = j.contains("backend") ? j.at("backend").get<BackendConfig>() : d.backend;
}

void to_json(json& j, const ReviewDecision& d) {
  j = json{{"decision", review_kind_name(d.kind)}, {"revision", opt_json(d.revision)}};
}

void from_json(const json& j, ReviewDecision& d) {
  d.kind = enum_from<ReviewKind>(j.at("decision"), parse_review_kind, "review decision");
  d.revision = opt<Revision>(j, "revision");
}

void to_json(json& j, const DocumentOutcome& o) {
  json scores = json::object();
  for (MatchMode m : kAllModes) scores[std::string(mode_name(m))] = o.scores[mode_index(m)];
  j = json{{"doc_id", o.doc_id},
           {"predictions", o.predictions},
           {"warnings", o.warnings},
           {"scores", scores},
           {"exchange", o.exchange}};
}

void from_json(const json& j, DocumentOutcome& o) {
  o.doc_id = j.at("doc_id").get<std::string>();
  o.predictions = j.value("predictions", std::vector<Annotation>{});
  o.warnings = j.value("warnings", std::vector<ParseWarning>{});
  o.scores = ModeScores{};
  if (const auto it = j.find("scores"); it != j.end()) {
    for (MatchMode m : kAllModes) {
      const auto s = it->find(std::string(mode_name(m)));
      if (s != it->end()) o.scores[mode_index(m)] = s->get<PRF>();
    }
  }
  o.exchange = j.value("exchange", std::string());
}

void to_json(json& j, const IterationResult& r) {
  j = json{{"batch_index", r.batch_index},
           {"iteration_index", r.iteration_index},
           {"guideline_version", r.guideline_version},
           {"phase", phase_name(r.phase)},
           {"documents", r.documents},
           {"gate", opt_json(r.gate)},
           {"discrepancies", r.discrepancies},
           {"report", opt_json(r.report)},
           {"revision", opt_json(r.proposed_revision())},
           {"review", opt_json(r.review)},
           {"applied_revision", opt_json(r.applied_revision)},
           {"next_guideline_version", opt_json(r.next_guideline_version)}};
}

void from_json(const json& j, IterationResult& r) {
  r.batch_index = j.at("batch_index").get<std::size_t>();
  r.iteration_index = j.at("iteration_index").get<std::size_t>();
  r.guideline_version = j.value("guideline_version", std::string());
  r.phase = enum_from<IterationPhase>(j.at("phase"), parse_phase, "phase");
  r.documents = j.value("documents", std::vector<DocumentOutcome>{});
  r.gate = opt<double>(j, "gate");
  r.discrepancies = j.value("discrepancies", std::vector<Discrepancy>{});
  r.report = opt<ModerationReport>(j, "report");
  r.review = opt<ReviewDecision>(j, "review");
  r.applied_revision = opt<Revision>(j, "applied_revision");
  r.next_guideline_version = opt<std::string>(j, "next_guideline_version");
}

void to_json(json& j, const RunCursor& c) {
  j = json{{"batch", c.batch}, {"iteration", c.iteration}, {"guideline_version", c.guideline_version}};
}

void from_json(const json& j, RunCursor& c) {
  c.batch = j.at("batch").get<std::size_t>();
  c.iteration = j.at("iteration").get<std::size_t>();
  c.guideline_version = j.value("guideline_version", std::string());
}

json run_header_to_json(const RunRecord& r) {
  return json{{"run_id", r.run_id},
              {"status", run_status_name(r.status)},
              {"config", r.config},
              {"total_batches", r.total_batches},
              {"cursor", r.cursor},
              {"iteration_count", r.iterations.size()},
              {"error", opt_json(r.error)},
              {"seq", r.seq}};
}

json run_to_json(const RunRecord& r) {
  json j = run_header_to_json(r);
  j["iterations"] = r.iterations;
  return j;
}

RunRecord run_from_json(const json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.status = enum_from<RunStatus>(j.at("status"), parse_run_status, "run status");
  r.config = j.at("config").get<RunConfig>();
  r.total_batches = j.value("total_batches", std::size_t{0});
  r.cursor = j.at("cursor").get<RunCursor>();
  r.iterations = j.value("iterations", std::vector<IterationResult>{});
  r.error = opt<std::string>(j, "error");
  r.seq = j.value("seq", std::uint64_t{0});
  return r;
}

}  // namespace gforge
