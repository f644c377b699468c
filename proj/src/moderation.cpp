#include "gforge/moderation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <future>
#include <random>

#include "gforge/error.hpp"
#include "gforge/serialization.hpp"

namespace gforge {

using nlohmann::json;

// ---- discrepancies and factor shares ---------------------------------------

std::vector<Discrepancy> extract_discrepancies(const Document& doc, std::span<const Annotation> pred,
                                               std::span<const Annotation> gold, MatchMode gate_mode,
                                               std::size_t context_window) {
  for (const auto* list : {&pred, &gold}) {
    for (const Annotation& a : *list) {
      if (a.doc_id != doc.doc_id()) {
        throw Error(Errc::MixedDocuments, "annotation for " + a.doc_id + " passed with document " + doc.doc_id());
      }
    }
  }
  const MatchResult m = match_annotations(pred, gold, gate_mode);
  std::vector<Discrepancy> out;
  auto add = [&](DiscrepancyKind kind, const Annotation* p, const Annotation* g) {
    Discrepancy d;
    d.kind = kind;
    if (p != nullptr) d.predicted = *p;
    if (g != nullptr) d.gold = *g;
    d.doc_id = doc.doc_id();
    const std::size_t lo = d.start() > context_window ? d.start() - context_window : 0;
    const std::size_t hi = std::min(doc.length(), d.end() + context_window);
    d.context = std::string(doc.slice(lo, hi));
    d.context_start = lo;
    out.push_back(std::move(d));
  };
  for (const auto& a : m.false_positives) add(DiscrepancyKind::FalsePositive, &a, nullptr);
  for (const auto& a : m.false_negatives) add(DiscrepancyKind::FalseNegative, nullptr, &a);
  for (const auto& [p, g] : m.category_mismatches) add(DiscrepancyKind::CategoryMismatch, &p, &g);
  std::stable_sort(out.begin(), out.end(), [](const Discrepancy& a, const Discrepancy& b) {
    if (a.start() != b.start()) return a.start() < b.start();
    return a.end() < b.end();
  });
  return out;
}

std::map<InfluenceFactor, double> classify_report_factors(const ModerationReport& report) {
  if (report.items.empty()) throw Error(Errc::EmptyReport, "report has no items to classify");
  std::map<InfluenceFactor, std::size_t> counts;
  for (InfluenceFactor f : kAllFactors) counts[f] = 0;
  for (const auto& item : report.items) ++counts[item.factor];
  std::map<InfluenceFactor, double> shares;
  const double n = static_cast<double>(report.items.size());
  for (const auto& [f, c] : counts) shares[f] = static_cast<double>(c) / n;
  return shares;
}

// ---- enum names ------------------------------------------------------------

std::string_view run_status_name(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Running: return "Running";
    case RunStatus::AwaitingReview: return "AwaitingReview";
    case RunStatus::Completed: return "Completed";
    case RunStatus::Failed: return "Failed";
  }
  return "Running";
}

std::optional<RunStatus> parse_run_status(std::string_view name) noexcept {
  for (RunStatus s : {RunStatus::Running, RunStatus::AwaitingReview, RunStatus::Completed, RunStatus::Failed}) {
    if (run_status_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view phase_name(IterationPhase p) noexcept {
  switch (p) {
    case IterationPhase::Annotated: return "annotated";
    case IterationPhase::Evaluated: return "evaluated";
    case IterationPhase::Moderated: return "moderated";
    case IterationPhase::Decided: return "decided";
  }
  return "annotated";
}

std::optional<IterationPhase> parse_phase(std::string_view name) noexcept {
  for (IterationPhase p : {IterationPhase::Annotated, IterationPhase::Evaluated, IterationPhase::Moderated,
                           IterationPhase::Decided}) {
    if (phase_name(p) == name) return p;
  }
  return std::nullopt;
}

std::string_view review_kind_name(ReviewKind k) noexcept {
  switch (k) {
    case ReviewKind::Approve: return "approve";
    case ReviewKind::Edit: return "edit";
    case ReviewKind::Reject: return "reject";
  }
  return "approve";
}

std::optional<ReviewKind> parse_review_kind(std::string_view name) noexcept {
  for (ReviewKind k : {ReviewKind::Approve, ReviewKind::Edit, ReviewKind::Reject}) {
    if (review_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

const std::optional<Revision>& IterationResult::proposed_revision() const {
  static const std::optional<Revision> none;
  return report ? report->proposed_revision : none;
}

// ---- run store ---------------------------------------------------------------

bool valid_run_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
           c == '-';
  });
}

std::string make_run_id() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  std::random_device rd;
  char suffix[8];
  std::snprintf(suffix, sizeof suffix, "%04x", static_cast<unsigned>(rd() & 0xffffu));
  return std::string("run-") + stamp + "-" + suffix;
}

RunStore::RunStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path RunStore::run_dir(std::string_view run_id) const {
  if (!valid_run_id(run_id)) throw Error(Errc::UnknownRun, "invalid run id \"" + std::string(run_id) + "\"");
  return root_ / std::string(run_id);
}

bool RunStore::exists(std::string_view run_id) const {
  return valid_run_id(run_id) && std::filesystem::exists(run_dir(run_id) / "run.json");
}

std::vector<std::string> RunStore::list() const {
  std::vector<std::string> ids;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(root_, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && exists(name)) ids.push_back(name);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

std::filesystem::path iteration_path(const std::filesystem::path& dir, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "%04zu.json", index);
  return dir / "iterations" / name;
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(fsutil::read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::Io, path.string() + ": " + e.what());
  }
}

}  // namespace

RunRecord RunStore::load(std::string_view run_id) const {
  if (!exists(run_id)) throw Error(Errc::UnknownRun, "no run \"" + std::string(run_id) + "\"");
  const auto dir = run_dir(run_id);
  const json header = read_json(dir / "run.json");
  try {
    RunRecord r = run_from_json(header);
    // Iteration files past the header's count are leftovers from a write that
    // never got its header update; they are ignored.
    const auto count = header.value("iteration_count", std::size_t{0});
    r.iterations.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      r.iterations.push_back(read_json(iteration_path(dir, i)).get<IterationResult>());
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::Io, "run " + std::string(run_id) + ": " + e.what());
  }
}

void RunStore::save(const RunRecord& record, std::optional<std::size_t> changed_iteration) const {
  const auto dir = run_dir(record.run_id);
  std::filesystem::create_directories(dir / "iterations");
  if (changed_iteration) {
    fsutil::write_file_atomic(iteration_path(dir, *changed_iteration),
                              json(record.iterations.at(*changed_iteration)).dump(2) + "\n");
  }
  fsutil::write_file_atomic(dir / "run.json", run_header_to_json(record).dump(2) + "\n");
}

std::uint64_t RunStore::seq(std::string_view run_id) const {
  if (!exists(run_id)) throw Error(Errc::UnknownRun, "no run \"" + std::string(run_id) + "\"");
  return read_json(run_dir(run_id) / "run.json").value("seq", std::uint64_t{0});
}

VersionStore RunStore::versions(std::string_view run_id) const { return VersionStore(run_dir(run_id) / "guidelines"); }

std::unique_ptr<fsutil::FileLock> RunStore::lock(std::string_view run_id, int timeout_ms) const {
  return std::make_unique<fsutil::FileLock>(run_dir(run_id) / "run.lock", timeout_ms);
}

// ---- phases --------------------------------------------------------------------

namespace {

std::vector<DocumentOutcome> annotate_phase(std::span<const BatchDocument> batch, const GuidelineDoc* guideline,
                                            Gateway& gateway, const PromptTemplates& templates) {
  std::vector<std::future<DocumentOutcome>> pending;
  pending.reserve(batch.size());
  for (const BatchDocument& item : batch) {
    pending.push_back(std::async(std::launch::async, [&item, guideline, &gateway, &templates] {
      DocumentOutcome out;
      out.doc_id = item.document.doc_id();
      const Exchange ex = gateway.complete(build_annotator_prompt(item.document, guideline, templates));
      out.exchange = ex.prompt_digest;
      try {
        ParsedOutput parsed = parse_annotator_output(ex.response, item.document);
        out.predictions = std::move(parsed.annotations);
        out.warnings = std::move(parsed.warnings);
      } catch (const Error& e) {
        if (e.code() != Errc::Unparseable) throw;
        out.warnings.push_back(ParseWarning{"", "unparseable output: " + e.detail()});
      }
      return out;
    }));
  }
  // Collect every future before rethrowing so no call outlives the batch.
  std::vector<DocumentOutcome> outcomes;
  std::exception_ptr first_error;
  for (auto& f : pending) {
    try {
      outcomes.push_back(f.get());
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return outcomes;
}

void evaluate_phase(IterationResult& it, std::span<const BatchDocument> batch, const RunConfig& config) {
  std::vector<PRF> gate_scores;
  it.discrepancies.clear();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    DocumentOutcome& out = it.documents.at(i);
    const auto& gold = batch[i].gold;
    out.scores = score_all_modes(out.predictions, gold);
    gate_scores.push_back(out.scores[mode_index(config.gate_mode)]);
    auto found = extract_discrepancies(batch[i].document, out.predictions, gold, config.gate_mode,
                                       config.context_window);
    it.discrepancies.insert(it.discrepancies.end(), found.begin(), found.end());
  }
  it.gate = gate_value(gate_scores, config.gate_aggregation);
}

std::string report_label(const IterationResult& it) {
  return "batch " + std::to_string(it.batch_index) + " iteration " + std::to_string(it.iteration_index);
}

void moderate_phase(IterationResult& it, std::span<const BatchDocument> batch, const GuidelineDoc& guideline,
                    Gateway& gateway, const PromptTemplates& templates) {
  ModerationReport report;
  if (it.discrepancies.empty()) {
    report.warnings.push_back(ParseWarning{"", "gate below threshold with no discrepancies to analyse"});
    it.report = std::move(report);
    return;
  }
  std::vector<Document> docs;
  for (const auto& b : batch) docs.push_back(b.document);

  const Exchange analysis =
      gateway.complete(build_moderator_analyze_prompt(it.discrepancies, guideline, docs, templates));
  report.exchanges.push_back(analysis.prompt_digest);
  try {
    ParsedReport parsed = parse_moderation_report(analysis.response, it.discrepancies);
    report.items = std::move(parsed.items);
    report.warnings = std::move(parsed.warnings);
  } catch (const Error& e) {
    if (e.code() != Errc::Unparseable) throw;
    report.warnings.push_back(ParseWarning{"report", e.detail()});
  }

  const Exchange update = gateway.complete(build_moderator_update_prompt(report, guideline, templates));
  report.exchanges.push_back(update.prompt_digest);
  try {
    ParsedRevision parsed = parse_revision(update.response, guideline, Author::Llm);
    parsed.revision.source_report = report_label(it);
    report.proposed_revision = std::move(parsed.revision);
    report.warnings.insert(report.warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
  } catch (const Error& e) {
    if (e.code() != Errc::Unparseable && e.code() != Errc::EmptyRevision) throw;
    report.warnings.push_back(ParseWarning{"revision", e.detail()});
  }
  it.report = std::move(report);
}

bool gate_passes(const IterationResult& it, const RunConfig& config) {
  return config.prompt_mode == PromptMode::Baseline || (it.gate && *it.gate >= config.gate_threshold);
}

}  // namespace

IterationResult run_iteration(std::span<const BatchDocument> batch, const GuidelineDoc* guideline,
                              const RunConfig& config, Gateway& gateway, const PromptTemplates& templates) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "run_iteration needs at least one document");
  IterationResult it;
  it.guideline_version = guideline != nullptr ? guideline->version_id() : std::string();
  it.documents = annotate_phase(batch, guideline, gateway, templates);
  it.phase = IterationPhase::Annotated;
  evaluate_phase(it, batch, config);
  it.phase = IterationPhase::Evaluated;
  if (guideline != nullptr && !gate_passes(it, config)) {
    moderate_phase(it, batch, *guideline, gateway, templates);
    it.phase = IterationPhase::Moderated;
  }
  return it;
}

// ---- engine ----------------------------------------------------------------------

namespace {

struct RunContext {
  Corpus corpus;
  PromptTemplates templates;
  std::unique_ptr<Gateway> gateway;
};

std::vector<BatchDocument> batch_documents(const RunRecord& r, const Corpus& corpus) {
  std::vector<BatchDocument> out;
  for (std::size_t idx : sample_batch_indices(corpus.size(), r.config.batch_size, r.config.seed, r.cursor.batch)) {
    const Document& doc = corpus.documents()[idx];
    const auto gold = corpus.gold(doc.doc_id());
    out.push_back(BatchDocument{doc, std::vector<Annotation>(gold.begin(), gold.end())});
  }
  return out;
}

std::size_t planned_batches(const RunConfig& config, std::size_t corpus_size) {
  std::size_t n = batch_count(corpus_size, config.batch_size);
  if (config.max_batches) n = std::min(n, *config.max_batches);
  return n;
}

bool is_guideline_error(Errc c) {
  return c == Errc::NoOpRevision || c == Errc::UnknownSection || c == Errc::DuplicateHeading ||
         c == Errc::EmptyRevision || c == Errc::InvalidArgument;
}

}  // namespace

Engine::Engine(RunStore store) : Engine(std::move(store), Options{}) {}

Engine::Engine(RunStore store, Options options) : store_(std::move(store)), options_(std::move(options)) {}

RunRecord Engine::create(const RunConfig& config, const std::string& run_id) {
  config.validate();
  if (!valid_run_id(run_id)) throw Error(Errc::InvalidArgument, "invalid run id \"" + run_id + "\"");
  if (store_.exists(run_id)) throw Error(Errc::RunExists, "run \"" + run_id + "\" already exists");

  const Corpus corpus = load_pubtator(config.corpus_paths);
  std::optional<GuidelineDoc> guideline;
  if (config.prompt_mode == PromptMode::Guideline) guideline = load_guideline(config.guideline_path);

  std::filesystem::create_directories(store_.run_dir(run_id));
  auto lock = store_.lock(run_id, options_.lock_timeout_ms);
  if (store_.exists(run_id)) throw Error(Errc::RunExists, "run \"" + run_id + "\" already exists");

  RunRecord r;
  r.run_id = run_id;
  r.config = config;
  r.total_batches = planned_batches(config, corpus.size());
  if (guideline) {
    store_.versions(run_id).put(*guideline);
    r.cursor.guideline_version = guideline->version_id();
  }
  r.seq = 1;
  store_.save(r, std::nullopt);
  if (options_.on_persist) options_.on_persist(r);
  return r;
}

RunRecord Engine::run(const RunConfig& config, const std::string& run_id) {
  create(config, run_id);
  return resume(run_id);
}

RunRecord Engine::resume(const std::string& run_id) {
  auto lock = store_.lock(run_id, options_.lock_timeout_ms);
  RunRecord r = store_.load(run_id);
  if (r.status == RunStatus::Completed || r.status == RunStatus::AwaitingReview) return r;

  RunContext ctx;
  ctx.corpus = load_pubtator(r.config.corpus_paths);
  ctx.templates = r.config.template_dir ? PromptTemplates::load(*r.config.template_dir) : PromptTemplates::defaults();
  std::unique_ptr<ChatBackend> backend =
      options_.backend_factory ? options_.backend_factory(r.config.backend) : make_backend(r.config.backend);
  ctx.gateway = std::make_unique<Gateway>(std::move(backend), r.config.backend.max_in_flight);

  if (r.status == RunStatus::Failed) {
    r.status = RunStatus::Running;
    r.error.reset();
  }
  VersionStore versions = store_.versions(run_id);

  auto persist = [&](std::optional<std::size_t> changed) {
    ++r.seq;
    store_.save(r, changed);
    if (options_.on_persist) options_.on_persist(r);
  };
  auto guideline_at = [&](const std::string& version) -> std::optional<GuidelineDoc> {
    if (version.empty()) return std::nullopt;
    return versions.get(version);
  };

  try {
    for (;;) {
      if (r.cursor.batch >= r.total_batches) {
        r.status = RunStatus::Completed;
        persist(std::nullopt);
        return r;
      }
      const std::vector<BatchDocument> batch = batch_documents(r, ctx.corpus);

      if (r.iterations.empty() || r.iterations.back().phase == IterationPhase::Decided) {
        IterationResult it;
        it.batch_index = r.cursor.batch;
        it.iteration_index = r.cursor.iteration;
        it.guideline_version = r.cursor.guideline_version;
        const auto guideline = guideline_at(it.guideline_version);
        it.documents = annotate_phase(batch, guideline ? &*guideline : nullptr, *ctx.gateway, ctx.templates);
        it.phase = IterationPhase::Annotated;
        r.iterations.push_back(std::move(it));
        persist(r.iterations.size() - 1);
        continue;
      }

      const std::size_t index = r.iterations.size() - 1;
      IterationResult& it = r.iterations.back();
      switch (it.phase) {
        case IterationPhase::Annotated:
          evaluate_phase(it, batch, r.config);
          it.phase = IterationPhase::Evaluated;
          persist(index);
          break;
        case IterationPhase::Evaluated:
          if (gate_passes(it, r.config)) {
            it.next_guideline_version = it.guideline_version;
            it.phase = IterationPhase::Decided;
            r.cursor = RunCursor{r.cursor.batch + 1, 0, it.guideline_version};
          } else {
            moderate_phase(it, batch, *guideline_at(it.guideline_version), *ctx.gateway, ctx.templates);
            it.phase = IterationPhase::Moderated;
          }
          persist(index);
          break;
        case IterationPhase::Moderated: {
          if (r.config.review_mode == ReviewMode::Hitl) {
            r.status = RunStatus::AwaitingReview;
            persist(std::nullopt);
            return r;
          }
          const GuidelineDoc current = *guideline_at(it.guideline_version);
          std::optional<GuidelineDoc> child;
          if (const auto& proposal = it.proposed_revision()) {
            try {
              child = apply_revision(current, *proposal);
            } catch (const Error& e) {
              if (!is_guideline_error(e.code())) throw;
              it.report->warnings.push_back(ParseWarning{"revision", "not applied: " + std::string(e.what())});
            }
          }
          if (child) {
            versions.put(*child, it.proposed_revision());
            it.applied_revision = it.proposed_revision();
          }
          const std::string next = child ? child->version_id() : it.guideline_version;
          it.next_guideline_version = next;
          it.phase = IterationPhase::Decided;
          const bool last = it.iteration_index + 1 >= r.config.max_iterations_per_batch;
          r.cursor = last ? RunCursor{r.cursor.batch + 1, 0, next}
                          : RunCursor{r.cursor.batch, it.iteration_index + 1, next};
          persist(index);
          break;
        }
        case IterationPhase::Decided:
          break;  // unreachable: handled above
      }
    }
  } catch (const Error& e) {
    r.status = RunStatus::Failed;
    r.error = e.what();
    persist(std::nullopt);
    throw Error(Errc::FailedRun, "run " + run_id + " failed: " + e.what());
  }
}

RunRecord Engine::apply_review(const std::string& run_id, const ReviewDecision& decision) {
  auto lock = store_.lock(run_id, options_.lock_timeout_ms);
  RunRecord r = store_.load(run_id);
  if (r.status != RunStatus::AwaitingReview || r.iterations.empty() ||
      r.iterations.back().phase != IterationPhase::Moderated) {
    throw Error(Errc::NotAwaitingReview,
                "run " + run_id + " is " + std::string(run_status_name(r.status)) + ", not AwaitingReview");
  }
  VersionStore versions = store_.versions(run_id);
  const std::size_t index = r.iterations.size() - 1;
  IterationResult& it = r.iterations.back();
  const GuidelineDoc current = versions.get(it.guideline_version);

  std::optional<Revision> applied;
  std::optional<GuidelineDoc> child;
  switch (decision.kind) {
    case ReviewKind::Approve:
      if (it.proposed_revision()) {
        try {
          child = apply_revision(current, *it.proposed_revision());
          applied = it.proposed_revision();
        } catch (const Error& e) {
          if (!is_guideline_error(e.code())) throw;
          it.report->warnings.push_back(ParseWarning{"revision", "not applied: " + std::string(e.what())});
        }
      }
      break;
    case ReviewKind::Edit: {
      if (!decision.revision) throw Error(Errc::InvalidArgument, "an edit decision needs a revision");
      Revision rev = *decision.revision;
      rev.author = Author::Human;
      if (!rev.source_report) rev.source_report = report_label(it);
      child = apply_revision(current, rev);  // errors leave the run AwaitingReview
      applied = std::move(rev);
      break;
    }
    case ReviewKind::Reject:
      break;
  }

  if (child) versions.put(*child, applied);
  ReviewDecision recorded = decision;
  if (recorded.kind == ReviewKind::Edit) recorded.revision = applied;
  it.review = std::move(recorded);
  it.applied_revision = applied;
  const std::string next = child ? child->version_id() : it.guideline_version;
  it.next_guideline_version = next;
  it.phase = IterationPhase::Decided;
  const bool last = it.iteration_index + 1 >= r.config.max_iterations_per_batch;
  r.cursor = last ? RunCursor{r.cursor.batch + 1, 0, next} : RunCursor{r.cursor.batch, it.iteration_index + 1, next};
  r.status = RunStatus::Running;
  ++r.seq;
  store_.save(r, index);
  if (options_.on_persist) options_.on_persist(r);
  return r;
}

RunRecord run_loop(const RunConfig& config, const RunStore& store, const std::string& run_id) {
  return Engine(store).run(config, run_id);
}

}  // namespace gforge
