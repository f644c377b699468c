#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gforge/corpus.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/guidelines.hpp"
#include "gforge/llm_gateway.hpp"
#include "gforge/metrics.hpp"
#include "gforge/moderation_types.hpp"
#include "gforge/prompting.hpp"
#include "gforge/run_config.hpp"

namespace gforge {

// Residue of match_annotations under gate_mode, ordered by span start, each
// with a window of `context_window` characters either side. Throws
// MixedDocuments.
std::vector<Discrepancy> extract_discrepancies(const Document& doc, std::span<const Annotation> pred,
                                               std::span<const Annotation> gold, MatchMode gate_mode,
                                               std::size_t context_window = 120);

// Share of report items per factor (all seven keys present). Throws
// EmptyReport.
std::map<InfluenceFactor, double> classify_report_factors(const ModerationReport& report);

enum class RunStatus { Running, AwaitingReview, Completed, Failed };
std::string_view run_status_name(RunStatus s) noexcept;
std::optional<RunStatus> parse_run_status(std::string_view name) noexcept;

// Progress of one iteration; each value is persisted before the next
// side effect.
enum class IterationPhase { Annotated, Evaluated, Moderated, Decided };
std::string_view phase_name(IterationPhase p) noexcept;
std::optional<IterationPhase> parse_phase(std::string_view name) noexcept;

enum class ReviewKind { Approve, Edit, Reject };
std::string_view review_kind_name(ReviewKind k) noexcept;
std::optional<ReviewKind> parse_review_kind(std::string_view name) noexcept;

struct ReviewDecision {
  ReviewKind kind = ReviewKind::Approve;
  std::optional<Revision> revision;  // Edit only

  friend bool operator==(const ReviewDecision&, const ReviewDecision&) = default;
};

struct DocumentOutcome {
  std::string doc_id;
  std::vector<Annotation> predictions;
  std::vector<ParseWarning> warnings;
  ModeScores scores{};
  std::string exchange;  // prompt digest of the annotator call

  friend bool operator==(const DocumentOutcome&, const DocumentOutcome&) = default;
};

struct IterationResult {
  std::size_t batch_index = 0;
  std::size_t iteration_index = 0;
  std::string guideline_version;  // empty for baseline runs
  IterationPhase phase = IterationPhase::Annotated;
  std::vector<DocumentOutcome> documents;
  std::optional<double> gate;
  std::vector<Discrepancy> discrepancies;
  std::optional<ModerationReport> report;  // carries the proposed revision
  std::optional<ReviewDecision> review;
  std::optional<Revision> applied_revision;
  std::optional<std::string> next_guideline_version;

  const std::optional<Revision>& proposed_revision() const;
  friend bool operator==(const IterationResult&, const IterationResult&) = default;
};

struct RunCursor {
  std::size_t batch = 0;
  std::size_t iteration = 0;
  std::string guideline_version;
  friend bool operator==(const RunCursor&, const RunCursor&) = default;
};

struct RunRecord {
  std::string run_id;
  RunConfig config;
  RunStatus status = RunStatus::Running;
  std::size_t total_batches = 0;
  RunCursor cursor;
  std::vector<IterationResult> iterations;
  std::optional<std::string> error;
  std::uint64_t seq = 0;  // bumped on every persisted transition
};

// Run directory layout under root/<run_id>/: run.json (header), iterations/
// NNNN.json, guidelines/ (version store), run.lock.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path run_dir(std::string_view run_id) const;
  bool exists(std::string_view run_id) const;
  std::vector<std::string> list() const;

  // Throws UnknownRun.
  RunRecord load(std::string_view run_id) const;
  // Writes iteration file `changed_iteration` (if any) and then run.json,
  // both atomically.
  void save(const RunRecord& record, std::optional<std::size_t> changed_iteration) const;
  std::uint64_t seq(std::string_view run_id) const;
  VersionStore versions(std::string_view run_id) const;
  // Advisory lock shared with other processes; timeout_ms < 0 waits forever.
  std::unique_ptr<fsutil::FileLock> lock(std::string_view run_id, int timeout_ms = -1) const;

 private:
  std::filesystem::path root_;
};

std::string make_run_id();
// Letters, digits, '.', '_' and '-' only.
bool valid_run_id(std::string_view run_id) noexcept;

struct BatchDocument {
  Document document;
  std::vector<Annotation> gold;
};

// Phases 1-3 for one batch without persistence: annotate every document,
// score all four criteria plus the gate, and when the gate is below the
// threshold ask the moderator for a report and a proposed revision. Never
// applies the revision. Throws EmptyBatch and backend errors.
IterationResult run_iteration(std::span<const BatchDocument> batch, const GuidelineDoc* guideline,
                              const RunConfig& config, Gateway& gateway,
                              const PromptTemplates& templates = PromptTemplates::defaults());

class Engine {
 public:
  using BackendFactory = std::function<std::unique_ptr<ChatBackend>(const BackendConfig&)>;
  using PersistHook = std::function<void(const RunRecord&)>;

  struct Options {
    BackendFactory backend_factory;  // defaults to make_backend
    PersistHook on_persist;          // called after each persisted transition
    int lock_timeout_ms = -1;
  };

  explicit Engine(RunStore store);
  Engine(RunStore store, Options options);

  // Persists a new run without driving it. Throws RunExists, InvalidConfig.
  RunRecord create(const RunConfig& config, const std::string& run_id);
  // create + resume.
  RunRecord run(const RunConfig& config, const std::string& run_id);
  // Drives the loop until Completed, AwaitingReview or Failed. A Failed run
  // is retried from its last persisted transition. Throws FailedRun (after
  // persisting) on backend errors.
  RunRecord resume(const std::string& run_id);
  // Throws NotAwaitingReview, guideline errors for a bad edit (the run stays
  // AwaitingReview). Leaves the run Running; call resume to continue.
  RunRecord apply_review(const std::string& run_id, const ReviewDecision& decision);

  const RunStore& store() const noexcept { return store_; }

 private:
  RunStore store_;
  Options options_;
};

// Full loop for a fresh run id: Engine(store).run(config, run_id).
RunRecord run_loop(const RunConfig& config, const RunStore& store, const std::string& run_id);

}  // namespace gforge
