#pragma once

// JSON codecs for the persisted and served records. Field names are the wire
// format of the run store and the HTTP API.

#include <json.hpp>

#include "gforge/corpus.hpp"
#include "gforge/guidelines.hpp"
#include "gforge/llm_gateway.hpp"
#include "gforge/metrics.hpp"
#include "gforge/moderation.hpp"
#include "gforge/moderation_types.hpp"
#include "gforge/run_config.hpp"

namespace gforge {

void to_json(nlohmann::json& j, const Annotation& a);
void from_json(const nlohmann::json& j, Annotation& a);

// Counts plus derived precision/recall/f1 (the latter ignored on read).
void to_json(nlohmann::json& j, const PRF& p);
void from_json(const nlohmann::json& j, PRF& p);

void to_json(nlohmann::json& j, const Edit& e);
void from_json(const nlohmann::json& j, Edit& e);
void to_json(nlohmann::json& j, const Revision& r);
void from_json(const nlohmann::json& j, Revision& r);

void to_json(nlohmann::json& j, const Section& s);
void from_json(const nlohmann::json& j, Section& s);
nlohmann::json guideline_to_json(const GuidelineDoc& doc);
// Rebuilds the document; the caller decides whether a stored id must match.
GuidelineDoc guideline_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const DiffEntry& d);

void to_json(nlohmann::json& j, const Discrepancy& d);
void from_json(const nlohmann::json& j, Discrepancy& d);
void to_json(nlohmann::json& j, const ReportItem& r);
void from_json(const nlohmann::json& j, ReportItem& r);
void to_json(nlohmann::json& j, const ParseWarning& w);
void from_json(const nlohmann::json& j, ParseWarning& w);
void to_json(nlohmann::json& j, const ModerationReport& r);
void from_json(const nlohmann::json& j, ModerationReport& r);

void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

void to_json(nlohmann::json& j, const ReviewDecision& d);
void from_json(const nlohmann::json& j, ReviewDecision& d);
void to_json(nlohmann::json& j, const DocumentOutcome& o);
void from_json(const nlohmann::json& j, DocumentOutcome& o);
void to_json(nlohmann::json& j, const IterationResult& r);
void from_json(const nlohmann::json& j, IterationResult& r);
void to_json(nlohmann::json& j, const RunCursor& c);
void from_json(const nlohmann::json& j, RunCursor& c);

// Header only: everything but the iterations, plus their count.
nlohmann::json run_header_to_json(const RunRecord& r);
// Full record including iterations.
nlohmann::json run_to_json(const RunRecord& r);
RunRecord run_from_json(const nlohmann::json& j);

}  // namespace gforge
