// Regenerates fixtures/cassettes/*.jsonl by running the fixture configs
// against the scripted model through a recording backend.
//
//   gforge_make_fixtures <fixtures-dir>

#include <iostream>
#include <set>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/moderation.hpp"
#include "gforge/serialization.hpp"
#include "scripted_model.hpp"

namespace fs = std::filesystem;
using namespace gforge;

namespace {

Engine recording_engine(const fs::path& store, const fs::path& cassette) {
  Engine::Options opts;
  opts.backend_factory = [cassette](const BackendConfig& c) -> std::unique_ptr<ChatBackend> {
    return std::make_unique<RecordingBackend>(scripted::make_backend(c.model, c.temperature), cassette);
  };
  return Engine(RunStore(store), opts);
}

// Keeps the first exchange per digest.
void dedupe(const fs::path& raw, const fs::path& out) {
  std::set<std::string> seen;
  std::string kept;
  const std::string text = fsutil::read_file(raw);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    if (line.empty()) continue;
    if (seen.insert(exchange_from_line(line).prompt_digest).second) kept += line + "\n";
  }
  fsutil::write_file_atomic(out, kept);
  std::cout << out.string() << ": " << seen.size() << " exchanges\n";
}

void drive_hitl(Engine& engine, const RunConfig& config, const std::string& id, const ReviewDecision& decision) {
  RunRecord r = engine.run(config, id);
  while (r.status == RunStatus::AwaitingReview) {
    engine.apply_review(id, decision);
    r = engine.resume(id);
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gforge_make_fixtures <fixtures-dir>\n";
    return 2;
  }
  const fs::path fixtures = fs::absolute(argv[1]);
  const fs::path work = fs::temp_directory_path() / "gforge-make-fixtures";
  fs::remove_all(work);
  fs::create_directories(work);
  try {
    {
      const RunConfig config = load_run_config(fixtures / "runs" / "auto.conf");
      Engine engine = recording_engine(work / "store", work / "auto.raw");
      engine.run(config, "auto");
      dedupe(work / "auto.raw", fixtures / "cassettes" / "auto.jsonl");
    }
    {
      const RunConfig config = load_run_config(fixtures / "runs" / "baseline.conf");
      Engine engine = recording_engine(work / "store", work / "baseline.raw");
      engine.run(config, "baseline");
      dedupe(work / "baseline.raw", fixtures / "cassettes" / "baseline.jsonl");
    }
    {
      // One cassette serves the approve, reject and edit paths.
      const RunConfig config = load_run_config(fixtures / "runs" / "hitl.conf");
      Engine engine = recording_engine(work / "store", work / "hitl.raw");
      drive_hitl(engine, config, "hitl-approve", ReviewDecision{ReviewKind::Approve, std::nullopt});
      drive_hitl(engine, config, "hitl-reject", ReviewDecision{ReviewKind::Reject, std::nullopt});
      const Revision human =
          nlohmann::json::parse(fsutil::read_file(fixtures / "runs" / "human_revision.json")).get<Revision>();
      drive_hitl(engine, config, "hitl-edit", ReviewDecision{ReviewKind::Edit, human});
      dedupe(work / "hitl.raw", fixtures / "cassettes" / "hitl.jsonl");
    }
  } catch (const Error& e) {
    std::cerr << "gforge_make_fixtures: " << e.what() << "\n";
    return 1;
  }
  fs::remove_all(work);
  return 0;
}
