#include <doctest.h>
#include <json.hpp>

#include "gforge/error.hpp"
#include "gforge/run_config.hpp"
#include "gforge/serialization.hpp"
#include "test_support.hpp"

using namespace gforge;
using gforge::testing::fixture;

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

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.batch_size == 5);
  CHECK(c.gate_threshold == 0.8);
  CHECK(c.gate_mode == kStrict);
  CHECK(c.gate_aggregation == GateAggregation::Macro);
  CHECK(c.max_iterations_per_batch == 3);
  CHECK(c.review_mode == ReviewMode::Auto);
  CHECK(c.prompt_mode == PromptMode::Guideline);
  CHECK(c.context_window == 120);
}

TEST_CASE("parsing, comments and path resolution") {
  const RunConfig c = parse_run_config(R"(
# comment line
mode = guideline
review = hitl   # trailing comment
batch_size = 4
threshold = 0.75
gate_mode = soft
gate_aggregation = micro
max_iterations = 2
seed = 42
corpus = a.txt
corpus = /abs/b.txt
guideline = g/v1.txt
backend = replay
cassette = c.jsonl
max_in_flight = 2
)",
                                       "/base");
  CHECK(c.review_mode == ReviewMode::Hitl);
  CHECK(c.batch_size == 4);
  CHECK(c.gate_threshold == 0.75);
  CHECK(c.gate_mode == kSoft);
  CHECK(c.gate_aggregation == GateAggregation::Micro);
  CHECK(c.max_iterations_per_batch == 2);
  CHECK(c.seed == 42);
  REQUIRE(c.corpus_paths.size() == 2);
  CHECK(c.corpus_paths[0] == "/base/a.txt");
  CHECK(c.corpus_paths[1] == "/abs/b.txt");
  CHECK(c.guideline_path == "/base/g/v1.txt");
  CHECK(c.backend.cassette_path == "/base/c.jsonl");
  CHECK(c.backend.max_in_flight == 2);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("render then parse is stable") {
  const RunConfig c = load_run_config(fixture("runs/auto.conf"));
  const RunConfig back = parse_run_config(render_run_config(c), "/");
  CHECK(render_run_config(back) == render_run_config(c));
  CHECK(nlohmann::json(back) == nlohmann::json(c));
}

TEST_CASE("json round-trip") {
  const RunConfig c = load_run_config(fixture("runs/hitl.conf"));
  nlohmann::json j = c;
  const RunConfig back = j.get<RunConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(j.dump().find("api_key") == std::string::npos);
}

TEST_CASE("credentials are never read from config") {
  for (const char* key : {"api_key", "key", "token"}) {
    const std::string text = std::string(key) + " = sk-123\n";
    CHECK(code_of([&] { parse_run_config(text, "/"); }) == Errc::InvalidConfig);
  }
}

TEST_CASE("bad settings") {
  const char* bad[] = {"unknown = 1",     "batch_size = x",  "batch_size = -1", "threshold = abc",
                       "review = maybe",  "mode = other",    "gate_mode = loose", "no equals sign",
                       "backend = cloud", "seed = 1.5"};
  for (const char* text : bad) {
    INFO(text);
    CHECK(code_of([&] { parse_run_config(text, "/"); }) == Errc::InvalidConfig);
  }
}

TEST_CASE("validation") {
  RunConfig c = load_run_config(fixture("runs/auto.conf"));
  CHECK_NOTHROW(c.validate());
  auto fails = [](RunConfig bad) { return code_of([&] { bad.validate(); }) == Errc::InvalidConfig; };
  RunConfig t = c;
  t.gate_threshold = 0.0;
  CHECK(fails(t));
  t.gate_threshold = 1.5;
  CHECK(fails(t));
  t = c;
  t.batch_size = 0;
  CHECK(fails(t));
  t = c;
  t.max_iterations_per_batch = 0;
  CHECK(fails(t));
  t = c;
  t.corpus_paths.clear();
  CHECK(fails(t));
  t = c;
  t.guideline_path.clear();
  CHECK(fails(t));
  t.prompt_mode = PromptMode::Baseline;
  CHECK_NOTHROW(t.validate());
  t = c;
  t.max_batches = 0;
  CHECK(fails(t));
  t = c;
  t.gate_threshold = 1.0;
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("overrides use the same keys") {
  RunConfig c = load_run_config(fixture("runs/auto.conf"));
  apply_config_setting(c, "review", "hitl", "/");
  apply_config_setting(c, "gate_threshold", "0.9", "/");
  apply_config_setting(c, "max_iterations_per_batch", "5", "/");
  CHECK(c.review_mode == ReviewMode::Hitl);
  CHECK(c.gate_threshold == 0.9);
  CHECK(c.max_iterations_per_batch == 5);
}
