#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <thread>

#include "gforge/fsutil.hpp"
#include "gforge/service.hpp"
#include "scripted_model.hpp"
#include "test_support.hpp"

using namespace gforge;
using gforge::testing::fixture;
using gforge::testing::TempDir;
using nlohmann::json;

namespace {

struct Harness {
  TempDir dir;
  std::unique_ptr<ApiServer> server;
  std::unique_ptr<httplib::Client> client;

  explicit Harness(bool read_only = false) {
    ApiSession s;
    s.port = 0;
    s.store_root = dir / "runs";
    s.read_only = read_only;
    s.config_base = fixture("runs");
    s.backend_factory = [](const BackendConfig&) { return scripted::make_backend(); };
    server = std::make_unique<ApiServer>(s);
    const int port = server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(30, 0);
  }
  ~Harness() { server->stop(); }

  httplib::Result get(const std::string& path) { return client->Get(path); }
  httplib::Result post(const std::string& path, const json& body) {
    return client->Post(path, body.dump(), "application/json");
  }

  json wait_for(const std::string& id, const std::string& status) {
    std::uint64_t since = 0;
    for (int i = 0; i < 200; ++i) {
      auto res = get("/api/v1/runs/" + id + "/status?since=" + std::to_string(since) + "&wait=2000");
      REQUIRE(res);
      REQUIRE(res->status == 200);
      const json j = json::parse(res->body);
      if (j["status"] == status) return j;
      since = j["seq"].get<std::uint64_t>();
    }
    FAIL("run " << id << " never reached " << status);
    return {};
  }

  void start_run(const std::string& id, const char* conf) {
    auto res = post("/api/v1/runs", {{"run_id", id}, {"config_text", fsutil::read_file(fixture(std::string("runs/") + conf))}});
    REQUIRE(res);
    CHECK(res->status == 201);
  }
};

}  // namespace

TEST_CASE("route table") {
  Harness h;
  auto res = h.get("/api/v1/routes");
  REQUIRE(res);
  CHECK(res->status == 200);
  const json j = json::parse(res->body);
  CHECK(j.size() == api_routes().size());
  CHECK(api_routes().size() >= 10);
}

TEST_CASE("hitl run over HTTP") {
  Harness h;
  h.start_run("web", "hitl.conf");
  const json waiting = h.wait_for("web", "AwaitingReview");
  CHECK(waiting["iterations"] == 1);

  auto it = h.get("/api/v1/runs/web/iterations/0");
  REQUIRE(it);
  CHECK(it->status == 200);
  CHECK(json::parse(it->body)["phase"] == "moderated");
  auto report = h.get("/api/v1/runs/web/iterations/0/report");
  REQUIRE(report);
  CHECK(report->status == 200);
  CHECK(json::parse(report->body)["items"].size() == 17);

  CHECK(h.post("/api/v1/runs/web/review", {{"decision", "approve"}, {"iteration", 3}})->status == 409);
  CHECK(h.client->Post("/api/v1/runs/web/review", "not json", "application/json")->status == 400);
  CHECK(h.post("/api/v1/runs/web/review", {{"decision", "maybe"}})->status == 400);
  CHECK(h.post("/api/v1/runs/web/review", {{"decision", "edit"}})->status == 400);

  auto first = h.post("/api/v1/runs/web/review", {{"decision", "approve"}, {"iteration", 0}});
  REQUIRE(first);
  CHECK(first->status == 200);
  const json a = json::parse(first->body);
  CHECK(a["duplicate"] == false);
  CHECK(a["status"] == "Running");

  auto again = h.post("/api/v1/runs/web/review", {{"decision", "approve"}, {"iteration", 0}});
  REQUIRE(again);
  CHECK(again->status == 200);
  const json b = json::parse(again->body);
  CHECK(b["duplicate"] == true);
  CHECK(b["next_guideline_version"] == a["next_guideline_version"]);

  const json done = h.wait_for("web", "Completed");
  CHECK(done["iterations"] == 3);
  // No run is awaiting review any more.
  CHECK(h.post("/api/v1/runs/web/review", {{"decision", "approve"}})->status == 409);

  auto versions = h.get("/api/v1/runs/web/guidelines");
  REQUIRE(versions);
  const json lineage = json::parse(versions->body);
  REQUIRE(lineage.size() == 2);
  const std::string root = lineage[0]["version_id"];
  const std::string child = lineage[1]["version_id"];
  CHECK(lineage[1]["parent_version"] == root);
  auto version = h.get("/api/v1/runs/web/guidelines/" + child);
  REQUIRE(version);
  CHECK(json::parse(version->body)["text"].get<std::string>().find(scripted::kRevisionMarker) != std::string::npos);
  auto d = h.get("/api/v1/runs/web/guidelines/" + root + "/diff/" + child);
  REQUIRE(d);
  CHECK(d->status == 200);
  CHECK_FALSE(json::parse(d->body)["entries"].empty());

  auto run = h.get("/api/v1/runs/web");
  REQUIRE(run);
  CHECK(json::parse(run->body)["iterations"].size() == 3);
  auto list = h.get("/api/v1/runs");
  REQUIRE(list);
  CHECK(list->body.find("\"web\"") != std::string::npos);

  CHECK(h.post("/api/v1/runs", {{"run_id", "web"}, {"config_text", fsutil::read_file(fixture("runs/hitl.conf"))}})->status ==
        409);
}

TEST_CASE("error statuses") {
  Harness h;
  CHECK(h.get("/api/v1/runs/nope")->status == 404);
  CHECK(h.get("/api/v1/runs/nope/status")->status == 404);
  CHECK(h.get("/api/v1/runs/nope/guidelines")->status == 404);
  CHECK(h.post("/api/v1/runs/nope/review", {{"decision", "approve"}})->status == 404);
  CHECK(h.post("/api/v1/runs", {{"run_id", "x"}})->status == 400);
  CHECK(h.post("/api/v1/runs", {{"run_id", "x"}, {"config_text", "api_key = abc\n"}})->status == 400);
  CHECK(h.post("/api/v1/runs", {{"run_id", "../x"}, {"config_text", fsutil::read_file(fixture("runs/auto.conf"))}})
            ->status == 400);

  h.start_run("a", "auto.conf");
  h.wait_for("a", "Completed");
  CHECK(h.get("/api/v1/runs/a/iterations/9")->status == 404);
  CHECK(h.get("/api/v1/runs/a/iterations/x")->status == 400);
  CHECK(h.get("/api/v1/runs/a/iterations/1/report")->status == 404);
  CHECK(h.get("/api/v1/runs/a/guidelines/" + std::string(64, '0'))->status == 404);
  CHECK(h.get("/api/v1/runs/a/guidelines/short")->status == 404);
}

TEST_CASE("read-only servers refuse writes but serve existing runs") {
  TempDir shared;
  {
    Harness writer;
    writer.start_run("r", "auto.conf");
    writer.wait_for("r", "Completed");
    std::filesystem::copy(writer.dir / "runs", shared / "runs", std::filesystem::copy_options::recursive);
  }
  ApiSession s;
  s.port = 0;
  s.store_root = shared / "runs";
  s.read_only = true;
  ApiServer server(s);
  httplib::Client c("127.0.0.1", server.start());
  CHECK(c.Get("/api/v1/runs/r/status")->status == 200);
  CHECK(c.Post("/api/v1/runs", "{}", "application/json")->status == 403);
  CHECK(c.Post("/api/v1/runs/r/review", R"({"decision":"approve"})", "application/json")->status == 403);
  server.stop();
}

TEST_CASE("long-poll returns early on a change and times out otherwise") {
  Harness h;
  h.start_run("p", "auto.conf");
  const json done = h.wait_for("p", "Completed");
  const auto t0 = std::chrono::steady_clock::now();
  auto res = h.get("/api/v1/runs/p/status?since=" + std::to_string(done["seq"].get<std::uint64_t>()) + "&wait=300");
  const auto elapsed = std::chrono::steady_clock::now() - t0;
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(elapsed >= std::chrono::milliseconds(250));
  CHECK(h.get("/api/v1/runs/p/status?since=0&wait=60000")->status == 200);
}

TEST_CASE("every route is documented") {
  const std::string doc = fsutil::read_file(std::filesystem::path(GFORGE_FIXTURE_DIR).parent_path() / "docs" / "http-api.md");
  for (const Route& r : api_routes()) {
    INFO(r.path);
    CHECK(doc.find("| " + r.method + " | `" + r.path + "`") != std::string::npos);
  }
}
