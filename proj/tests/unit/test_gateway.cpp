#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/llm_gateway.hpp"
#include "test_support.hpp"

using namespace gforge;
using gforge::testing::fixture;
using gforge::testing::TempDir;
using nlohmann::json;

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

// Minimal OpenAI-compatible endpoint on a free local port. The first
// `failures` requests get `fail_status`, the rest echo the prompt back.
struct StubEndpoint {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> requests{0};
  int failures = 0;
  int fail_status = 500;
  std::string last_auth;

  StubEndpoint() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = requests.fetch_add(1);
      last_auth = req.get_header_value("Authorization");
      if (n < failures) {
        res.status = fail_status;
        return;
      }
      const json body = json::parse(req.body);
      const json reply = {
          {"choices", {{{"message", {{"role", "assistant"}, {"content", "echo:" + body["messages"][0]["content"].get<std::string>()}}}}}},
          {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 4}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubEndpoint() {
    server.stop();
    thread.join();
  }
  BackendConfig config() const {
    BackendConfig c;
    c.kind = BackendKind::Live;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    c.backoff_base = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(5000);
    return c;
  }
};

}  // namespace

TEST_CASE("prompt digest depends on model, temperature and prompt") {
  const std::string d = prompt_digest("p", "m", 0.0);
  CHECK(d.size() == 64);
  CHECK(d == prompt_digest("p", "m", 0.0));
  CHECK(d != prompt_digest("p ", "m", 0.0));
  CHECK(d != prompt_digest("p", "m2", 0.0));
  CHECK(d != prompt_digest("p", "m", 0.5));
}

TEST_CASE("cassette lines round-trip") {
  Exchange ex{"abc", "prompt\nwith lines", "résumé", "gpt-4o", 0.25, "2024-01-01T00:00:00Z", Usage{1, 2}};
  const Exchange back = exchange_from_line(exchange_to_line(ex));
  CHECK(back.prompt_digest == ex.prompt_digest);
  CHECK(back.prompt == ex.prompt);
  CHECK(back.response == ex.response);
  CHECK(back.temperature == ex.temperature);
  CHECK(back.usage == ex.usage);
  ex.usage.reset();
  CHECK_FALSE(exchange_from_line(exchange_to_line(ex)).usage.has_value());
  CHECK(exchange_to_line(ex).find('\n') == std::string::npos);
}

TEST_CASE("record then replay returns the same responses without the inner backend") {
  TempDir dir;
  const auto cassette = dir / "c.jsonl";
  int calls = 0;
  {
    RecordingBackend rec(std::make_unique<FunctionBackend>([&](const std::string& p) {
                           ++calls;
                           return "reply to " + p;
                         }),
                         cassette);
    CHECK(rec.complete("one").response == "reply to one");
    CHECK(rec.complete("two").response == "reply to two");
  }
  CHECK(calls == 2);
  ReplayBackend replay(cassette, "gpt-4o", 0.0);
  CHECK(replay.size() == 2);
  CHECK(replay.complete("two").response == "reply to two");
  CHECK(replay.complete("one").prompt_digest == prompt_digest("one", "gpt-4o", 0.0));
  CHECK(code_of([&] { replay.complete("three"); }) == Errc::CassetteMiss);

  // Same prompts under a different model are different keys.
  ReplayBackend other(cassette, "gpt-4", 0.0);
  CHECK(code_of([&] { other.complete("one"); }) == Errc::CassetteMiss);
}

TEST_CASE("replay setup errors") {
  TempDir dir;
  CHECK(code_of([&] { ReplayBackend(dir / "missing.jsonl", "gpt-4o", 0.0); }) == Errc::InvalidConfig);
  fsutil::write_file_atomic(dir / "bad.jsonl", "{\"prompt\": 1}\n");
  CHECK(code_of([&] { ReplayBackend(dir / "bad.jsonl", "gpt-4o", 0.0); }) == Errc::InvalidConfig);
}

TEST_CASE("shipped cassettes load") {
  for (const char* name : {"cassettes/auto.jsonl", "cassettes/hitl.jsonl", "cassettes/baseline.jsonl"}) {
    ReplayBackend r(fixture(name), "gpt-4o", 0.0);
    CHECK(r.size() > 0);
  }
}

TEST_CASE("backend config validation") {
  BackendConfig c;
  CHECK(code_of([&] { c.validate(); }) == Errc::InvalidConfig);  // replay without cassette
  c.cassette_path = "x.jsonl";
  CHECK_NOTHROW(c.validate());
  c.max_in_flight = 0;
  CHECK(code_of([&] { c.validate(); }) == Errc::InvalidConfig);
  c.max_in_flight = 1;
  c.kind = BackendKind::Live;
  CHECK(code_of([&] { c.validate(); }) == Errc::InvalidConfig);  // no endpoint
  c.endpoint = "https://example.invalid/v1/chat/completions";
  const char* saved = std::getenv(kApiKeyEnv);
  const std::string saved_value = saved ? saved : "";
  ::unsetenv(kApiKeyEnv);
  CHECK(code_of([&] { c.validate(); }) == Errc::InvalidConfig);
  ::setenv(kApiKeyEnv, "k", 1);
  CHECK_NOTHROW(c.validate());
  if (saved) ::setenv(kApiKeyEnv, saved_value.c_str(), 1); else ::unsetenv(kApiKeyEnv);
}

TEST_CASE("live backend against a local stub") {
  SUBCASE("success sends the bearer key and reads usage") {
    StubEndpoint stub;
    HttpChatBackend b(stub.config(), "secret");
    const Exchange ex = b.complete("hello");
    CHECK(ex.response == "echo:hello");
    CHECK(ex.usage == std::optional<Usage>(Usage{3, 4}));
    CHECK(stub.last_auth == "Bearer secret");
    CHECK(ex.prompt_digest == prompt_digest("hello", "gpt-4o", 0.0));
  }
  SUBCASE("5xx and 429 are retried") {
    StubEndpoint stub;
    stub.failures = 2;
    stub.fail_status = 503;
    HttpChatBackend b(stub.config(), "k");
    CHECK(b.complete("x").response == "echo:x");
    CHECK(stub.requests == 3);
  }
  SUBCASE("retries are bounded") {
    StubEndpoint stub;
    stub.failures = 100;
    stub.fail_status = 429;
    BackendConfig c = stub.config();
    c.max_retries = 2;
    HttpChatBackend b(c, "k");
    CHECK(code_of([&] { b.complete("x"); }) == Errc::RateLimited);
    CHECK(stub.requests == 3);
  }
  SUBCASE("401 fails at once") {
    StubEndpoint stub;
    stub.failures = 100;
    stub.fail_status = 401;
    HttpChatBackend b(stub.config(), "bad");
    CHECK(code_of([&] { b.complete("x"); }) == Errc::AuthError);
    CHECK(stub.requests == 1);
  }
  SUBCASE("other 4xx is a backend error") {
    StubEndpoint stub;
    stub.failures = 100;
    stub.fail_status = 400;
    HttpChatBackend b(stub.config(), "k");
    CHECK(code_of([&] { b.complete("x"); }) == Errc::BackendError);
  }
  SUBCASE("record through the live backend, then replay offline gives the same text") {
    TempDir dir;
    std::string live;
    {
      StubEndpoint stub;
      RecordingBackend rec(std::make_unique<HttpChatBackend>(stub.config(), "k"), dir / "c.jsonl");
      live = rec.complete("prompt").response;
    }
    ReplayBackend replay(dir / "c.jsonl", "gpt-4o", 0.0);
    CHECK(replay.complete("prompt").response == live);
  }
  SUBCASE("unreachable endpoint") {
    BackendConfig c;
    c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    c.max_retries = 0;
    c.timeout = std::chrono::milliseconds(500);
    HttpChatBackend b(c, "k");
    const Errc e = code_of([&] { b.complete("x"); });
    CHECK((e == Errc::BackendError || e == Errc::Timeout));
  }
  CHECK(code_of([] { HttpChatBackend(BackendConfig{}, "k"); }) == Errc::InvalidConfig);
}

TEST_CASE("gateway bounds requests in flight") {
  std::atomic<int> current{0};
  std::atomic<int> peak{0};
  Gateway gw(std::make_unique<FunctionBackend>([&](const std::string& p) {
               const int now = ++current;
               int seen = peak.load();
               while (now > seen && !peak.compare_exchange_weak(seen, now)) {
               }
               std::this_thread::sleep_for(std::chrono::milliseconds(5));
               --current;
               return p;
             }),
             2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&, i] { CHECK(gw.complete(std::to_string(i)).response == std::to_string(i)); });
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 2);
  CHECK(peak.load() >= 1);
}

TEST_CASE("gateway releases its slot when the backend throws") {
  Gateway gw(std::make_unique<FunctionBackend>([](const std::string& p) -> std::string {
               if (p == "bad") throw Error(Errc::BackendError, "boom");
               return p;
             }),
             1);
  CHECK(code_of([&] { gw.complete("bad"); }) == Errc::BackendError);
  CHECK(gw.complete("ok").response == "ok");
}
