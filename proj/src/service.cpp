#include "gforge/service.hpp"

#include <httplib.h>

#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include "gforge/error.hpp"
#include "gforge/serialization.hpp"

namespace gforge {

using nlohmann::json;

const std::vector<Route>& api_routes() {
  static const std::vector<Route> routes{
      {"GET", "/api/v1/routes", "this listing"},
      {"GET", "/api/v1/runs", "run ids with status and progress"},
      {"POST", "/api/v1/runs", "create a run from {run_id?, config | config_text} and start it"},
      {"GET", "/api/v1/runs/{run_id}", "full run record"},
      {"GET", "/api/v1/runs/{run_id}/status", "status summary; ?since=<seq>&wait=<ms> long-polls"},
      {"GET", "/api/v1/runs/{run_id}/iterations/{n}", "annotations, per-mode scores, gate, discrepancies"},
      {"GET", "/api/v1/runs/{run_id}/iterations/{n}/report", "moderation report and proposed revision"},
      {"GET", "/api/v1/runs/{run_id}/guidelines", "guideline lineage"},
      {"GET", "/api/v1/runs/{run_id}/guidelines/{version}", "one guideline version, rendered and structured"},
      {"GET", "/api/v1/runs/{run_id}/guidelines/{a}/diff/{b}", "section diff from a to b"},
      {"POST", "/api/v1/runs/{run_id}/review", "{iteration?, decision: approve|edit|reject, revision?}"},
  };
  return routes;
}

namespace {

int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownRun:
    case Errc::UnknownVersion:
      return 404;
    case Errc::NotAwaitingReview:
    case Errc::RunExists:
    case Errc::RunLocked:
      return 409;
    case Errc::InvalidArgument:
    case Errc::InvalidConfig:
    case Errc::UnknownSection:
    case Errc::DuplicateHeading:
    case Errc::EmptyRevision:
    case Errc::NoOpRevision:
    case Errc::MalformedLine:
    case Errc::UnknownCategory:
      return 400;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, json{{"error", code}, {"message", message}}, status);
}

json status_json(const RunRecord& r) {
  return json{{"run_id", r.run_id},
              {"status", run_status_name(r.status)},
              {"iterations", r.iterations.size()},
              {"total_batches", r.total_batches},
              {"cursor", r.cursor},
              {"error", r.error ? json(*r.error) : json(nullptr)},
              {"seq", r.seq}};
}

std::size_t parse_index(const std::string& s) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s[0] == '-') throw Error(Errc::InvalidArgument, "bad index \"" + s + "\"");
  return v;
}

}  // namespace

struct ApiServer::Impl {
  ApiSession session;
  RunStore store;
  httplib::Server server;
  int port = -1;
  std::thread listener;

  std::mutex drivers_mutex;
  std::vector<std::thread> drivers;

  std::mutex locks_mutex;
  std::map<std::string, std::shared_ptr<std::mutex>> run_locks;

  explicit Impl(ApiSession s) : session(std::move(s)), store(session.store_root) {}

  std::shared_ptr<std::mutex> run_mutex(const std::string& id) {
    std::lock_guard<std::mutex> g(locks_mutex);
    auto& m = run_locks[id];
    if (!m) m = std::make_shared<std::mutex>();
    return m;
  }

  Engine engine(int lock_timeout_ms) {
    Engine::Options opts;
    opts.backend_factory = session.backend_factory;
    opts.lock_timeout_ms = lock_timeout_ms;
    return Engine(store, opts);
  }

  // Drives a run on its own thread; failures are persisted by the engine.
  void drive(const std::string& id) {
    std::lock_guard<std::mutex> g(drivers_mutex);
    drivers.emplace_back([this, id] {
      try {
        engine(-1).resume(id);
      } catch (const std::exception&) {
      }
    });
  }

  template <class F>
  void guarded(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), errc_name(e.code()), e.detail());
    } catch (const json::exception& e) {
      send_error(res, 400, "InvalidArgument", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  }

  bool reject_if_read_only(httplib::Response& res) {
    if (!session.read_only) return false;
    send_error(res, 403, "ReadOnly", "this server is read-only");
    return true;
  }

  void install_routes();
};

void ApiServer::Impl::install_routes() {
  server.Get("/api/v1/routes", [](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& r : api_routes()) out.push_back(json{{"method", r.method}, {"path", r.path}, {"summary", r.summary}});
    send_json(res, out);
  });

  server.Get("/api/v1/runs", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json out = json::array();
      for (const auto& id : store.list()) out.push_back(status_json(store.load(id)));
      send_json(res, out);
    });
  });

  server.Post("/api/v1/runs", [this](const httplib::Request& req, httplib::Response& res) {
    if (reject_if_read_only(res)) return;
    guarded(res, [&] {
      const json body = json::parse(req.body);
      RunConfig config;
      if (body.contains("config_text")) {
        config = parse_run_config(body.at("config_text").get<std::string>(), session.config_base);
      } else if (body.contains("config")) {
        config = body.at("config").get<RunConfig>();
      } else {
        throw Error(Errc::InvalidArgument, "body needs config or config_text");
      }
      const std::string id = body.value("run_id", make_run_id());
      const RunRecord r = engine(5000).create(config, id);
      drive(id);
      send_json(res, status_json(r), 201);
    });
  });

  server.Get(R"(/api/v1/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, run_to_json(store.load(req.matches[1].str()))); });
  });

  server.Get(R"(/api/v1/runs/([^/]+)/status)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1].str();
      if (req.has_param("since")) {
        const auto since = static_cast<std::uint64_t>(parse_index(req.get_param_value("since")));
        const auto wait = std::chrono::milliseconds(
            req.has_param("wait") ? std::min<std::size_t>(parse_index(req.get_param_value("wait")), 60000) : 0);
        const auto deadline = std::chrono::steady_clock::now() + wait;
        while (store.seq(id) <= since && std::chrono::steady_clock::now() < deadline) {
          std::this_thread::sleep_for(std::chrono::milliseconds(25));
        }
      }
      send_json(res, status_json(store.load(id)));
    });
  });

  server.Get(R"(/api/v1/runs/([^/]+)/iterations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const RunRecord r = store.load(req.matches[1].str());
      const std::size_t n = parse_index(req.matches[2].str());
      if (n >= r.iterations.size()) return send_error(res, 404, "UnknownIteration", "no iteration " + req.matches[2].str());
      send_json(res, r.iterations[n]);
    });
  });

  server.Get(R"(/api/v1/runs/([^/]+)/iterations/([^/]+)/report)",
             [this](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 const RunRecord r = store.load(req.matches[1].str());
                 const std::size_t n = parse_index(req.matches[2].str());
                 if (n >= r.iterations.size() || !r.iterations[n].report) {
                   return send_error(res, 404, "UnknownReport", "iteration " + req.matches[2].str() + " has no report");
                 }
                 send_json(res, *r.iterations[n].report);
               });
             });

  server.Get(R"(/api/v1/runs/([^/]+)/guidelines)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1].str();
      if (!store.exists(id)) throw Error(Errc::UnknownRun, "no run \"" + id + "\"");
      json out = json::array();
      for (const auto& e : store.versions(id).lineage()) {
        out.push_back(json{{"version_id", e.version_id},
                           {"parent_version", e.parent_version ? json(*e.parent_version) : json(nullptr)}});
      }
      send_json(res, out);
    });
  });

  server.Get(R"(/api/v1/runs/([^/]+)/guidelines/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1].str();
      if (!store.exists(id)) throw Error(Errc::UnknownRun, "no run \"" + id + "\"");
      const VersionStore versions = store.versions(id);
      const GuidelineDoc doc = versions.get(req.matches[2].str());
      json out = guideline_to_json(doc);
      out["text"] = render(doc);
      const auto rev = versions.revision_of(doc.version_id());
      out["revision"] = rev ? json(*rev) : json(nullptr);
      send_json(res, out);
    });
  });

  server.Get(R"(/api/v1/runs/([^/]+)/guidelines/([^/]+)/diff/([^/]+))",
             [this](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 const std::string id = req.matches[1].str();
                 if (!store.exists(id)) throw Error(Errc::UnknownRun, "no run \"" + id + "\"");
                 const VersionStore versions = store.versions(id);
                 const auto entries = diff(versions.get(req.matches[2].str()), versions.get(req.matches[3].str()));
                 send_json(res, json{{"from", req.matches[2].str()},
                                     {"to", req.matches[3].str()},
                                     {"entries", entries},
                                     {"text", render_diff(entries)}});
               });
             });

  server.Post(R"(/api/v1/runs/([^/]+)/review)", [this](const httplib::Request& req, httplib::Response& res) {
    if (reject_if_read_only(res)) return;
    guarded(res, [&] {
      const std::string id = req.matches[1].str();
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        return send_error(res, 400, "InvalidArgument", std::string("review body is not JSON: ") + e.what());
      }
      ReviewDecision decision;
      try {
        decision = body.get<ReviewDecision>();
      } catch (const std::exception& e) {
        return send_error(res, 400, "InvalidArgument", std::string("malformed review: ") + e.what());
      }
      if (decision.kind == ReviewKind::Edit && !decision.revision) {
        return send_error(res, 400, "InvalidArgument", "an edit decision needs a revision");
      }

      const auto lock = run_mutex(id);
      std::lock_guard<std::mutex> guard(*lock);
      const RunRecord before = store.load(id);
      std::optional<std::size_t> target;
      if (body.contains("iteration") && !body.at("iteration").is_null()) target = body.at("iteration").get<std::size_t>();
      if (target && *target < before.iterations.size() && before.iterations[*target].review) {
        // Duplicate submission: report what was decided the first time.
        const auto& it = before.iterations[*target];
        return send_json(res, json{{"run_id", id},
                                   {"iteration", *target},
                                   {"duplicate", true},
                                   {"review", *it.review},
                                   {"next_guideline_version", it.next_guideline_version ? json(*it.next_guideline_version)
                                                                                        : json(nullptr)},
                                   {"status", run_status_name(before.status)}});
      }
      if (before.status != RunStatus::AwaitingReview) {
        throw Error(Errc::NotAwaitingReview,
                    "run " + id + " is " + std::string(run_status_name(before.status)) + ", not AwaitingReview");
      }
      const std::size_t current = before.iterations.size() - 1;
      if (target && *target != current) {
        throw Error(Errc::NotAwaitingReview, "iteration " + std::to_string(*target) + " is not awaiting review");
      }
      const RunRecord after = engine(5000).apply_review(id, decision);
      const auto& it = after.iterations[current];
      drive(id);
      send_json(res, json{{"run_id", id},
                          {"iteration", current},
                          {"duplicate", false},
                          {"review", *it.review},
                          {"next_guideline_version", *it.next_guideline_version},
                          {"status", run_status_name(after.status)}});
    });
  });

  if (session.static_dir) server.set_mount_point("/", session.static_dir->string());
}

ApiServer::ApiServer(ApiSession session) : impl_(std::make_unique<Impl>(std::move(session))) { impl_->install_routes(); }

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  if (impl_->port >= 0) return impl_->port;
  const auto& s = impl_->session;
  if (s.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(s.host);
  } else {
    impl_->port = impl_->server.bind_to_port(s.host, s.port) ? s.port : -1;
  }
  if (impl_->port < 0) throw Error(Errc::Io, "cannot bind " + s.host + ":" + std::to_string(s.port));
  return impl_->port;
}

void ApiServer::listen() {
  bind();
  impl_->server.listen_after_bind();
}

int ApiServer::start() {
  const int port = bind();
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  std::vector<std::thread> drivers;
  {
    std::lock_guard<std::mutex> g(impl_->drivers_mutex);
    drivers.swap(impl_->drivers);
  }
  for (auto& t : drivers) t.join();
}

void serve(const ApiSession& session) {
  ApiServer server(session);
  server.listen();
}

}  // namespace gforge
