#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gforge/moderation.hpp"

namespace gforge {

// No authentication: keep the default loopback bind unless the network is
// trusted.
struct ApiSession {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  std::filesystem::path store_root = "runs";
  bool read_only = false;
  std::optional<std::filesystem::path> static_dir;  // console assets served at /
  Engine::BackendFactory backend_factory;           // tests inject scripted backends
  // Relative paths in configs posted over HTTP resolve against this.
  std::filesystem::path config_base = std::filesystem::current_path();
};

struct Route {
  std::string method;
  std::string path;
  std::string summary;
};

// Every endpoint under /api/v1/, in documentation order.
const std::vector<Route>& api_routes();

// State lives only in the run store; restarting the server loses nothing.
class ApiServer {
 public:
  explicit ApiServer(ApiSession session);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds and returns the port. Throws Io when the address is unavailable.
  int bind();
  // Serves until stop(); bind() first.
  void listen();
  // bind + listen on a background thread.
  int start();
  // Stops the listener and waits for background run drivers.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Blocking bind + listen.
void serve(const ApiSession& session);

}  // namespace gforge
