#include "gforge/llm_gateway.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <random>
#include <sstream>
#include <thread>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/hash.hpp"

namespace gforge {

using nlohmann::json;

std::string_view backend_kind_name(BackendKind k) noexcept {
  switch (k) {
    case BackendKind::Live: return "live";
    case BackendKind::Replay: return "replay";
    case BackendKind::Record: return "record";
  }
  return "replay";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) noexcept {
  for (const auto k : {BackendKind::Live, BackendKind::Replay, BackendKind::Record}) {
    if (backend_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

namespace {

std::string api_key_from_env() {
  const char* key = std::getenv(kApiKeyEnv);
  return key == nullptr ? std::string() : std::string(key);
}

}  // namespace

void BackendConfig::validate() const {
  if (model.empty()) throw Error(Errc::InvalidConfig, "backend model is empty");
  if (max_in_flight == 0) throw Error(Errc::InvalidConfig, "max_in_flight must be at least 1");
  if (kind == BackendKind::Replay) {
    if (cassette_path.empty()) throw Error(Errc::InvalidConfig, "replay backend requires a cassette path");
    return;
  }
  if (endpoint.empty()) throw Error(Errc::InvalidConfig, "live backend requires an endpoint URL");
  if (api_key_from_env().empty()) {
    throw Error(Errc::InvalidConfig, std::string("live backend requires the ") + kApiKeyEnv + " environment variable");
  }
  if (kind == BackendKind::Record && cassette_path.empty()) {
    throw Error(Errc::InvalidConfig, "record backend requires a cassette path");
  }
}

std::string prompt_digest(std::string_view prompt, std::string_view model, double temperature) {
  const json key = {{"model", model}, {"params", {{"temperature", temperature}}}, {"prompt", prompt}};
  return sha256_hex(key.dump());
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string exchange_to_line(const Exchange& ex) {
  json j = {{"prompt_digest", ex.prompt_digest}, {"model", ex.model},       {"temperature", ex.temperature},
            {"timestamp", ex.timestamp},         {"prompt", ex.prompt},     {"response", ex.response}};
  if (ex.usage) {
    j["usage"] = {{"prompt_tokens", ex.usage->prompt_tokens}, {"completion_tokens", ex.usage->completion_tokens}};
  } else {
    j["usage"] = nullptr;
  }
  return j.dump();
}

Exchange exchange_from_line(std::string_view line) {
  const json j = json::parse(line);
  Exchange ex;
  ex.prompt_digest = j.at("prompt_digest").get<std::string>();
  ex.model = j.at("model").get<std::string>();
  ex.temperature = j.value("temperature", 0.0);
  ex.timestamp = j.value("timestamp", std::string());
  ex.prompt = j.at("prompt").get<std::string>();
  ex.response = j.at("response").get<std::string>();
  if (j.contains("usage") && j["usage"].is_object()) {
    ex.usage = Usage{j["usage"].value("prompt_tokens", std::size_t{0}), j["usage"].value("completion_tokens", std::size_t{0})};
  }
  return ex;
}

HttpChatBackend::HttpChatBackend(BackendConfig config, std::string api_key)
    : config_(std::move(config)), api_key_(std::move(api_key)) {
  const std::string& url = config_.endpoint;
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::InvalidConfig, "endpoint is not a URL: " + url);
  const std::size_t path_start = url.find('/', scheme_end + 3);
  base_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

Exchange HttpChatBackend::complete(const std::string& prompt) {
  const json request = {{"model", config_.model},
                        {"temperature", config_.temperature},
                        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  const std::string body = request.dump();

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  Errc last_code = Errc::BackendError;
  std::string last_message;
  for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::uniform_real_distribution<double> jitter(0.5, 1.5);
      const double ms = static_cast<double>(config_.backoff_base.count()) * std::pow(2.0, attempt - 1) * jitter(jitter_rng);
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(ms)));
    }
    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    const auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last_code = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) ? Errc::Timeout
                                                                                              : Errc::BackendError;
      last_message = "request to " + config_.endpoint + " failed: " + httplib::to_string(err);
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw Error(Errc::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status == 429) {
      last_code = Errc::RateLimited;
      last_message = "rate limited after " + std::to_string(attempt + 1) + " attempts";
      continue;
    }
    if (res->status == 408 || res->status >= 500) {
      last_code = res->status == 408 ? Errc::Timeout : Errc::BackendError;
      last_message = "HTTP " + std::to_string(res->status) + " from " + config_.endpoint;
      continue;
    }
    if (res->status != 200) {
      throw Error(Errc::BackendError, "HTTP " + std::to_string(res->status) + " from " + config_.endpoint);
    }
    Exchange ex;
    try {
      const json reply = json::parse(res->body);
      ex.response = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      if (reply.contains("usage") && reply["usage"].is_object()) {
        ex.usage = Usage{reply["usage"].value("prompt_tokens", std::size_t{0}),
                         reply["usage"].value("completion_tokens", std::size_t{0})};
      }
    } catch (const json::exception& e) {
      throw Error(Errc::BackendError, std::string("malformed chat completion: ") + e.what());
    }
    ex.prompt = prompt;
    ex.model = config_.model;
    ex.temperature = config_.temperature;
    ex.prompt_digest = prompt_digest(prompt, config_.model, config_.temperature);
    ex.timestamp = utc_timestamp();
    return ex;
  }
  throw Error(last_code, last_message);
}

ReplayBackend::ReplayBackend(const std::filesystem::path& cassette, std::string model, double temperature)
    : model_(std::move(model)), temperature_(temperature) {
  if (!std::filesystem::exists(cassette)) {
    throw Error(Errc::InvalidConfig, "cassette " + cassette.string() + " does not exist");
  }
  std::istringstream in(fsutil::read_file(cassette));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Exchange ex = exchange_from_line(line);
      by_digest_.try_emplace(ex.prompt_digest, std::move(ex));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidConfig,
                  cassette.string() + ":" + std::to_string(line_no) + ": bad cassette record: " + e.what());
    }
  }
}

Exchange ReplayBackend::complete(const std::string& prompt) {
  const std::string digest = prompt_digest(prompt, model_, temperature_);
  const auto it = by_digest_.find(digest);
  if (it == by_digest_.end()) throw Error(Errc::CassetteMiss, "no recorded response for prompt digest " + digest);
  return it->second;
}

RecordingBackend::RecordingBackend(std::unique_ptr<ChatBackend> inner, std::filesystem::path cassette)
    : inner_(std::move(inner)), cassette_(std::move(cassette)) {}

Exchange RecordingBackend::complete(const std::string& prompt) {
  Exchange ex = inner_->complete(prompt);
  const std::lock_guard lock(append_mutex_);
  fsutil::append_line(cassette_, exchange_to_line(ex));
  return ex;
}

FunctionBackend::FunctionBackend(Responder responder, std::string model, double temperature)
    : responder_(std::move(responder)), model_(std::move(model)), temperature_(temperature) {}

Exchange FunctionBackend::complete(const std::string& prompt) {
  Exchange ex;
  ex.prompt = prompt;
  ex.response = responder_(prompt);
  ex.model = model_;
  ex.temperature = temperature_;
  ex.prompt_digest = prompt_digest(prompt, model_, temperature_);
  ex.timestamp = utc_timestamp();
  return ex;
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  config.validate();
  switch (config.kind) {
    case BackendKind::Replay:
      return std::make_unique<ReplayBackend>(config.cassette_path, config.model, config.temperature);
    case BackendKind::Live: return std::make_unique<HttpChatBackend>(config, api_key_from_env());
    case BackendKind::Record:
      return std::make_unique<RecordingBackend>(std::make_unique<HttpChatBackend>(config, api_key_from_env()),
                                                config.cassette_path);
  }
  throw Error(Errc::InvalidConfig, "unknown backend kind");
}

Gateway::Gateway(const BackendConfig& config) : Gateway(make_backend(config), config.max_in_flight) {}

Gateway::Gateway(std::unique_ptr<ChatBackend> backend, std::size_t max_in_flight)
    : backend_(std::move(backend)), max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {}

Exchange Gateway::complete(const std::string& prompt) {
  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
  }
  struct Release {
    Gateway* g;
    ~Release() {
      {
        const std::lock_guard lock(g->mutex_);
        --g->in_flight_;
      }
      g->slot_free_.notify_one();
    }
  } release{this};
  return backend_->complete(prompt);
}

std::string complete(const std::string& prompt, const BackendConfig& config) {
  return make_backend(config)->complete(prompt).response;
}

}  // namespace gforge
