#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace gforge {

inline constexpr const char* kApiKeyEnv = "GFORGE_API_KEY";

enum class BackendKind { Live, Replay, Record };
std::string_view backend_kind_name(BackendKind k) noexcept;
std::optional<BackendKind> parse_backend_kind(std::string_view name) noexcept;

struct BackendConfig {
  BackendKind kind = BackendKind::Replay;
  // Full URL of an OpenAI-compatible chat-completions endpoint.
  std::string endpoint;
  std::string model = "gpt-4o";
  double temperature = 0.0;
  std::size_t max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds backoff_base{500};
  std::filesystem::path cassette_path;
  std::size_t max_in_flight = 4;

  // Replay needs a cassette; live and record need an endpoint and the
  // GFORGE_API_KEY credential. Throws InvalidConfig.
  void validate() const;
};

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  friend bool operator==(const Usage&, const Usage&) = default;
};

struct Exchange {
  std::string prompt_digest;
  std::string prompt;
  std::string response;
  std::string model;
  double temperature = 0.0;
  std::string timestamp;  // ISO-8601 UTC
  std::optional<Usage> usage;
};

// SHA-256 over (model, temperature, prompt); the cassette key.
std::string prompt_digest(std::string_view prompt, std::string_view model, double temperature);

// Cassette line codec (one JSON object per line).
std::string exchange_to_line(const Exchange& ex);
Exchange exchange_from_line(std::string_view line);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Must be safe to call from several threads.
  virtual Exchange complete(const std::string& prompt) = 0;
};

// Live OpenAI-compatible endpoint with bounded exponential backoff (with
// jitter) on 429, 5xx and transport failures. Throws AuthError, RateLimited,
// Timeout or BackendError.
class HttpChatBackend final : public ChatBackend {
 public:
  HttpChatBackend(BackendConfig config, std::string api_key);
  Exchange complete(const std::string& prompt) override;

 private:
  BackendConfig config_;
  std::string api_key_;
  std::string base_;  // scheme://host:port
  std::string path_;
};

// Serves responses from a cassette by prompt digest. Never touches the
// network; a miss throws CassetteMiss naming the digest.
class ReplayBackend final : public ChatBackend {
 public:
  ReplayBackend(const std::filesystem::path& cassette, std::string model, double temperature);
  Exchange complete(const std::string& prompt) override;
  std::size_t size() const noexcept { return by_digest_.size(); }

 private:
  std::string model_;
  double temperature_;
  std::unordered_map<std::string, Exchange> by_digest_;
};

// Forwards to another backend and appends each exchange to a cassette.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(std::unique_ptr<ChatBackend> inner, std::filesystem::path cassette);
  Exchange complete(const std::string& prompt) override;

 private:
  std::unique_ptr<ChatBackend> inner_;
  std::filesystem::path cassette_;
  std::mutex append_mutex_;
};

// Calls a function; used for scripted runs and host-language callbacks.
class FunctionBackend final : public ChatBackend {
 public:
  using Responder = std::function<std::string(const std::string& prompt)>;
  FunctionBackend(Responder responder, std::string model = "gpt-4o", double temperature = 0.0);
  Exchange complete(const std::string& prompt) override;

 private:
  Responder responder_;
  std::string model_;
  double temperature_;
};

// Entry point every other module uses for model calls; bounds the number of
// requests in flight.
class Gateway {
 public:
  explicit Gateway(const BackendConfig& config);
  Gateway(std::unique_ptr<ChatBackend> backend, std::size_t max_in_flight);

  Exchange complete(const std::string& prompt);

 private:
  std::unique_ptr<ChatBackend> backend_;
  std::size_t max_in_flight_;
  std::size_t in_flight_ = 0;
  std::mutex mutex_;
  std::condition_variable slot_free_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config);

// One-shot convenience: builds a backend for config and returns the reply.
std::string complete(const std::string& prompt, const BackendConfig& config);

std::string utc_timestamp();

}  // namespace gforge
