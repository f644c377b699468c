#include "gforge/run_config.hpp"

#include <charconv>
#include <cmath>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"

namespace gforge {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  throw Error(Errc::InvalidConfig, std::string(key) + " = " + std::string(value) + ": " + std::string(why));
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad(key, v, "expected a non-negative integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    bad(key, v, "expected a number");
  }
  if (used != s.size() || !std::isfinite(out)) bad(key, v, "expected a number");
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view v) {
  std::filesystem::path p{std::string(v)};
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

template <class T, class Parse>
T enum_value(std::string_view key, std::string_view v, Parse parse, std::string_view choices) {
  const auto parsed = parse(v);
  if (!parsed) bad(key, v, "expected one of " + std::string(choices));
  return *parsed;
}

}  // namespace

std::string_view review_mode_name(ReviewMode m) noexcept { return m == ReviewMode::Auto ? "auto" : "hitl"; }

std::optional<ReviewMode> parse_review_mode(std::string_view name) noexcept {
  if (name == "auto") return ReviewMode::Auto;
  if (name == "hitl") return ReviewMode::Hitl;
  return std::nullopt;
}

std::string_view prompt_mode_name(PromptMode m) noexcept {
  return m == PromptMode::Guideline ? "guideline" : "baseline";
}

std::optional<PromptMode> parse_prompt_mode(std::string_view name) noexcept {
  if (name == "guideline") return PromptMode::Guideline;
  if (name == "baseline") return PromptMode::Baseline;
  return std::nullopt;
}

void RunConfig::validate() const {
  if (!(gate_threshold > 0.0 && gate_threshold <= 1.0)) {
    throw Error(Errc::InvalidConfig, "threshold must lie in (0, 1]");
  }
  if (batch_size < 1) throw Error(Errc::InvalidConfig, "batch_size must be at least 1");
  if (max_iterations_per_batch < 1) throw Error(Errc::InvalidConfig, "max_iterations must be at least 1");
  if (corpus_paths.empty()) throw Error(Errc::InvalidConfig, "no corpus file given");
  if (prompt_mode == PromptMode::Guideline && guideline_path.empty()) {
    throw Error(Errc::InvalidConfig, "guideline mode needs a guideline file");
  }
  if (max_batches && *max_batches == 0) throw Error(Errc::InvalidConfig, "max_batches must be at least 1");
  if (backend.max_in_flight < 1) throw Error(Errc::InvalidConfig, "max_in_flight must be at least 1");
}

void apply_config_setting(RunConfig& c, std::string_view key, std::string_view value,
                          const std::filesystem::path& base_dir) {
  const std::string_view v = trim(value);
  if (key == "batch_size") {
    c.batch_size = to_u64(key, v);
  } else if (key == "threshold" || key == "gate_threshold") {
    c.gate_threshold = to_double(key, v);
  } else if (key == "gate_mode") {
    c.gate_mode = enum_value<MatchMode>(key, v, parse_mode, "strict, strict-nocat, soft, soft-nocat");
  } else if (key == "gate_aggregation") {
    c.gate_aggregation = enum_value<GateAggregation>(key, v, parse_aggregation, "macro, micro");
  } else if (key == "max_iterations" || key == "max_iterations_per_batch") {
    c.max_iterations_per_batch = to_u64(key, v);
  } else if (key == "review") {
    c.review_mode = enum_value<ReviewMode>(key, v, parse_review_mode, "auto, hitl");
  } else if (key == "mode") {
    c.prompt_mode = enum_value<PromptMode>(key, v, parse_prompt_mode, "guideline, baseline");
  } else if (key == "seed") {
    c.seed = to_u64(key, v);
  } else if (key == "corpus") {
    c.corpus_paths.push_back(resolve(base_dir, v));
  } else if (key == "guideline") {
    c.guideline_path = resolve(base_dir, v);
  } else if (key == "templates") {
    c.template_dir = resolve(base_dir, v);
  } else if (key == "context_window") {
    c.context_window = to_u64(key, v);
  } else if (key == "max_batches") {
    c.max_batches = to_u64(key, v);
  } else if (key == "backend") {
    c.backend.kind = enum_value<BackendKind>(key, v, parse_backend_kind, "live, replay, record");
  } else if (key == "endpoint") {
    c.backend.endpoint = std::string(v);
  } else if (key == "model") {
    c.backend.model = std::string(v);
  } else if (key == "temperature") {
    c.backend.temperature = to_double(key, v);
  } else if (key == "max_retries") {
    c.backend.max_retries = to_u64(key, v);
  } else if (key == "timeout_ms") {
    c.backend.timeout = std::chrono::milliseconds(to_u64(key, v));
  } else if (key == "backoff_ms") {
    c.backend.backoff_base = std::chrono::milliseconds(to_u64(key, v));
  } else if (key == "cassette") {
    c.backend.cassette_path = resolve(base_dir, v);
  } else if (key == "max_in_flight") {
    c.backend.max_in_flight = to_u64(key, v);
  } else if (key == "api_key" || key == "key" || key == "token") {
    throw Error(Errc::InvalidConfig, "credentials are read from the GFORGE_API_KEY environment variable only");
  } else {
    throw Error(Errc::InvalidConfig, "unknown setting \"" + std::string(key) + "\"");
  }
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig c;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_config_setting(c, trim(line.substr(0, eq)), line.substr(eq + 1), base_dir);
    } catch (const Error& e) {
      throw Error(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto base = std::filesystem::absolute(path).parent_path();
  return parse_run_config(fsutil::read_file(path), base);
}

std::string render_run_config(const RunConfig& c) {
  std::string out;
  auto line = [&out](std::string_view k, const std::string& v) {
    out.append(k).append(" = ").append(v).append(1, '\n');
  };
  char buf[64];
  auto num = [&buf](double d) {
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return std::string(buf);
  };
  line("mode", std::string(prompt_mode_name(c.prompt_mode)));
  line("review", std::string(review_mode_name(c.review_mode)));
  line("batch_size", std::to_string(c.batch_size));
  line("threshold", num(c.gate_threshold));
  line("gate_mode", std::string(mode_name(c.gate_mode)));
  line("gate_aggregation", std::string(aggregation_name(c.gate_aggregation)));
  line("max_iterations", std::to_string(c.max_iterations_per_batch));
  line("seed", std::to_string(c.seed));
  for (const auto& p : c.corpus_paths) line("corpus", p.string());
  if (!c.guideline_path.empty()) line("guideline", c.guideline_path.string());
  if (c.template_dir) line("templates", c.template_dir->string());
  line("context_window", std::to_string(c.context_window));
  if (c.max_batches) line("max_batches", std::to_string(*c.max_batches));
  line("backend", std::string(backend_kind_name(c.backend.kind)));
  if (!c.backend.endpoint.empty()) line("endpoint", c.backend.endpoint);
  line("model", c.backend.model);
  line("temperature", num(c.backend.temperature));
  line("max_retries", std::to_string(c.backend.max_retries));
  line("timeout_ms", std::to_string(c.backend.timeout.count()));
  line("backoff_ms", std::to_string(c.backend.backoff_base.count()));
  if (!c.backend.cassette_path.empty()) line("cassette", c.backend.cassette_path.string());
  line("max_in_flight", std::to_string(c.backend.max_in_flight));
  return out;
}

}  // namespace gforge
