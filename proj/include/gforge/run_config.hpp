#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gforge/llm_gateway.hpp"
#include "gforge/metrics.hpp"

namespace gforge {

enum class ReviewMode { Auto, Hitl };
std::string_view review_mode_name(ReviewMode m) noexcept;
std::optional<ReviewMode> parse_review_mode(std::string_view name) noexcept;

// Guideline: the guideline is embedded in annotator prompts and the
// moderation loop runs. Baseline: no guideline and no moderation.
enum class PromptMode { Guideline, Baseline };
std::string_view prompt_mode_name(PromptMode m) noexcept;
std::optional<PromptMode> parse_prompt_mode(std::string_view name) noexcept;

struct RunConfig {
  std::size_t batch_size = 5;
  double gate_threshold = 0.8;
  MatchMode gate_mode = kStrict;
  GateAggregation gate_aggregation = GateAggregation::Macro;
  std::size_t max_iterations_per_batch = 3;
  ReviewMode review_mode = ReviewMode::Auto;
  PromptMode prompt_mode = PromptMode::Guideline;
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> corpus_paths;
  std::filesystem::path guideline_path;
  std::optional<std::filesystem::path> template_dir;
  std::size_t context_window = 120;
  std::optional<std::size_t> max_batches;
  BackendConfig backend;

  // Throws InvalidConfig.
  void validate() const;
};

// Plain "key = value" lines; '#' starts a comment; `corpus` may repeat.
// Relative paths resolve against base_dir. Throws InvalidConfig.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
// Applies one key/value pair (also used for command-line overrides).
void apply_config_setting(RunConfig& config, std::string_view key, std::string_view value,
                          const std::filesystem::path& base_dir);
std::string render_run_config(const RunConfig& config);

}  // namespace gforge
