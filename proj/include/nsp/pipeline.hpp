#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsp/backtest.hpp"
#include "nsp/io_util.hpp"
#include "nsp/panel.hpp"
#include "nsp/sentiment.hpp"
#include "nsp/signal_builder.hpp"

namespace nsp::pipeline {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

struct CliOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> similarity_threshold;
  std::optional<std::string> dedup_day;
  int jobs = 0;
};

// Parsed and validated run configuration. config_hash covers everything that
// shapes artifact content; output_dir and jobs deliberately do not.
struct RunConfig {
  std::filesystem::path returns_path;
  FileFormat returns_format = FileFormat::Csv;
  std::filesystem::path headlines_path;
  FileFormat headlines_format = FileFormat::Csv;
  std::filesystem::path calendar_path;

  std::string backend;  // mock | replay | http
  std::string model_id;
  std::optional<std::filesystem::path> lexicon_path;
  std::optional<std::filesystem::path> recorded_responses_path;
  std::optional<std::filesystem::path> cache_path;  // absent: in-memory cache
  scorer::Term term = scorer::Term::Short;
  bool strict_parse = false;
  std::string endpoint_url;
  std::string api_key_env;  // secrets come from the environment, never the file
  double requests_per_second = 1.0;
  int max_retries = 5;

  double similarity_threshold = 0.6;
  std::string dedup_day = "effective";  // effective | calendar
  signal::TimingOptions timing;
  std::string return_convention = "close_to_close";  // metadata; see README

  std::vector<panel::RegressionSpec> regressions;
  backtest::BacktestOptions backtest_options;

  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 0;

  std::string config_hash;  // sha256 of the canonical config JSON
};

RunConfig load_run_config(const std::filesystem::path& config_path,
                          const CliOverrides& overrides = {});

// Filters returns to the share-code/exchange universe and headlines through
// the relevance/category/novelty/dedup chain.
void cmd_ingest(const RunConfig& config);
// Scores every filtered headline through the configured backend and cache.
void cmd_score(const RunConfig& config);
// Aggregates scores to firm-day signals and joins them with returns.
void cmd_signal(const RunConfig& config);
// Runs every configured regression on the panel.
void cmd_regress(const RunConfig& config);
// Forms long-short portfolios for the full panel and both size halves.
void cmd_backtest(const RunConfig& config);
// Renders the text report and finalizes the manifest.
void cmd_report(const RunConfig& config);

// All six stages in order.
void cmd_run(const RunConfig& config);

std::filesystem::path artifact_path(const RunConfig& config, std::string_view name);

}  // namespace nsp::pipeline
