#include "nsp/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "nsp/common.hpp"
#include "nsp/market_data.hpp"
#include "nsp/news_ingest.hpp"
#include "nsp/report.hpp"

namespace nsp::pipeline {

namespace {

using nlohmann::json;

json parse_json_file(const std::filesystem::path& path, const char* what) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{} {}: {}", what, path.string(), e.what()));
  }
}

const json* find_key(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return nullptr;
  return &obj.at(key);
}

std::string require_string(const json& obj, const char* key, const char* context) {
  const json* v = find_key(obj, key);
  if (v == nullptr || !v->is_string()) {
    throw ValidationError(fmt::format("config: {}.{} missing or not a string", context, key));
  }
  return v->get<std::string>();
}

// ---------------------------------------------------------------------------
// Configuration

panel::RegressionSpec parse_regression_spec(const json& j, std::size_t index) {
  panel::RegressionSpec spec;
  spec.name = require_string(j, "name", "regressions[]");
  const json* regs = find_key(j, "regressors");
  if (regs == nullptr || !regs->is_array() || regs->empty()) {
    throw ValidationError(
        fmt::format("config: regressions[{}].regressors must be a non-empty array", index));
  }
  for (const json& r : *regs) spec.regressors.push_back(r.get<std::string>());
  if (const json* fe = find_key(j, "fixed_effects")) {
    for (const json& d : *fe) spec.fixed_effects.push_back(panel::parse_dim(d.get<std::string>()));
  }
  if (const json* cl = find_key(j, "cluster")) {
    for (const json& d : *cl) spec.cluster_dims.push_back(panel::parse_dim(d.get<std::string>()));
  }
  std::string sample = j.value("sample", "all");
  if (sample == "small") {
    spec.sample_filter = market::SizeClass::Small;
  } else if (sample == "non_small") {
    spec.sample_filter = market::SizeClass::NonSmall;
  } else if (sample != "all") {
    throw ValidationError(fmt::format(
        "config: regressions[{}].sample '{}' must be all, small, or non_small", index, sample));
  }
  return spec;
}

std::vector<panel::RegressionSpec> default_regressions() {
  using Dim = panel::Dim;
  std::vector<panel::RegressionSpec> specs(4);
  specs[0].name = "full_chatgpt";
  specs[0].regressors = {"chatgpt_score"};
  specs[1].name = "full_both";
  specs[1].regressors = {"chatgpt_score", "vendor_score"};
  specs[2].name = "small_chatgpt";
  specs[2].regressors = {"chatgpt_score"};
  specs[2].sample_filter = market::SizeClass::Small;
  specs[3].name = "non_small_chatgpt";
  specs[3].regressors = {"chatgpt_score"};
  specs[3].sample_filter = market::SizeClass::NonSmall;
  for (auto& spec : specs) {
    spec.fixed_effects = {Dim::Firm, Dim::Date};
    spec.cluster_dims = {Dim::Firm, Dim::Date};
  }
  return specs;
}

void require_exists(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError(fmt::format("config: {} {} does not exist", what, path.string()));
  }
}

// ---------------------------------------------------------------------------
// Artifacts and manifest

constexpr const char* kManifestName = "manifest.json";

std::string now_iso_utc() {
  auto now = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  return format_timestamp(Timestamp{now, 0});
}

json fresh_manifest(const RunConfig& config) {
  json m;
  m["config_hash"] = config.config_hash;
  m["artifact_version"] = std::string(kArtifactVersion);
  m["prompt_template_version"] = std::string(scorer::kPromptTemplateVersion);
  m["inputs"] = json::object();
  m["artifacts"] = json::object();
  m["counters"] = json::object();
  return m;
}

// A manifest written under a different configuration never validates
// artifacts for this one, so it is discarded wholesale.
json load_manifest(const RunConfig& config) {
  std::filesystem::path path = artifact_path(config, kManifestName);
  if (!std::filesystem::exists(path)) return fresh_manifest(config);
  json m = parse_json_file(path, "manifest");
  if (m.value("config_hash", "") != config.config_hash) return fresh_manifest(config);
  return m;
}

void store_manifest(const RunConfig& config, json& manifest) {
  manifest["generated_at"] = now_iso_utc();
  write_file(artifact_path(config, kManifestName), manifest.dump(2) + "\n");
}

void record_input(json& manifest, const char* name, const std::filesystem::path& path) {
  manifest["inputs"][name] = {{"path", path.string()}, {"sha256", sha256_file_hex(path)}};
}

void record_artifact(json& manifest, const RunConfig& config, const std::string& name) {
  manifest["artifacts"][name] = {
      {"sha256", sha256_file_hex(artifact_path(config, name))}};
}

void require_artifact(const json& manifest, const RunConfig& config, const std::string& name,
                      const char* prior_command) {
  std::filesystem::path path = artifact_path(config, name);
  if (!std::filesystem::exists(path)) {
    throw DependencyError(
        fmt::format("{} is missing; run `newspanel {}` first", name, prior_command));
  }
  const json* artifacts = find_key(manifest, "artifacts");
  const json* entry = artifacts != nullptr ? find_key(*artifacts, name.c_str()) : nullptr;
  if (entry == nullptr) {
    throw DependencyError(fmt::format("{} is not recorded in the manifest; run `newspanel {}` first",
                                      name, prior_command));
  }
  if (entry->value("sha256", "") != sha256_file_hex(path)) {
    throw DependencyError(fmt::format(
        "{} does not match the digest in the manifest; rerun `newspanel {}`", name,
        prior_command));
  }
}

std::string hash_comment(const RunConfig& config) {
  return fmt::format("# config_hash: {}\n", config.config_hash);
}

// Every artifact opens with its config hash: '# config_hash: <hex>' for
// CSV/text, a {"config_hash": ...} first line for JSONL, a top-level key for
// JSON. Readers verify it so artifacts from another configuration are
// rejected as stale.
std::string strip_text_header(const std::string& content, const RunConfig& config,
                              const std::string& name, const char* prior_command) {
  std::string expected = hash_comment(config);
  if (content.rfind(expected, 0) != 0) {
    throw DependencyError(fmt::format(
        "{} carries a different config hash; rerun `newspanel {}`", name, prior_command));
  }
  return content.substr(expected.size());
}

std::string strip_jsonl_header(const std::string& content, const RunConfig& config,
                               const std::string& name, const char* prior_command) {
  std::size_t eol = content.find('\n');
  std::string first = eol == std::string::npos ? content : content.substr(0, eol);
  json header;
  try {
    header = json::parse(first);
  } catch (const json::exception&) {
    header = json::object();
  }
  if (header.value("config_hash", "") != config.config_hash) {
    throw DependencyError(fmt::format(
        "{} carries a different config hash; rerun `newspanel {}`", name, prior_command));
  }
  return eol == std::string::npos ? std::string() : content.substr(eol + 1);
}

void write_csv_artifact(const RunConfig& config, const std::string& name,
                        const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::string out = hash_comment(config);
  out += csv_join(header) + "\n";
  for (const auto& row : rows) out += csv_join(row) + "\n";
  write_file(artifact_path(config, name), out);
}

void write_jsonl_artifact(const RunConfig& config, const std::string& name,
                          const std::vector<json>& rows) {
  std::string out = json{{"config_hash", config.config_hash}}.dump() + "\n";
  for (const json& row : rows) out += row.dump() + "\n";
  write_file(artifact_path(config, name), out);
}

market::TradingCalendar load_calendar_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open calendar {}", path.string()));
  return market::load_calendar(in);
}

std::optional<double> parse_optional_double(const std::string& field, std::size_t line,
                                            const char* name) {
  if (field.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(
        fmt::format("panel.csv line {}: field '{}' has non-numeric value '{}'", line, name,
                    field));
  }
}

}  // namespace

std::filesystem::path artifact_path(const RunConfig& config, std::string_view name) {
  return config.output_dir / name;
}

RunConfig load_run_config(const std::filesystem::path& config_path,
                          const CliOverrides& overrides) {
  json raw = parse_json_file(config_path, "config");
  if (!raw.is_object()) throw ValidationError("config: top level must be an object");
  if (overrides.seed.has_value()) raw["seed"] = *overrides.seed;
  // CLI overrides of result-shaping parameters land in the canonical JSON so
  // the config hash reflects what actually ran.
  if (overrides.similarity_threshold.has_value()) {
    raw["dedup"]["similarity_threshold"] = *overrides.similarity_threshold;
  }
  if (overrides.dedup_day.has_value()) raw["dedup"]["day"] = *overrides.dedup_day;

  json canonical = raw;
  canonical.erase("output_dir");
  canonical.erase("jobs");

  RunConfig cfg;
  cfg.config_hash = sha256_hex(canonical.dump());

  std::filesystem::path base = config_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  const json* returns = find_key(raw, "returns");
  if (returns == nullptr) throw ValidationError("config: returns section missing");
  cfg.returns_path = resolve(require_string(*returns, "path", "returns"));
  cfg.returns_format = parse_file_format(returns->value("format", "csv"));

  const json* headlines = find_key(raw, "headlines");
  if (headlines == nullptr) throw ValidationError("config: headlines section missing");
  cfg.headlines_path = resolve(require_string(*headlines, "path", "headlines"));
  cfg.headlines_format = parse_file_format(headlines->value("format", "csv"));

  const json* calendar = find_key(raw, "calendar");
  if (calendar == nullptr) throw ValidationError("config: calendar section missing");
  cfg.calendar_path = resolve(require_string(*calendar, "path", "calendar"));

  const json* scorer_cfg = find_key(raw, "scorer");
  if (scorer_cfg == nullptr) throw ValidationError("config: scorer section missing");
  cfg.backend = require_string(*scorer_cfg, "backend", "scorer");
  cfg.model_id = scorer_cfg->value("model_id", "offline-mock");
  if (const json* v = find_key(*scorer_cfg, "lexicon")) cfg.lexicon_path = resolve(v->get<std::string>());
  if (const json* v = find_key(*scorer_cfg, "recorded_responses")) {
    cfg.recorded_responses_path = resolve(v->get<std::string>());
  }
  if (const json* v = find_key(*scorer_cfg, "cache")) cfg.cache_path = resolve(v->get<std::string>());
  cfg.term = scorer::parse_term(scorer_cfg->value("term", "short"));
  cfg.strict_parse = scorer_cfg->value("strict_parse", false);
  cfg.endpoint_url = scorer_cfg->value("endpoint_url", "");
  cfg.api_key_env = scorer_cfg->value("api_key_env", "");
  cfg.requests_per_second = scorer_cfg->value("requests_per_second", 1.0);
  cfg.max_retries = scorer_cfg->value("max_retries", 5);
  if (cfg.backend != "mock" && cfg.backend != "replay" && cfg.backend != "http") {
    throw ValidationError(
        fmt::format("config: scorer.backend '{}' must be mock, replay, or http", cfg.backend));
  }
  if (cfg.backend == "replay" && !cfg.recorded_responses_path.has_value()) {
    throw ValidationError("config: replay backend needs scorer.recorded_responses");
  }
  if (cfg.backend == "http" && cfg.endpoint_url.empty()) {
    throw ValidationError("config: http backend needs scorer.endpoint_url");
  }

  if (const json* dedup = find_key(raw, "dedup")) {
    cfg.similarity_threshold = dedup->value("similarity_threshold", 0.6);
    cfg.dedup_day = dedup->value("day", "effective");
  }
  if (cfg.similarity_threshold < 0.0 || cfg.similarity_threshold > 1.0) {
    throw ValidationError(fmt::format("config: dedup.similarity_threshold {} outside [0, 1]",
                                      cfg.similarity_threshold));
  }
  if (cfg.dedup_day != "effective" && cfg.dedup_day != "calendar") {
    throw ValidationError(fmt::format("config: dedup.day '{}' must be effective or calendar",
                                      cfg.dedup_day));
  }

  if (const json* timing = find_key(raw, "timing")) {
    cfg.timing.extra_lag_days = timing->value("extra_lag_days", 0);
    cfg.return_convention = timing->value("return_convention", "close_to_close");
  }
  if (cfg.return_convention != "close_to_close" && cfg.return_convention != "open_to_open") {
    throw ValidationError(fmt::format(
        "config: timing.return_convention '{}' must be close_to_close or open_to_open",
        cfg.return_convention));
  }

  if (const json* regs = find_key(raw, "regressions")) {
    if (!regs->is_array() || regs->empty()) {
      throw ValidationError("config: regressions must be a non-empty array");
    }
    for (std::size_t i = 0; i < regs->size(); ++i) {
      cfg.regressions.push_back(parse_regression_spec(regs->at(i), i));
    }
  } else {
    cfg.regressions = default_regressions();
  }

  if (const json* bt = find_key(raw, "backtest")) {
    std::string weighting = bt->value("weighting", "equal");
    if (weighting == "equal") {
      cfg.backtest_options.weighting = backtest::Weighting::Equal;
    } else if (weighting == "value") {
      cfg.backtest_options.weighting = backtest::Weighting::Value;
    } else {
      throw ValidationError(
          fmt::format("config: backtest.weighting '{}' must be equal or value", weighting));
    }
    cfg.backtest_options.cost_per_side_bps = bt->value("cost_per_side_bps", 0.0);
  }

  cfg.output_dir = raw.value("output_dir", "out");
  cfg.seed = raw.value("seed", std::uint64_t{0});
  if (overrides.output_dir.has_value()) cfg.output_dir = *overrides.output_dir;
  cfg.jobs = overrides.jobs;

  require_exists(cfg.returns_path, "returns file");
  require_exists(cfg.headlines_path, "headlines file");
  require_exists(cfg.calendar_path, "calendar file");
  if (cfg.lexicon_path) require_exists(*cfg.lexicon_path, "lexicon file");
  if (cfg.recorded_responses_path) {
    require_exists(*cfg.recorded_responses_path, "recorded responses file");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// ingest

void cmd_ingest(const RunConfig& config) {
  std::filesystem::create_directories(config.output_dir);
  json manifest = load_manifest(config);
  record_input(manifest, "returns", config.returns_path);
  record_input(manifest, "headlines", config.headlines_path);
  record_input(manifest, "calendar", config.calendar_path);
  if (config.lexicon_path) record_input(manifest, "lexicon", *config.lexicon_path);
  if (config.recorded_responses_path) {
    record_input(manifest, "recorded_responses", *config.recorded_responses_path);
  }

  std::ifstream rin(config.returns_path);
  if (!rin) throw IoError(fmt::format("cannot open returns {}", config.returns_path.string()));
  std::vector<market::ReturnRecord> returns = market::load_returns(rin, config.returns_format);
  std::vector<market::ReturnRecord> universe = market::filter_universe(returns);
  std::sort(universe.begin(), universe.end(),
            [](const market::ReturnRecord& a, const market::ReturnRecord& b) {
              if (a.firm_id != b.firm_id) return a.firm_id < b.firm_id;
              return to_days(a.date) < to_days(b.date);
            });
  std::vector<json> return_rows;
  return_rows.reserve(universe.size());
  for (const market::ReturnRecord& r : universe) {
    json row;
    row["firm_id"] = r.firm_id;
    row["date"] = format_date(r.date);
    row["ret"] = r.ret;
    if (r.market_cap.has_value()) row["market_cap"] = *r.market_cap;
    row["share_code"] = r.share_code;
    row["exchange"] = std::string(market::exchange_name(r.exchange));
    return_rows.push_back(std::move(row));
  }
  write_jsonl_artifact(config, "returns_filtered.jsonl", return_rows);

  market::TradingCalendar calendar = load_calendar_file(config.calendar_path);

  std::ifstream hin(config.headlines_path);
  if (!hin) {
    throw IoError(fmt::format("cannot open headlines {}", config.headlines_path.string()));
  }
  std::vector<news::HeadlineRecord> headlines =
      news::parse_headlines(hin, config.headlines_format);
  std::vector<news::HeadlineRecord> filtered = news::filter_headlines(headlines);

  // Grouping day for duplicate detection: the post-timing-rule session by
  // default, so an overnight story collides with the next morning's rewrite,
  // or the raw publication date on the exchange's wall clock.
  std::map<std::string, Date> dedup_day;
  for (const news::HeadlineRecord& r : filtered) {
    dedup_day[r.story_id] =
        config.dedup_day == "calendar"
            ? calendar.zone.to_civil(r.published_at.instant).date
            : signal::assign_effective_date(r.published_at, calendar, config.timing);
  }
  news::DedupStats dedup_stats;
  std::vector<news::HeadlineRecord> kept = news::dedup_firm_day(
      filtered, config.similarity_threshold, dedup_day, config.jobs, &dedup_stats);
  std::sort(kept.begin(), kept.end(),
            [](const news::HeadlineRecord& a, const news::HeadlineRecord& b) {
              if (a.firm_id != b.firm_id) return a.firm_id < b.firm_id;
              if (a.published_at.instant != b.published_at.instant) {
                return a.published_at.instant < b.published_at.instant;
              }
              return a.story_id < b.story_id;
            });
  std::vector<json> headline_rows;
  headline_rows.reserve(kept.size());
  for (const news::HeadlineRecord& r : kept) {
    json row;
    row["story_id"] = r.story_id;
    row["firm_id"] = r.firm_id;
    row["firm_name"] = r.firm_name;
    row["published_at"] = format_timestamp(r.published_at);
    row["headline"] = r.headline;
    row["relevance"] = r.relevance;
    row["category"] = r.category;
    row["event_similarity_days"] = r.event_similarity_days;
    row["story_type"] = std::string(news::story_type_name(r.story_type));
    if (r.vendor_sentiment.has_value()) row["vendor_sentiment"] = *r.vendor_sentiment;
    headline_rows.push_back(std::move(row));
  }
  write_jsonl_artifact(config, "headlines_filtered.jsonl", headline_rows);

  json& counters = manifest["counters"];
  counters["returns_parsed"] = returns.size();
  counters["returns_kept"] = universe.size();
  counters["returns_rejected"] = returns.size() - universe.size();
  counters["headlines_parsed"] = headlines.size();
  counters["headlines_filter_rejected"] = headlines.size() - filtered.size();
  counters["headlines_dedup_groups"] = dedup_stats.groups;
  counters["headlines_dedup_dropped"] = dedup_stats.dropped;
  counters["headlines_kept"] = kept.size();

  record_artifact(manifest, config, "returns_filtered.jsonl");
  record_artifact(manifest, config, "headlines_filtered.jsonl");
  store_manifest(config, manifest);
}

// ---------------------------------------------------------------------------
// score

namespace {

std::unique_ptr<scorer::ScorerBackend> make_backend(const RunConfig& config) {
  if (config.backend == "mock") {
    if (config.lexicon_path.has_value()) {
      return std::make_unique<scorer::MockLexiconBackend>(
          scorer::MockLexiconBackend::from_file(*config.lexicon_path));
    }
    return std::make_unique<scorer::MockLexiconBackend>();
  }
  if (config.backend == "replay") {
    return std::make_unique<scorer::ReplayBackend>(*config.recorded_responses_path);
  }
  scorer::HttpBackendConfig http;
  http.endpoint_url = config.endpoint_url;
  if (!config.api_key_env.empty()) {
    const char* key = std::getenv(config.api_key_env.c_str());
    http.api_key = key != nullptr ? key : "";
  }
  http.requests_per_second = config.requests_per_second;
  http.max_retries = config.max_retries;
  return std::make_unique<scorer::HttpChatBackend>(http);
}

std::vector<news::HeadlineRecord> read_filtered_headlines(const RunConfig& config) {
  std::string content = read_file(artifact_path(config, "headlines_filtered.jsonl"));
  std::string rest =
      strip_jsonl_header(content, config, "headlines_filtered.jsonl", "ingest");
  std::istringstream in(rest);
  return news::parse_headlines(in, FileFormat::Jsonl);
}

std::vector<market::ReturnRecord> read_filtered_returns(const RunConfig& config) {
  std::string content = read_file(artifact_path(config, "returns_filtered.jsonl"));
  std::string rest = strip_jsonl_header(content, config, "returns_filtered.jsonl", "ingest");
  std::istringstream in(rest);
  return market::load_returns(in, FileFormat::Jsonl);
}

}  // namespace

void cmd_score(const RunConfig& config) {
  json manifest = load_manifest(config);
  require_artifact(manifest, config, "headlines_filtered.jsonl", "ingest");
  std::vector<news::HeadlineRecord> records = read_filtered_headlines(config);

  std::unique_ptr<scorer::ScorerBackend> backend = make_backend(config);
  scorer::ScoreCache cache =
      config.cache_path.has_value() ? scorer::ScoreCache(*config.cache_path)
                                    : scorer::ScoreCache();
  scorer::ScoringOptions options;
  options.term = config.term;
  options.model_id = config.model_id;
  options.strict_parse = config.strict_parse;

  scorer::ScoringStats stats;
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const news::HeadlineRecord& record : records) {
    scorer::SentimentScore score = scorer::score_headline(record, *backend, cache, options,
                                                          &stats);
    json row;
    row["story_id"] = record.story_id;
    row["firm_id"] = record.firm_id;
    row["score"] = score.value;
    rows.push_back(std::move(row));
  }
  write_jsonl_artifact(config, "scores.jsonl", rows);

  json& counters = manifest["counters"];
  counters["scored"] = stats.scored;
  counters["backend_calls"] = stats.backend_calls;
  counters["cache_hits"] = stats.cache_hits;
  counters["parse_fallbacks"] = stats.parse_fallbacks;
  record_artifact(manifest, config, "scores.jsonl");
  store_manifest(config, manifest);
}

// ---------------------------------------------------------------------------
// signal

void cmd_signal(const RunConfig& config) {
  json manifest = load_manifest(config);
  require_artifact(manifest, config, "headlines_filtered.jsonl", "ingest");
  require_artifact(manifest, config, "returns_filtered.jsonl", "ingest");
  require_artifact(manifest, config, "scores.jsonl", "score");

  std::vector<news::HeadlineRecord> records = read_filtered_headlines(config);
  std::string scores_content = read_file(artifact_path(config, "scores.jsonl"));
  std::string rest = strip_jsonl_header(scores_content, config, "scores.jsonl", "score");

  std::map<std::string, int> score_by_story;
  {
    std::istringstream in(rest);
    std::string line;
    std::size_t line_no = 1;  // the stripped header was line 1
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json row;
      try {
        row = json::parse(line);
      } catch (const json::exception& e) {
        throw ValidationError(fmt::format("scores.jsonl:{}: {}", line_no, e.what()));
      }
      std::string story_id = require_string(row, "story_id", "scores.jsonl row");
      if (!row.contains("score") || !row.at("score").is_number_integer()) {
        throw ValidationError(fmt::format("scores.jsonl:{}: integer score missing", line_no));
      }
      if (!score_by_story.emplace(story_id, row.at("score").get<int>()).second) {
        throw ValidationError(
            fmt::format("scores.jsonl:{}: duplicate story_id '{}'", line_no, story_id));
      }
    }
  }

  std::vector<signal::ScoredHeadline> scored;
  scored.reserve(records.size());
  for (news::HeadlineRecord& record : records) {
    auto it = score_by_story.find(record.story_id);
    if (it == score_by_story.end()) {
      throw DependencyError(fmt::format(
          "story {} has no score in scores.jsonl; rerun `newspanel score`", record.story_id));
    }
    scored.push_back(signal::ScoredHeadline{std::move(record), it->second});
  }
  if (score_by_story.size() != scored.size()) {
    throw DependencyError("scores.jsonl contains scores for unknown stories; rerun `newspanel score`");
  }

  market::TradingCalendar calendar = load_calendar_file(config.calendar_path);
  std::vector<signal::FirmDaySignal> signals =
      signal::aggregate_firm_day(scored, calendar, config.timing);

  std::vector<std::vector<std::string>> signal_rows;
  signal_rows.reserve(signals.size());
  for (const signal::FirmDaySignal& s : signals) {
    signal_rows.push_back({s.firm_id, format_date(s.effective_date),
                           format_double(s.chatgpt_score),
                           s.vendor_score ? format_double(*s.vendor_score) : "",
                           fmt::format("{}", s.n_headlines)});
  }
  write_csv_artifact(config, "signals.csv",
                     {"firm_id", "effective_date", "chatgpt_score", "vendor_score",
                      "n_headlines"},
                     signal_rows);

  std::vector<market::ReturnRecord> returns = read_filtered_returns(config);
  std::map<Date, double> breakpoints = market::daily_nyse_breakpoints(returns);
  signal::PanelBuildStats stats;
  std::vector<signal::PanelObservation> panel =
      signal::build_panel(signals, returns, breakpoints, &stats);

  std::vector<std::vector<std::string>> panel_rows;
  panel_rows.reserve(panel.size());
  for (const signal::PanelObservation& obs : panel) {
    panel_rows.push_back(
        {obs.firm_id, format_date(obs.date), format_double(obs.ret_next),
         format_double(obs.chatgpt_score),
         obs.vendor_score ? format_double(*obs.vendor_score) : "",
         obs.size_class ? std::string(market::size_class_name(*obs.size_class)) : "",
         obs.market_cap ? format_double(*obs.market_cap) : ""});
  }
  write_csv_artifact(config, "panel.csv",
                     {"firm_id", "date", "ret_next", "chatgpt_score", "vendor_score",
                      "size_class", "market_cap"},
                     panel_rows);

  json& counters = manifest["counters"];
  counters["signals_built"] = signals.size();
  counters["panel_matched"] = stats.matched;
  counters["panel_dropped_no_return"] = stats.dropped_no_return;
  counters["panel_unclassified_size"] = stats.unclassified_size;
  record_artifact(manifest, config, "signals.csv");
  record_artifact(manifest, config, "panel.csv");
  store_manifest(config, manifest);
}

// ---------------------------------------------------------------------------
// regress / backtest / report

namespace {

std::vector<signal::PanelObservation> read_panel_artifact(const RunConfig& config) {
  std::string content = read_file(artifact_path(config, "panel.csv"));
  std::string rest = strip_text_header(content, config, "panel.csv", "signal");
  std::istringstream in(rest);
  CsvReader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields) ||
      fields != std::vector<std::string>{"firm_id", "date", "ret_next", "chatgpt_score",
                                         "vendor_score", "size_class", "market_cap"}) {
    throw ValidationError("panel.csv: unexpected header");
  }
  std::vector<signal::PanelObservation> panel;
  while (reader.next(fields)) {
    std::size_t line = reader.line() + 1;  // account for the stripped hash line
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 7) {
      throw ValidationError(
          fmt::format("panel.csv line {}: expected 7 fields, got {}", line, fields.size()));
    }
    signal::PanelObservation obs;
    obs.firm_id = fields[0];
    obs.date = parse_date(fields[1]);
    obs.ret_next = *parse_optional_double(fields[2], line, "ret_next");
    obs.chatgpt_score = *parse_optional_double(fields[3], line, "chatgpt_score");
    obs.vendor_score = parse_optional_double(fields[4], line, "vendor_score");
    if (!fields[5].empty()) {
      if (fields[5] == "small") {
        obs.size_class = market::SizeClass::Small;
      } else if (fields[5] == "non_small") {
        obs.size_class = market::SizeClass::NonSmall;
      } else {
        throw ValidationError(
            fmt::format("panel.csv line {}: unknown size_class '{}'", line, fields[5]));
      }
    }
    obs.market_cap = parse_optional_double(fields[6], line, "market_cap");
    panel.push_back(std::move(obs));
  }
  if (panel.empty()) throw ValidationError("panel.csv has no observations");
  return panel;
}

json result_to_json(const panel::RegressionResult& r) {
  json j;
  j["name"] = r.name;
  j["regressors"] = r.regressors;
  j["coefficients"] = r.coefficients;
  j["std_errors"] = r.std_errors;
  j["t_stats"] = r.t_stats;
  j["n_obs"] = r.n_obs;
  j["r2"] = r.r2;
  j["adj_r2"] = r.adj_r2;
  j["aic"] = r.aic;
  j["bic"] = r.bic;
  j["k_model"] = r.k_model;
  j["n_clusters"] = r.n_clusters;
  j["fixed_effects"] = {{"firm", r.fixed_effect_firm}, {"date", r.fixed_effect_date}};
  j["cov_psd_repaired"] = r.cov_psd_repaired;
  j["demean_sweeps"] = r.demean_sweeps;
  j["rows_filtered_out"] = r.rows_filtered_out;
  j["rows_missing_regressor"] = r.rows_missing_regressor;
  return j;
}

panel::RegressionResult result_from_json(const json& j) {
  panel::RegressionResult r;
  r.name = j.at("name").get<std::string>();
  r.regressors = j.at("regressors").get<std::vector<std::string>>();
  r.coefficients = j.at("coefficients").get<std::map<std::string, double>>();
  r.std_errors = j.at("std_errors").get<std::map<std::string, double>>();
  r.t_stats = j.at("t_stats").get<std::map<std::string, double>>();
  r.n_obs = j.at("n_obs").get<int>();
  r.r2 = j.at("r2").get<double>();
  r.adj_r2 = j.at("adj_r2").get<double>();
  r.aic = j.at("aic").get<double>();
  r.bic = j.at("bic").get<double>();
  r.k_model = j.at("k_model").get<int>();
  r.n_clusters = j.at("n_clusters").get<std::map<std::string, int>>();
  r.fixed_effect_firm = j.at("fixed_effects").at("firm").get<bool>();
  r.fixed_effect_date = j.at("fixed_effects").at("date").get<bool>();
  r.cov_psd_repaired = j.at("cov_psd_repaired").get<bool>();
  r.demean_sweeps = j.at("demean_sweeps").get<int>();
  return r;
}

json summary_to_json(const backtest::Summary& s) {
  json j;
  j["mean_daily"] = s.mean_daily;
  j["sharpe_annualized"] = s.sharpe_annualized;
  j["max_drawdown"] = s.max_drawdown;
  j["n_days"] = s.n_days;
  j["incomplete_days"] = s.incomplete_days;
  return j;
}

backtest::Summary summary_from_json(const json& j) {
  backtest::Summary s;
  s.mean_daily = j.at("mean_daily").get<double>();
  s.sharpe_annualized = j.at("sharpe_annualized").get<double>();
  s.max_drawdown = j.at("max_drawdown").get<double>();
  s.n_days = j.at("n_days").get<std::size_t>();
  s.incomplete_days = j.at("incomplete_days").get<std::size_t>();
  return s;
}

void write_backtest_csv(const RunConfig& config, const std::string& name,
                        const backtest::PortfolioSeries* series) {
  std::vector<std::vector<std::string>> rows;
  if (series != nullptr) {
    rows.reserve(series->days.size());
    for (const backtest::DayResult& d : series->days) {
      rows.push_back({format_date(d.date), format_double(d.long_return),
                      format_double(d.short_return), format_double(d.long_short_return),
                      fmt::format("{}", d.n_long), fmt::format("{}", d.n_short),
                      d.incomplete ? "1" : "0", format_double(d.cumulative)});
    }
  }
  write_csv_artifact(config, name,
                     {"date", "long_return", "short_return", "long_short_return", "n_long",
                      "n_short", "incomplete", "cumulative"},
                     rows);
}

}  // namespace

void cmd_regress(const RunConfig& config) {
  json manifest = load_manifest(config);
  require_artifact(manifest, config, "panel.csv", "signal");
  std::vector<signal::PanelObservation> panel = read_panel_artifact(config);

  json results = json::array();
  for (const panel::RegressionSpec& spec : config.regressions) {
    results.push_back(result_to_json(panel::estimate(panel, spec, config.jobs)));
  }
  json out;
  out["config_hash"] = config.config_hash;
  out["results"] = results;
  write_file(artifact_path(config, "regressions.json"), out.dump(2) + "\n");

  manifest["counters"]["regressions_run"] = config.regressions.size();
  record_artifact(manifest, config, "regressions.json");
  store_manifest(config, manifest);
}

void cmd_backtest(const RunConfig& config) {
  json manifest = load_manifest(config);
  require_artifact(manifest, config, "panel.csv", "signal");
  std::vector<signal::PanelObservation> panel = read_panel_artifact(config);

  backtest::PortfolioSeries full = backtest::form_portfolio(panel, config.backtest_options);
  backtest::SizeSplit split = backtest::split_by_size(panel);
  std::optional<backtest::PortfolioSeries> small;
  std::optional<backtest::PortfolioSeries> non_small;
  if (!split.small.empty()) {
    small = backtest::form_portfolio(split.small, config.backtest_options);
  }
  if (!split.non_small.empty()) {
    non_small = backtest::form_portfolio(split.non_small, config.backtest_options);
  }

  write_backtest_csv(config, "backtest_full.csv", &full);
  write_backtest_csv(config, "backtest_small.csv", small ? &*small : nullptr);
  write_backtest_csv(config, "backtest_non_small.csv", non_small ? &*non_small : nullptr);

  json out;
  out["config_hash"] = config.config_hash;
  out["weighting"] =
      config.backtest_options.weighting == backtest::Weighting::Equal ? "equal" : "value";
  out["cost_per_side_bps"] = config.backtest_options.cost_per_side_bps;
  out["full"] = summary_to_json(full.summary);
  out["small"] = small ? summary_to_json(small->summary) : json();
  out["non_small"] = non_small ? summary_to_json(non_small->summary) : json();
  out["unclassified_rows"] = split.unclassified;
  write_file(artifact_path(config, "backtest_summary.json"), out.dump(2) + "\n");

  json& counters = manifest["counters"];
  counters["backtest_days"] = full.summary.n_days;
  counters["backtest_unclassified_rows"] = split.unclassified;
  record_artifact(manifest, config, "backtest_full.csv");
  record_artifact(manifest, config, "backtest_small.csv");
  record_artifact(manifest, config, "backtest_non_small.csv");
  record_artifact(manifest, config, "backtest_summary.json");
  store_manifest(config, manifest);
}

void cmd_report(const RunConfig& config) {
  json manifest = load_manifest(config);
  require_artifact(manifest, config, "regressions.json", "regress");
  require_artifact(manifest, config, "backtest_summary.json", "backtest");

  json reg = parse_json_file(artifact_path(config, "regressions.json"), "regressions artifact");
  if (reg.value("config_hash", "") != config.config_hash) {
    throw DependencyError("regressions.json carries a different config hash; rerun `newspanel regress`");
  }
  std::vector<panel::RegressionResult> results;
  for (const json& r : reg.at("results")) results.push_back(result_from_json(r));

  json bt = parse_json_file(artifact_path(config, "backtest_summary.json"),
                            "backtest artifact");
  if (bt.value("config_hash", "") != config.config_hash) {
    throw DependencyError("backtest_summary.json carries a different config hash; rerun `newspanel backtest`");
  }
  std::vector<report::BacktestLine> lines;
  lines.push_back({"full", summary_from_json(bt.at("full"))});
  if (!bt.at("small").is_null()) lines.push_back({"small", summary_from_json(bt.at("small"))});
  if (!bt.at("non_small").is_null()) {
    lines.push_back({"non_small", summary_from_json(bt.at("non_small"))});
  }

  std::string out = hash_comment(config);
  out += "\nNext-day return regressions on headline sentiment\n";
  out += "==================================================\n\n";
  out += report::render_regression_table(results);
  out += "\nt-statistics in parentheses.\n";
  out += fmt::format("\nLong-short backtest ({} weighted, {} bps per side)\n",
                     config.backtest_options.weighting == backtest::Weighting::Equal ? "equal"
                                                                                     : "value",
                     config.backtest_options.cost_per_side_bps);
  out += report::render_backtest_summary(lines);
  write_file(artifact_path(config, "report.txt"), out);

  record_artifact(manifest, config, "report.txt");
  store_manifest(config, manifest);
}

void cmd_run(const RunConfig& config) {
  cmd_ingest(config);
  cmd_score(config);
  cmd_signal(config);
  cmd_regress(config);
  cmd_backtest(config);
  cmd_report(config);
}

}  // namespace nsp::pipeline
