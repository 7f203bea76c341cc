#include "nsp/sentiment.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nsp/common.hpp"
#include "nsp/io_util.hpp"

namespace nsp::scorer {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.front())) != 0)) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) != 0)) {
    s.remove_suffix(1);
  }
  return s;
}

std::string upper_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

// Splices `value` over the single occurrence of `token`. The template is
// scanned once left to right, so tokens appearing inside substituted values
// are data, not placeholders.
void substitute_once(std::string& text, std::size_t& cursor, std::string_view token,
                     std::string_view value) {
  std::size_t pos = text.find(token, cursor);
  if (pos == std::string::npos) {
    throw ValidationError(fmt::format("prompt template is missing the {} placeholder", token));
  }
  text.replace(pos, token.size(), value);
  cursor = pos + value.size();
}

}  // namespace

const std::string_view kPromptTemplate =
    "Forget all your previous instructions. Pretend you are a financial expert. "
    "You are a financial expert with stock recommendation experience. "
    "Answer \"YES\" if good news, \"NO\" if bad news, or \"UNKNOWN\" if uncertain "
    "in the first line. Then elaborate with one short and concise sentence on the "
    "next line. Is this headline good or bad for the stock price of _company_name_ "
    "in the _term_ term?\n\nHeadline: _headline_";

const std::string_view kPromptTemplateVersion = "v1";

Term parse_term(std::string_view token) {
  if (token == "short") return Term::Short;
  if (token == "long") return Term::Long;
  throw ValidationError(fmt::format("unknown term '{}' (expected short or long)", token));
}

std::string_view term_word(Term t) {
  return t == Term::Short ? "short" : "long";
}

std::string build_prompt(const PromptRequest& request) {
  if (request.company_name.empty()) {
    throw ValidationError("prompt request has an empty company name");
  }
  if (request.headline.empty()) {
    throw ValidationError("prompt request has an empty headline");
  }
  std::string text(kPromptTemplate);
  std::size_t cursor = 0;
  substitute_once(text, cursor, "_company_name_", request.company_name);
  substitute_once(text, cursor, "_term_", term_word(request.term));
  substitute_once(text, cursor, "_headline_", request.headline);
  return text;
}

std::string_view verdict_label_name(VerdictLabel label) {
  switch (label) {
    case VerdictLabel::Yes: return "yes";
    case VerdictLabel::No: return "no";
    case VerdictLabel::Unknown: return "unknown";
  }
  throw ValidationError("invalid verdict label");
}

ScorerVerdict parse_response(std::string_view raw) {
  ScorerVerdict verdict;
  verdict.raw_response = std::string(raw);

  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    lines.push_back(raw.substr(start, end - start));
    start = end + 1;
  }

  std::size_t verdict_line = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    std::string up = upper_ascii(line);
    // UNKNOWN before NO: "NO" is a prefix test and must not shadow it.
    if (up.starts_with("YES")) {
      verdict.label = VerdictLabel::Yes;
    } else if (up.starts_with("UNKNOWN")) {
      verdict.label = VerdictLabel::Unknown;
    } else if (up.starts_with("NO")) {
      verdict.label = VerdictLabel::No;
    } else {
      throw ResponseParseError(
          fmt::format("response does not begin with YES, NO, or UNKNOWN: \"{}\"", line));
    }
    verdict_line = i;
    break;
  }
  if (verdict_line == lines.size()) {
    throw ResponseParseError("response is empty");
  }

  std::string rationale;
  for (std::size_t i = verdict_line + 1; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    if (!rationale.empty()) rationale += ' ';
    rationale += line;
  }
  verdict.rationale = std::move(rationale);
  return verdict;
}

int map_label(VerdictLabel label) {
  switch (label) {
    case VerdictLabel::Yes: return 1;
    case VerdictLabel::No: return -1;
    case VerdictLabel::Unknown: return 0;
  }
  throw ValidationError("invalid verdict label");
}

namespace {

// Relevant subset of words that move the mock verdict. Matching happens on
// case-folded whole words, so entries are stored lower-case.
const std::vector<std::string> kBuiltinPositive = {
    "acquire",   "approval", "approved",  "beat",     "beats",   "breakthrough",
    "buyback",   "dividend", "exceeds",   "expands",  "gain",    "growth",
    "increases", "launches", "partnership", "profit", "profits", "raises",
    "rebound",   "record",   "strong",    "surges",   "upgrade", "upgraded",
    "wins"};

const std::vector<std::string> kBuiltinNegative = {
    "bankruptcy", "cuts",    "declines", "default",  "delays",   "downgrade",
    "downgraded", "drops",   "fined",    "fraud",    "investigation", "lawsuit",
    "layoffs",    "loss",    "losses",   "misses",   "plunges",  "probe",
    "recall",     "slump",   "sues",     "warns",    "weak"};

std::vector<std::string> tokenize_folded(const std::string& text) {
  std::string folded = news::normalize_headline(text);
  std::vector<std::string> words;
  std::string current;
  for (char c : folded) {
    if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
      current += c;
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

}  // namespace

MockLexiconBackend::MockLexiconBackend()
    : MockLexiconBackend(kBuiltinPositive, kBuiltinNegative) {}

MockLexiconBackend::MockLexiconBackend(std::vector<std::string> positive,
                                       std::vector<std::string> negative)
    : positive_(std::move(positive)), negative_(std::move(negative)) {
  auto fold = [](std::vector<std::string>& words) {
    for (std::string& w : words) w = news::normalize_headline(w);
    std::sort(words.begin(), words.end());
  };
  fold(positive_);
  fold(negative_);
}

MockLexiconBackend MockLexiconBackend::from_file(const std::filesystem::path& lexicon_json) {
  json doc;
  try {
    doc = json::parse(read_file(lexicon_json));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("lexicon {}: {}", lexicon_json.string(), e.what()));
  }
  if (!doc.is_object() || !doc.contains("positive") || !doc.contains("negative")) {
    throw ValidationError(
        fmt::format("lexicon {}: expected object with positive and negative word lists",
                    lexicon_json.string()));
  }
  return {doc.at("positive").get<std::vector<std::string>>(),
          doc.at("negative").get<std::vector<std::string>>()};
}

std::string MockLexiconBackend::complete(const std::string& prompt,
                                         const std::string& /*model_id*/,
                                         double /*temperature*/) {
  static constexpr std::string_view kMarker = "Headline: ";
  std::size_t pos = prompt.rfind(kMarker);
  if (pos == std::string::npos) {
    throw BackendError("mock backend: prompt has no headline section");
  }
  std::string headline = prompt.substr(pos + kMarker.size());

  std::size_t positive = 0;
  std::size_t negative = 0;
  for (const std::string& word : tokenize_folded(headline)) {
    if (std::binary_search(positive_.begin(), positive_.end(), word)) ++positive;
    if (std::binary_search(negative_.begin(), negative_.end(), word)) ++negative;
  }

  std::string_view answer = "UNKNOWN";
  if (positive > negative) answer = "YES";
  if (negative > positive) answer = "NO";
  return fmt::format("{}\n\nLexicon match: {} positive and {} negative terms.", answer, positive,
                     negative);
}

ReplayBackend::ReplayBackend(const std::filesystem::path& recorded_responses) {
  std::ifstream in(recorded_responses);
  if (!in) {
    throw IoError(fmt::format("cannot open recorded responses {}", recorded_responses.string()));
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", recorded_responses.string(), line_no,
                                        e.what()));
    }
    if (!row.contains("prompt_hash") || !row.contains("raw_response")) {
      throw ValidationError(fmt::format("{}:{}: expected prompt_hash and raw_response",
                                        recorded_responses.string(), line_no));
    }
    responses_[row.at("prompt_hash").get<std::string>()] =
        row.at("raw_response").get<std::string>();
  }
}

std::string ReplayBackend::complete(const std::string& prompt, const std::string& /*model_id*/,
                                    double /*temperature*/) {
  std::string hash = prompt_hash(prompt);
  auto it = responses_.find(hash);
  if (it == responses_.end()) {
    throw BackendError(fmt::format("replay backend has no recorded response for prompt hash {}",
                                   hash));
  }
  return it->second;
}

TokenBucket::TokenBucket(double tokens_per_second, double capacity)
    : rate_(tokens_per_second), capacity_(capacity), tokens_(capacity),
      last_(std::chrono::steady_clock::now()) {
  if (rate_ <= 0.0 || capacity_ < 1.0) {
    throw ValidationError("token bucket needs a positive rate and capacity >= 1");
  }
}

bool TokenBucket::try_acquire(std::chrono::steady_clock::time_point now) {
  std::lock_guard lock(mutex_);
  if (now > last_) {
    std::chrono::duration<double> dt = now - last_;
    tokens_ = std::min(capacity_, tokens_ + rate_ * dt.count());
    last_ = now;
  }
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void TokenBucket::acquire() {
  while (!try_acquire(std::chrono::steady_clock::now())) {
    double deficit;
    {
      std::lock_guard lock(mutex_);
      deficit = 1.0 - tokens_;
    }
    auto wait = std::chrono::duration<double>(std::max(deficit, 0.0) / rate_);
    std::this_thread::sleep_for(
        std::min(std::chrono::duration_cast<std::chrono::milliseconds>(wait),
                 std::chrono::milliseconds(250)));
  }
}

ScoreCache::ScoreCache() = default;

ScoreCache::ScoreCache(std::filesystem::path file) : file_(std::move(file)), persistent_(true) {
  std::ifstream in(file_);
  if (!in) return;  // created on first append
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", file_.string(), line_no, e.what()));
    }
    if (!row.contains("key") || !row.contains("raw_response") || !row.contains("label")) {
      throw ValidationError(
          fmt::format("{}:{}: expected key, raw_response, and label", file_.string(), line_no));
    }
    entries_[row.at("key").get<std::string>()] = Entry{
        row.at("raw_response").get<std::string>(), row.at("label").get<std::string>()};
  }
}

std::optional<ScoreCache::Entry> ScoreCache::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::optional<ScoreCache::Entry> ScoreCache::get_or_begin(const std::string& key) {
  std::unique_lock lock(mutex_);
  for (;;) {
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    if (!in_flight_.contains(key)) {
      in_flight_[key] = true;
      return std::nullopt;
    }
    cv_.wait(lock);
  }
}

void ScoreCache::fulfill(const std::string& key, Entry entry, const std::string& model_id,
                         const std::string& prompt_hash) {
  std::lock_guard lock(mutex_);
  if (persistent_) append_line(key, entry, model_id, prompt_hash);
  entries_[key] = std::move(entry);
  in_flight_.erase(key);
  cv_.notify_all();
}

void ScoreCache::abandon(const std::string& key) {
  std::lock_guard lock(mutex_);
  in_flight_.erase(key);
  cv_.notify_all();
}

void ScoreCache::append_line(const std::string& key, const Entry& entry,
                             const std::string& model_id, const std::string& prompt_hash) {
  json row;
  row["key"] = key;
  row["model_id"] = model_id;
  row["prompt_hash"] = prompt_hash;
  row["raw_response"] = entry.raw_response;
  row["label"] = entry.label;
  auto now = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  row["timestamp"] = format_timestamp(Timestamp{now, 0});
  std::ofstream out(file_, std::ios::app);
  if (!out) {
    throw IoError(fmt::format("cannot append to cache file {}", file_.string()));
  }
  out << row.dump() << '\n';
  if (!out) {
    throw IoError(fmt::format("write to cache file {} failed", file_.string()));
  }
}

std::string prompt_hash(std::string_view prompt) {
  return sha256_hex(prompt);
}

std::string cache_key(std::string_view model_id, std::string_view prompt_hash_hex) {
  return fmt::format("{}|{}", model_id, prompt_hash_hex);
}

SentimentScore score_headline(const news::HeadlineRecord& record, ScorerBackend& backend,
                              ScoreCache& cache, const ScoringOptions& options,
                              ScoringStats* stats) {
  PromptRequest request;
  request.company_name = record.firm_name;
  request.term = options.term;
  request.headline = record.headline;
  request.model_id = options.model_id;
  std::string prompt = build_prompt(request);
  std::string hash = prompt_hash(prompt);
  std::string key = cache_key(options.model_id, hash);

  std::optional<ScoreCache::Entry> entry = cache.get_or_begin(key);
  bool from_cache = entry.has_value();
  if (!entry) {
    std::string raw;
    try {
      raw = backend.complete(prompt, options.model_id, 0.0);
    } catch (const std::exception& e) {
      cache.abandon(key);
      throw BackendError(fmt::format("story {}: {}", record.story_id, e.what()));
    }
    std::string label = "parse_error";
    try {
      label = std::string(verdict_label_name(parse_response(raw).label));
    } catch (const ResponseParseError&) {
      // Raw text is still cached; the policy below decides what to do with it.
    }
    entry = ScoreCache::Entry{std::move(raw), std::move(label)};
    cache.fulfill(key, *entry, options.model_id, hash);
  }
  if (stats != nullptr) {
    ++stats->scored;
    if (from_cache) {
      ++stats->cache_hits;
    } else {
      ++stats->backend_calls;
    }
  }

  VerdictLabel label = VerdictLabel::Unknown;
  try {
    label = parse_response(entry->raw_response).label;
  } catch (const ResponseParseError& e) {
    if (options.strict_parse) {
      throw ResponseParseError(fmt::format("story {}: {}", record.story_id, e.what()));
    }
    if (stats != nullptr) ++stats->parse_fallbacks;
  }
  return SentimentScore{map_label(label), record.story_id, options.model_id};
}

}  // namespace nsp::scorer
