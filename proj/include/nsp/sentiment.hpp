#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nsp/news_ingest.hpp"

namespace nsp::scorer {

enum class Term { Short, Long };

Term parse_term(std::string_view token);
std::string_view term_word(Term t);  // the word substituted into the prompt

// The instruction template, with _company_name_, _term_, and _headline_
// placeholder tokens. Versioned so cache keys change when the text changes.
extern const std::string_view kPromptTemplate;
extern const std::string_view kPromptTemplateVersion;

struct PromptRequest {
  std::string company_name;
  Term term = Term::Short;
  std::string headline;
  std::string model_id;
  double temperature = 0.0;
};

// Substitutes the three placeholders. Byte-deterministic. Throws
// ValidationError on an empty company name or headline.
std::string build_prompt(const PromptRequest& request);

enum class VerdictLabel { Yes, No, Unknown };

std::string_view verdict_label_name(VerdictLabel label);

struct ScorerVerdict {
  VerdictLabel label = VerdictLabel::Unknown;
  std::string rationale;
  std::string raw_response;
};

// First non-empty line, trimmed and upper-cased, must begin with YES, NO, or
// UNKNOWN; the remaining lines become the rationale. Throws
// ResponseParseError otherwise (carrying the raw text).
ScorerVerdict parse_response(std::string_view raw);

// Yes -> +1, Unknown -> 0, No -> -1.
int map_label(VerdictLabel label);

struct SentimentScore {
  int value = 0;  // -1, 0, +1
  std::string story_id;
  std::string model_id;
};

class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual std::string complete(const std::string& prompt, const std::string& model_id,
                               double temperature) = 0;
  virtual std::string_view name() const = 0;
};

// Deterministic offline scorer: counts signed lexicon terms in the headline
// portion of the prompt and answers in the YES/NO/UNKNOWN protocol.
class MockLexiconBackend : public ScorerBackend {
 public:
  MockLexiconBackend();  // built-in lexicon
  MockLexiconBackend(std::vector<std::string> positive, std::vector<std::string> negative);
  static MockLexiconBackend from_file(const std::filesystem::path& lexicon_json);

  std::string complete(const std::string& prompt, const std::string& model_id,
                       double temperature) override;
  std::string_view name() const override { return "mock"; }

 private:
  std::vector<std::string> positive_;
  std::vector<std::string> negative_;
};

// Replays recorded responses keyed by prompt hash. JSONL rows:
// {"prompt_hash": ..., "raw_response": ...}.
class ReplayBackend : public ScorerBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& recorded_responses);

  std::string complete(const std::string& prompt, const std::string& model_id,
                       double temperature) override;
  std::string_view name() const override { return "replay"; }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

// Steady-state request throttle. try_acquire(now) is the testable core;
// acquire() sleeps until a token is available.
class TokenBucket {
 public:
  TokenBucket(double tokens_per_second, double capacity);
  bool try_acquire(std::chrono::steady_clock::time_point now);
  void acquire();

 private:
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

struct HttpBackendConfig {
  std::string endpoint_url;  // e.g. https://host[:port]/v1/chat/completions
  std::string api_key;       // empty -> no Authorization header
  int max_retries = 5;
  int initial_backoff_ms = 1000;
  double requests_per_second = 1.0;
  double burst = 1.0;
  int timeout_seconds = 60;
};

// Chat-completion client: POSTs {model, temperature, messages:[{role:"user",
// content:prompt}]} and reads choices[0].message.content. Retries 429/5xx and
// transport failures with exponential backoff, throttled by a token bucket.
class HttpChatBackend : public ScorerBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);
  ~HttpChatBackend() override;

  std::string complete(const std::string& prompt, const std::string& model_id,
                       double temperature) override;
  std::string_view name() const override { return "http"; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Append-only persistent response cache keyed by (model_id, prompt hash).
// A present key is never re-queried; concurrent callers of the same key
// coalesce into a single backend call.
class ScoreCache {
 public:
  // In-memory only.
  ScoreCache();
  // Backed by a JSONL file; loads existing entries, appends new ones.
  explicit ScoreCache(std::filesystem::path file);

  struct Entry {
    std::string raw_response;
    std::string label;
  };

  std::optional<Entry> get(const std::string& key) const;
  std::size_t size() const;

  // Claim protocol used by score_headline: returns the cached entry, or marks
  // the key in flight and returns nullopt (the caller must fulfill or
  // abandon). Callers racing on the same key block until it resolves.
  std::optional<Entry> get_or_begin(const std::string& key);
  void fulfill(const std::string& key, Entry entry, const std::string& model_id,
               const std::string& prompt_hash);
  void abandon(const std::string& key);

 private:
  void append_line(const std::string& key, const Entry& entry, const std::string& model_id,
                   const std::string& prompt_hash);

  std::filesystem::path file_;
  bool persistent_ = false;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::unordered_map<std::string, Entry> entries_;
  std::unordered_map<std::string, bool> in_flight_;
};

std::string prompt_hash(std::string_view prompt);
std::string cache_key(std::string_view model_id, std::string_view prompt_hash_hex);

struct ScoringOptions {
  Term term = Term::Short;
  std::string model_id = "offline-mock";
  bool strict_parse = false;  // lenient default: unparseable -> Unknown
};

struct ScoringStats {
  std::size_t scored = 0;
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t parse_fallbacks = 0;
};

// Cache-first scoring of one headline. Deterministic given a deterministic
// backend. Backend failures are rethrown with the story_id attached.
SentimentScore score_headline(const news::HeadlineRecord& record, ScorerBackend& backend,
                              ScoreCache& cache, const ScoringOptions& options,
                              ScoringStats* stats = nullptr);

}  // namespace nsp::scorer
