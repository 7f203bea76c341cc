#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsp/io_util.hpp"
#include "nsp/time_util.hpp"

namespace nsp::news {

enum class StoryType { FullArticle, PressRelease, Other };

StoryType parse_story_type(std::string_view token);
std::string_view story_type_name(StoryType t);

struct HeadlineRecord {
  std::string story_id;
  std::string firm_id;
  std::string firm_name;
  Timestamp published_at{};
  std::string headline;
  int relevance = 0;  // 0..100
  std::string category;
  double event_similarity_days = 0.0;
  StoryType story_type = StoryType::Other;
  // Vendor-assigned sentiment for the same headline, treated as an opaque
  // real-valued column. Optional tenth field of the feed schema.
  std::optional<double> vendor_sentiment;
};

// Schema: story_id, firm_id, firm_name, published_at, headline, relevance,
// category, event_similarity_days, story_type[, vendor_sentiment].
std::vector<HeadlineRecord> parse_headlines(std::istream& in, FileFormat format);

// relevance == 100, full articles and press releases only, categories
// stock-gain/stock-loss excluded, event_similarity_days strictly above 90.
std::vector<HeadlineRecord> filter_headlines(const std::vector<HeadlineRecord>& records);

// Dedup text normalization: Unicode NFC, full case fold, whitespace runs
// collapsed to single spaces, ends trimmed.
std::string normalize_headline(std::string_view text);

struct DedupStats {
  std::size_t groups = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

// Greedy per-(firm, day) dedup. Within each group, records are visited in
// (published_at, story_id) order and dropped iff their normalized OSA
// similarity to an earlier kept record exceeds `threshold`. Output preserves
// the input order of kept records. `effective_day` must map every story_id
// to its grouping day.
std::vector<HeadlineRecord> dedup_firm_day(const std::vector<HeadlineRecord>& records,
                                           double threshold,
                                           const std::map<std::string, Date>& effective_day,
                                           int jobs = 0, DedupStats* stats = nullptr);

// Single-threaded reference implementation with identical semantics, kept for
// equivalence tests and the kernel benchmark.
std::vector<HeadlineRecord> dedup_firm_day_serial(
    const std::vector<HeadlineRecord>& records, double threshold,
    const std::map<std::string, Date>& effective_day, DedupStats* stats = nullptr);

}  // namespace nsp::news
