#include "nsp/news_ingest.hpp"

#include <fmt/format.h>
#include <omp.h>
#include <unicode/unorm2.h>
#include <unicode/uchar.h>
#include <unicode/ustring.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "nsp/common.hpp"
#include "nsp/text_distance.hpp"

namespace nsp::news {

using nlohmann::json;

StoryType parse_story_type(std::string_view token) {
  if (token == "full_article") return StoryType::FullArticle;
  if (token == "press_release") return StoryType::PressRelease;
  if (token == "other") return StoryType::Other;
  throw ValidationError(fmt::format("unknown story_type '{}'", token));
}

std::string_view story_type_name(StoryType t) {
  switch (t) {
    case StoryType::FullArticle: return "full_article";
    case StoryType::PressRelease: return "press_release";
    case StoryType::Other: return "other";
  }
  return "other";
}

namespace {

const std::vector<std::string> kHeaderBase = {
    "story_id", "firm_id",  "firm_name", "published_at",          "headline",
    "relevance", "category", "event_similarity_days", "story_type"};

double parse_double_field(const std::string& s, std::size_t line, std::string_view field) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    throw ValidationError(
        fmt::format("line {}: field '{}' has non-numeric value '{}'", line, field, s));
  }
  return v;
}

int parse_int_field(const std::string& s, std::size_t line, std::string_view field) {
  const char* begin = s.c_str();
  char* end = nullptr;
  long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ValidationError(
        fmt::format("line {}: field '{}' has non-integer value '{}'", line, field, s));
  }
  return static_cast<int>(v);
}

void validate_headline(const HeadlineRecord& r, std::size_t line) {
  if (r.story_id.empty()) {
    throw ValidationError(fmt::format("line {}: field 'story_id' is empty", line));
  }
  if (r.firm_id.empty()) {
    throw ValidationError(fmt::format("line {}: field 'firm_id' is empty", line));
  }
  if (r.headline.empty()) {
    throw ValidationError(fmt::format("line {}: field 'headline' is empty", line));
  }
  if (r.relevance < 0 || r.relevance > 100) {
    throw ValidationError(fmt::format(
        "line {}: field 'relevance' value {} outside 0..100", line, r.relevance));
  }
  if (r.event_similarity_days < 0.0) {
    throw ValidationError(fmt::format(
        "line {}: field 'event_similarity_days' value {} is negative", line,
        r.event_similarity_days));
  }
}

json parse_json_line(const std::string& text, std::size_t line) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ValidationError(fmt::format("line {}: malformed JSON object", line));
  }
  return j;
}

std::string get_json_string(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ValidationError(fmt::format("line {}: field '{}' missing or not a string", line, key));
  }
  return j.at(key).get<std::string>();
}

double get_json_number(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError(fmt::format("line {}: field '{}' missing or not a number", line, key));
  }
  return j.at(key).get<double>();
}

HeadlineRecord headline_from_json(const json& j, std::size_t line) {
  HeadlineRecord r;
  r.story_id = get_json_string(j, "story_id", line);
  r.firm_id = get_json_string(j, "firm_id", line);
  r.firm_name = get_json_string(j, "firm_name", line);
  r.headline = get_json_string(j, "headline", line);
  r.category = get_json_string(j, "category", line);
  try {
    r.published_at = parse_timestamp(get_json_string(j, "published_at", line));
    r.story_type = parse_story_type(get_json_string(j, "story_type", line));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("line {}: {}", line, e.what()));
  }
  double rel = get_json_number(j, "relevance", line);
  if (rel != std::floor(rel)) {
    throw ValidationError(fmt::format("line {}: field 'relevance' must be an integer", line));
  }
  r.relevance = static_cast<int>(rel);
  r.event_similarity_days = get_json_number(j, "event_similarity_days", line);
  if (j.contains("vendor_sentiment") && !j.at("vendor_sentiment").is_null()) {
    r.vendor_sentiment = get_json_number(j, "vendor_sentiment", line);
  }
  return r;
}

}  // namespace

std::vector<HeadlineRecord> parse_headlines(std::istream& in, FileFormat format) {
  std::vector<HeadlineRecord> out;
  std::set<std::string> seen_ids;

  auto check_duplicate = [&](const HeadlineRecord& r, std::size_t line) {
    if (!seen_ids.insert(r.story_id).second) {
      throw ValidationError(
          fmt::format("line {}: duplicate story_id '{}'", line, r.story_id));
    }
  };

  if (format == FileFormat::Csv) {
    CsvReader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) return out;
    bool has_vendor;
    if (fields == kHeaderBase) {
      has_vendor = false;
    } else {
      auto extended = kHeaderBase;
      extended.push_back("vendor_sentiment");
      if (fields != extended) {
        throw ValidationError(fmt::format("line 1: headline header mismatch, expected '{}'",
                                          fmt::join(kHeaderBase, ",")));
      }
      has_vendor = true;
    }
    std::size_t want = kHeaderBase.size() + (has_vendor ? 1 : 0);
    while (reader.next(fields)) {
      std::size_t line = reader.line();
      if (fields.size() == 1 && fields[0].empty()) continue;
      if (fields.size() != want) {
        throw ValidationError(fmt::format("line {}: expected {} fields, got {}", line, want,
                                          fields.size()));
      }
      HeadlineRecord r;
      r.story_id = fields[0];
      r.firm_id = fields[1];
      r.firm_name = fields[2];
      r.headline = fields[4];
      r.category = fields[6];
      try {
        r.published_at = parse_timestamp(fields[3]);
        r.story_type = parse_story_type(fields[8]);
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("line {}: {}", line, e.what()));
      }
      r.relevance = parse_int_field(fields[5], line, "relevance");
      r.event_similarity_days = parse_double_field(fields[7], line, "event_similarity_days");
      if (has_vendor && !fields[9].empty()) {
        r.vendor_sentiment = parse_double_field(fields[9], line, "vendor_sentiment");
      }
      validate_headline(r, line);
      check_duplicate(r, line);
      out.push_back(std::move(r));
    }
  } else {
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.empty()) continue;
      HeadlineRecord r = headline_from_json(parse_json_line(text, line), line);
      validate_headline(r, line);
      check_duplicate(r, line);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<HeadlineRecord> filter_headlines(const std::vector<HeadlineRecord>& records) {
  std::vector<HeadlineRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    bool keep = r.relevance == 100 &&
                (r.story_type == StoryType::FullArticle ||
                 r.story_type == StoryType::PressRelease) &&
                r.category != "stock-gain" && r.category != "stock-loss" &&
                r.event_similarity_days > 90.0;
    if (keep) out.push_back(r);
  }
  return out;
}

namespace {

std::u16string to_utf16(std::string_view utf8) {
  std::u16string out(utf8.size() + 1, u'\0');
  UErrorCode ec = U_ZERO_ERROR;
  int32_t len = 0;
  u_strFromUTF8(out.data(), static_cast<int32_t>(out.size()), &len, utf8.data(),
                static_cast<int32_t>(utf8.size()), &ec);
  if (U_FAILURE(ec)) {
    throw ValidationError(fmt::format("headline is not valid UTF-8: {}", u_errorName(ec)));
  }
  out.resize(static_cast<std::size_t>(len));
  return out;
}

std::u16string nfc_normalize(const std::u16string& in) {
  UErrorCode ec = U_ZERO_ERROR;
  const UNormalizer2* nfc = unorm2_getNFCInstance(&ec);
  if (U_FAILURE(ec)) throw IoError("ICU NFC instance unavailable");
  std::u16string out(in.size() * 3 + 8, u'\0');
  int32_t len = unorm2_normalize(nfc, in.data(), static_cast<int32_t>(in.size()), out.data(),
                                 static_cast<int32_t>(out.size()), &ec);
  if (U_FAILURE(ec)) {
    throw ValidationError(fmt::format("NFC normalization failed: {}", u_errorName(ec)));
  }
  out.resize(static_cast<std::size_t>(len));
  return out;
}

std::u16string case_fold(const std::u16string& in) {
  UErrorCode ec = U_ZERO_ERROR;
  std::u16string out(in.size() * 3 + 8, u'\0');
  int32_t len = u_strFoldCase(out.data(), static_cast<int32_t>(out.size()), in.data(),
                              static_cast<int32_t>(in.size()), U_FOLD_CASE_DEFAULT, &ec);
  if (U_FAILURE(ec)) {
    throw ValidationError(fmt::format("case folding failed: {}", u_errorName(ec)));
  }
  out.resize(static_cast<std::size_t>(len));
  return out;
}

}  // namespace

std::string normalize_headline(std::string_view text) {
  std::u16string folded = case_fold(nfc_normalize(to_utf16(text)));

  // Collapse whitespace runs on scalar values, trimming both ends.
  std::u32string collapsed;
  collapsed.reserve(folded.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < folded.size()) {
    UChar32 cp;
    U16_NEXT(folded.data(), i, folded.size(), cp);
    if (u_isUWhiteSpace(cp)) {
      pending_space = !collapsed.empty();
      continue;
    }
    if (pending_space) {
      collapsed.push_back(U' ');
      pending_space = false;
    }
    collapsed.push_back(static_cast<char32_t>(cp));
  }
  return text::encode_utf8(collapsed);
}

namespace {

struct DedupGroup {
  std::vector<std::size_t> order;  // indices into records, (published_at, story_id) sorted
};

// Shared setup: grouping key -> visit order. The greedy scan itself is the
// kernel that differs between the serial and OpenMP paths.
std::vector<DedupGroup> build_groups(const std::vector<HeadlineRecord>& records,
                                     const std::map<std::string, Date>& effective_day) {
  std::map<std::pair<std::string, std::chrono::sys_days>, std::vector<std::size_t>> grouped;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = effective_day.find(records[i].story_id);
    if (it == effective_day.end()) {
      throw ValidationError(fmt::format(
          "dedup: no effective day supplied for story_id '{}'", records[i].story_id));
    }
    grouped[{records[i].firm_id, to_days(it->second)}].push_back(i);
  }
  std::vector<DedupGroup> groups;
  groups.reserve(grouped.size());
  for (auto& [key, idxs] : grouped) {
    std::sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
      if (records[a].published_at.instant != records[b].published_at.instant) {
        return records[a].published_at.instant < records[b].published_at.instant;
      }
      return records[a].story_id < records[b].story_id;
    });
    groups.push_back(DedupGroup{std::move(idxs)});
  }
  return groups;
}

// Greedy scan of one group: normalized-similarity against earlier kept records.
void scan_group(const std::vector<HeadlineRecord>& records, const DedupGroup& group,
                double threshold, std::vector<char>& keep) {
  std::vector<std::u32string> norm(group.order.size());
  for (std::size_t k = 0; k < group.order.size(); ++k) {
    norm[k] = text::decode_utf8(normalize_headline(records[group.order[k]].headline));
  }
  std::vector<std::size_t> kept_local;
  for (std::size_t k = 0; k < group.order.size(); ++k) {
    bool duplicate = false;
    for (std::size_t kk : kept_local) {
      if (text::similarity(norm[k], norm[kk]) > threshold) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) {
      keep[group.order[k]] = 0;
    } else {
      kept_local.push_back(k);
    }
  }
}

std::vector<HeadlineRecord> collect_kept(const std::vector<HeadlineRecord>& records,
                                         const std::vector<char>& keep,
                                         std::size_t n_groups, DedupStats* stats) {
  std::vector<HeadlineRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keep[i]) out.push_back(records[i]);
  }
  if (stats != nullptr) {
    stats->groups = n_groups;
    stats->kept = out.size();
    stats->dropped = records.size() - out.size();
  }
  return out;
}

void check_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError(
        fmt::format("similarity threshold {} outside [0, 1]", threshold));
  }
}

}  // namespace

std::vector<HeadlineRecord> dedup_firm_day(const std::vector<HeadlineRecord>& records,
                                           double threshold,
                                           const std::map<std::string, Date>& effective_day,
                                           int jobs, DedupStats* stats) {
  check_threshold(threshold);
  auto groups = build_groups(records, effective_day);
  std::vector<char> keep(records.size(), 1);

  const int nthreads = resolve_jobs(jobs);
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(groups.size()); ++g) {
    scan_group(records, groups[static_cast<std::size_t>(g)], threshold, keep);
  }

  return collect_kept(records, keep, groups.size(), stats);
}

std::vector<HeadlineRecord> dedup_firm_day_serial(
    const std::vector<HeadlineRecord>& records, double threshold,
    const std::map<std::string, Date>& effective_day, DedupStats* stats) {
  check_threshold(threshold);
  auto groups = build_groups(records, effective_day);
  std::vector<char> keep(records.size(), 1);
  for (const auto& group : groups) {
    scan_group(records, group, threshold, keep);
  }
  return collect_kept(records, keep, groups.size(), stats);
}

}  // namespace nsp::news
