#include "nsp/market_data.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "nsp/common.hpp"

namespace nsp::market {

using nlohmann::json;

Exchange parse_exchange(std::string_view token) {
  if (token == "NYSE") return Exchange::NYSE;
  if (token == "AMEX") return Exchange::AMEX;
  if (token == "NASDAQ") return Exchange::NASDAQ;
  if (token == "OTHER") return Exchange::OTHER;
  throw ValidationError(fmt::format("unknown exchange '{}'", token));
}

std::string_view exchange_name(Exchange e) {
  switch (e) {
    case Exchange::NYSE: return "NYSE";
    case Exchange::AMEX: return "AMEX";
    case Exchange::NASDAQ: return "NASDAQ";
    case Exchange::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::string_view size_class_name(SizeClass c) {
  return c == SizeClass::Small ? "small" : "non_small";
}

namespace {

const std::vector<std::string> kReturnsHeader = {"firm_id", "date",       "ret",
                                                 "market_cap", "share_code", "exchange"};

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

void validate_return(ReturnRecord& r, std::size_t line) {
  if (r.firm_id.empty()) {
    throw ValidationError(fmt::format("line {}: field 'firm_id' is empty", line));
  }
  if (!(r.ret > -1.0)) {
    throw ValidationError(
        fmt::format("line {}: field 'ret' value {} violates ret > -1", line, r.ret));
  }
  if (r.market_cap && !(*r.market_cap > 0.0)) {
    throw ValidationError(fmt::format(
        "line {}: field 'market_cap' value {} must be strictly positive", line,
        *r.market_cap));
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

ReturnRecord return_from_json(const json& j, std::size_t line) {
  ReturnRecord r;
  r.firm_id = get_json_string(j, "firm_id", line);
  try {
    r.date = parse_date(get_json_string(j, "date", line));
    r.exchange = parse_exchange(get_json_string(j, "exchange", line));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("line {}: {}", line, e.what()));
  }
  r.ret = get_json_number(j, "ret", line);
  if (j.contains("market_cap") && !j.at("market_cap").is_null()) {
    r.market_cap = get_json_number(j, "market_cap", line);
  }
  double sc = get_json_number(j, "share_code", line);
  if (sc != std::floor(sc)) {
    throw ValidationError(fmt::format("line {}: field 'share_code' must be an integer", line));
  }
  r.share_code = static_cast<int>(sc);
  return r;
}

}  // namespace

std::vector<ReturnRecord> load_returns(std::istream& in, FileFormat format) {
  std::vector<ReturnRecord> out;
  std::set<std::pair<std::string, std::chrono::sys_days>> seen;

  auto check_duplicate = [&](const ReturnRecord& r, std::size_t line) {
    if (!seen.emplace(r.firm_id, to_days(r.date)).second) {
      throw ValidationError(fmt::format("line {}: duplicate (firm_id, date) = ({}, {})",
                                        line, r.firm_id, format_date(r.date)));
    }
  };

  if (format == FileFormat::Csv) {
    CsvReader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) return out;
    if (fields != kReturnsHeader) {
      throw ValidationError(fmt::format(
          "line 1: returns header mismatch, expected '{}'", fmt::join(kReturnsHeader, ",")));
    }
    while (reader.next(fields)) {
      std::size_t line = reader.line();
      if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
      if (fields.size() != kReturnsHeader.size()) {
        throw ValidationError(fmt::format("line {}: expected {} fields, got {}", line,
                                          kReturnsHeader.size(), fields.size()));
      }
      ReturnRecord r;
      r.firm_id = fields[0];
      try {
        r.date = parse_date(fields[1]);
        r.exchange = parse_exchange(fields[5]);
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("line {}: {}", line, e.what()));
      }
      r.ret = parse_double_field(fields[2], line, "ret");
      if (!fields[3].empty()) {
        r.market_cap = parse_double_field(fields[3], line, "market_cap");
      }
      r.share_code = parse_int_field(fields[4], line, "share_code");
      validate_return(r, line);
      check_duplicate(r, line);
      out.push_back(std::move(r));
    }
  } else {
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.empty()) continue;
      ReturnRecord r = return_from_json(parse_json_line(text, line), line);
      validate_return(r, line);
      check_duplicate(r, line);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<ReturnRecord> filter_universe(const std::vector<ReturnRecord>& records) {
  std::vector<ReturnRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    bool common_stock = r.share_code == 10 || r.share_code == 11;
    bool listed = r.exchange == Exchange::NYSE || r.exchange == Exchange::AMEX ||
                  r.exchange == Exchange::NASDAQ;
    if (common_stock && listed) out.push_back(r);
  }
  return out;
}

double nyse_size_breakpoint(std::span<const ReturnRecord> records, Date date) {
  std::vector<double> caps;
  for (const auto& r : records) {
    if (r.exchange == Exchange::NYSE && r.date == date && r.market_cap) {
      caps.push_back(*r.market_cap);
    }
  }
  if (caps.empty()) {
    throw EstimationError(fmt::format(
        "size breakpoint undefined: no NYSE record with market cap on {}", format_date(date)));
  }
  // Nearest rank: k-th order statistic, k = ceil(0.10 * n).
  std::size_t n = caps.size();
  std::size_t k = (n + 9) / 10;
  std::nth_element(caps.begin(), caps.begin() + static_cast<std::ptrdiff_t>(k - 1), caps.end());
  return caps[k - 1];
}

SizeClass classify_size(const ReturnRecord& record, double breakpoint) {
  if (!record.market_cap) {
    throw ValidationError(fmt::format("cannot classify size of ({}, {}): missing market cap",
                                      record.firm_id, format_date(record.date)));
  }
  return *record.market_cap < breakpoint ? SizeClass::Small : SizeClass::NonSmall;
}

std::map<Date, double> daily_nyse_breakpoints(std::span<const ReturnRecord> records) {
  std::set<std::chrono::sys_days> dates;
  for (const auto& r : records) {
    if (r.exchange == Exchange::NYSE && r.market_cap) dates.insert(to_days(r.date));
  }
  std::map<Date, double> out;
  for (auto d : dates) {
    Date date{d};
    out.emplace(date, nyse_size_breakpoint(records, date));
  }
  return out;
}

bool TradingCalendar::is_trading_day(Date d) const {
  return std::binary_search(days.begin(), days.end(), d,
                            [](Date a, Date b) { return to_days(a) < to_days(b); });
}

Date TradingCalendar::next_trading_day(Date d) const {
  auto it = std::upper_bound(days.begin(), days.end(), d,
                             [](Date a, Date b) { return to_days(a) < to_days(b); });
  if (it == days.end()) {
    throw ValidationError(fmt::format("no trading day after {} in calendar (ends {})",
                                      format_date(d), format_date(days.back())));
  }
  return *it;
}

TradingCalendar load_calendar(std::istream& in) {
  std::string text;
  std::size_t line = 0;
  std::optional<int> close_seconds;
  std::optional<std::string> zone_name;
  std::vector<Date> days;

  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    json j = parse_json_line(text, line);
    if (line == 1) {
      close_seconds = parse_time_of_day(get_json_string(j, "close_time", line));
      zone_name = get_json_string(j, "timezone", line);
      continue;
    }
    Date d;
    try {
      d = parse_date(get_json_string(j, "date", line));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("line {}: {}", line, e.what()));
    }
    if (!days.empty() && to_days(d) <= to_days(days.back())) {
      throw ValidationError(
          fmt::format("line {}: calendar dates must be strictly increasing", line));
    }
    days.push_back(d);
  }
  if (!close_seconds || !zone_name) {
    throw ValidationError("calendar file missing header object with close_time and timezone");
  }
  if (days.empty()) {
    throw ValidationError("calendar file contains no trading days");
  }
  return TradingCalendar{std::move(days), *close_seconds, TimeZone(*zone_name)};
}

}  // namespace nsp::market
