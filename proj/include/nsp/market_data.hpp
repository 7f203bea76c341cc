#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsp/io_util.hpp"
#include "nsp/time_util.hpp"

namespace nsp::market {

enum class Exchange { NYSE, AMEX, NASDAQ, OTHER };

Exchange parse_exchange(std::string_view token);
std::string_view exchange_name(Exchange e);

struct ReturnRecord {
  std::string firm_id;
  Date date{};
  double ret = 0.0;  // daily total return, decimal fraction, > -1
  std::optional<double> market_cap;
  int share_code = 0;
  Exchange exchange = Exchange::OTHER;
};

enum class SizeClass { Small, NonSmall };

std::string_view size_class_name(SizeClass c);

// Schema: firm_id, date, ret, market_cap, share_code, exchange.
// Validates every row; errors carry the line number and offending field.
std::vector<ReturnRecord> load_returns(std::istream& in, FileFormat format);

// Common stock (share code 10 or 11) on NYSE/AMEX/NASDAQ. Order-preserving
// and idempotent.
std::vector<ReturnRecord> filter_universe(const std::vector<ReturnRecord>& records);

// Nearest-rank 10th percentile of NYSE market caps on `date`: the k-th order
// statistic with k = ceil(0.10 * n). Throws EstimationError when no NYSE
// record with a market cap exists on that date.
double nyse_size_breakpoint(std::span<const ReturnRecord> records, Date date);

// Small iff market_cap < breakpoint (strict). Missing cap is an error.
SizeClass classify_size(const ReturnRecord& record, double breakpoint);

// Breakpoint per date, for every date with at least one capitalized NYSE record.
std::map<Date, double> daily_nyse_breakpoints(std::span<const ReturnRecord> records);

struct TradingCalendar {
  std::vector<Date> days;  // strictly increasing
  int close_seconds = 16 * 3600;
  TimeZone zone;

  bool is_trading_day(Date d) const;
  // Smallest trading day strictly after d. Throws ValidationError when none
  // remains in the calendar.
  Date next_trading_day(Date d) const;
  Date first_day() const { return days.front(); }
  Date last_day() const { return days.back(); }
};

// JSONL: a header object {"close_time": "HH:MM", "timezone": "<IANA name>"}
// followed by one {"date": "YYYY-MM-DD"} object per trading day.
TradingCalendar load_calendar(std::istream& in);

}  // namespace nsp::market
