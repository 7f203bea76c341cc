#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace nsp {

using Date = std::chrono::year_month_day;

// An instant plus the UTC offset it was written with, so records can be
// re-emitted in their original wall-clock form.
struct Timestamp {
  std::chrono::sys_seconds instant{};
  std::int32_t offset_minutes = 0;

  friend auto operator<=>(const Timestamp& a, const Timestamp& b) {
    return a.instant <=> b.instant;
  }
  friend bool operator==(const Timestamp& a, const Timestamp& b) {
    return a.instant == b.instant;
  }
};

// Wall-clock civil time in some zone.
struct CivilTime {
  Date date{};
  int seconds_of_day = 0;
};

// Parses YYYY-MM-DD. Throws ValidationError on malformed or impossible dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

// Parses ISO-8601 with a mandatory offset: YYYY-MM-DDTHH:MM:SS[.fff](Z|±HH:MM).
// Fractional seconds are accepted and truncated.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(const Timestamp& ts);

// Parses HH:MM into seconds of day.
int parse_time_of_day(std::string_view text);

// IANA time zone backed by ICU. Conversion is instant -> civil wall clock,
// which is all the timing rule needs.
class TimeZone {
 public:
  explicit TimeZone(std::string iana_name);
  TimeZone(const TimeZone& other);
  TimeZone& operator=(const TimeZone& other);
  TimeZone(TimeZone&&) noexcept;
  TimeZone& operator=(TimeZone&&) noexcept;
  ~TimeZone();

  const std::string& name() const { return name_; }
  CivilTime to_civil(std::chrono::sys_seconds instant) const;

 private:
  struct Impl;
  std::string name_;
  std::unique_ptr<Impl> impl_;
  mutable std::mutex mutex_;  // UCalendar is not reentrant
};

inline std::chrono::sys_days to_days(Date d) { return std::chrono::sys_days{d}; }

}  // namespace nsp
