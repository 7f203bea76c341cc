#include "nsp/time_util.hpp"

#include <fmt/format.h>
#include <unicode/ucal.h>
#include <unicode/ustring.h>

#include <cctype>
#include <cstdlib>
#include <vector>

#include "nsp/common.hpp"

namespace nsp {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

int parse_int_field(std::string_view s, std::string_view what) {
  if (!all_digits(s)) {
    throw ValidationError(fmt::format("malformed {} component '{}'", what, s));
  }
  return std::atoi(std::string(s).c_str());
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw ValidationError(fmt::format("malformed date '{}', expected YYYY-MM-DD", text));
  }
  int y = parse_int_field(text.substr(0, 4), "year");
  int m = parse_int_field(text.substr(5, 2), "month");
  int d = parse_int_field(text.substr(8, 2), "day");
  Date date = std::chrono::year{y} / m / d;
  if (!date.ok()) {
    throw ValidationError(fmt::format("impossible calendar date '{}'", text));
  }
  return date;
}

std::string format_date(Date d) {
  return fmt::format("{:04}-{:02}-{:02}", int(d.year()), unsigned(d.month()),
                     unsigned(d.day()));
}

int parse_time_of_day(std::string_view text) {
  if (text.size() != 5 || text[2] != ':') {
    throw ValidationError(fmt::format("malformed time '{}', expected HH:MM", text));
  }
  int h = parse_int_field(text.substr(0, 2), "hour");
  int m = parse_int_field(text.substr(3, 2), "minute");
  if (h > 23 || m > 59) {
    throw ValidationError(fmt::format("time of day '{}' out of range", text));
  }
  return h * 3600 + m * 60;
}

Timestamp parse_timestamp(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS[.fff](Z|±HH:MM)
  auto bad = [&]() -> ValidationError {
    return ValidationError(fmt::format(
        "malformed timestamp '{}', expected ISO-8601 with offset", text));
  };
  if (text.size() < 20) throw bad();
  if (text[10] != 'T') throw bad();
  Date date = parse_date(text.substr(0, 10));
  std::string_view rest = text.substr(11);
  if (rest.size() < 9 || rest[2] != ':' || rest[5] != ':') throw bad();
  int h = parse_int_field(rest.substr(0, 2), "hour");
  int mi = parse_int_field(rest.substr(3, 2), "minute");
  int s = parse_int_field(rest.substr(6, 2), "second");
  if (h > 23 || mi > 59 || s > 60) throw bad();
  std::size_t pos = 8;
  if (pos < rest.size() && rest[pos] == '.') {
    ++pos;
    std::size_t start = pos;
    while (pos < rest.size() && std::isdigit(static_cast<unsigned char>(rest[pos]))) ++pos;
    if (pos == start) throw bad();
  }
  if (pos >= rest.size()) throw bad();
  int offset_minutes = 0;
  if (rest[pos] == 'Z') {
    if (pos + 1 != rest.size()) throw bad();
  } else if (rest[pos] == '+' || rest[pos] == '-') {
    int sign = rest[pos] == '+' ? 1 : -1;
    std::string_view off = rest.substr(pos + 1);
    if (off.size() != 5 || off[2] != ':') throw bad();
    int oh = parse_int_field(off.substr(0, 2), "offset hour");
    int om = parse_int_field(off.substr(3, 2), "offset minute");
    if (oh > 18 || om > 59) throw bad();
    offset_minutes = sign * (oh * 60 + om);
  } else {
    throw bad();
  }

  using namespace std::chrono;
  sys_seconds local = sys_days{date} + hours{h} + minutes{mi} + seconds{s == 60 ? 59 : s};
  Timestamp ts;
  ts.instant = local - minutes{offset_minutes};
  ts.offset_minutes = offset_minutes;
  return ts;
}

std::string format_timestamp(const Timestamp& ts) {
  using namespace std::chrono;
  sys_seconds local = ts.instant + minutes{ts.offset_minutes};
  sys_days day = floor<days>(local);
  Date ymd{day};
  auto tod = (local - day).count();
  int h = static_cast<int>(tod / 3600);
  int mi = static_cast<int>((tod % 3600) / 60);
  int s = static_cast<int>(tod % 60);
  std::string off;
  if (ts.offset_minutes == 0) {
    off = "Z";
  } else {
    int om = ts.offset_minutes;
    char sign = om < 0 ? '-' : '+';
    om = std::abs(om);
    off = fmt::format("{}{:02}:{:02}", sign, om / 60, om % 60);
  }
  return fmt::format("{}T{:02}:{:02}:{:02}{}", format_date(ymd), h, mi, s, off);
}

struct TimeZone::Impl {
  UCalendar* cal = nullptr;
  ~Impl() {
    if (cal != nullptr) ucal_close(cal);
  }
};

namespace {

UCalendar* open_calendar(const std::string& name) {
  std::vector<UChar> uname(name.size() + 1, 0);
  for (std::size_t i = 0; i < name.size(); ++i) {
    uname[i] = static_cast<UChar>(static_cast<unsigned char>(name[i]));
  }
  UErrorCode ec = U_ZERO_ERROR;
  UCalendar* cal = ucal_open(uname.data(), static_cast<int32_t>(name.size()),
                             "en_US", UCAL_GREGORIAN, &ec);
  if (U_FAILURE(ec) || cal == nullptr) {
    throw ValidationError(fmt::format("cannot open time zone '{}': {}", name,
                                      u_errorName(ec)));
  }
  // ICU silently falls back to Etc/Unknown for unrecognized ids.
  UChar got[64];
  ec = U_ZERO_ERROR;
  int32_t len = ucal_getTimeZoneID(cal, got, 64, &ec);
  std::string resolved;
  for (int32_t i = 0; i < len && U_SUCCESS(ec); ++i) resolved.push_back(static_cast<char>(got[i]));
  if (U_FAILURE(ec) || resolved == "Etc/Unknown") {
    ucal_close(cal);
    throw ValidationError(fmt::format("unknown IANA time zone '{}'", name));
  }
  return cal;
}

}  // namespace

TimeZone::TimeZone(std::string iana_name)
    : name_(std::move(iana_name)), impl_(std::make_unique<Impl>()) {
  impl_->cal = open_calendar(name_);
}

TimeZone::TimeZone(const TimeZone& other) : name_(other.name_), impl_(std::make_unique<Impl>()) {
  impl_->cal = open_calendar(name_);
}

TimeZone& TimeZone::operator=(const TimeZone& other) {
  if (this != &other) {
    auto fresh = std::make_unique<Impl>();
    fresh->cal = open_calendar(other.name_);
    name_ = other.name_;
    impl_ = std::move(fresh);
  }
  return *this;
}

// Moves transfer the calendar handle; each object keeps its own mutex.
TimeZone::TimeZone(TimeZone&& other) noexcept
    : name_(std::move(other.name_)), impl_(std::move(other.impl_)) {}

TimeZone& TimeZone::operator=(TimeZone&& other) noexcept {
  if (this != &other) {
    name_ = std::move(other.name_);
    impl_ = std::move(other.impl_);
  }
  return *this;
}
TimeZone::~TimeZone() = default;

CivilTime TimeZone::to_civil(std::chrono::sys_seconds instant) const {
  std::lock_guard<std::mutex> lock(mutex_);
  UErrorCode ec = U_ZERO_ERROR;
  ucal_setMillis(impl_->cal, static_cast<UDate>(instant.time_since_epoch().count()) * 1000.0,
                 &ec);
  int32_t y = ucal_get(impl_->cal, UCAL_YEAR, &ec);
  int32_t mo = ucal_get(impl_->cal, UCAL_MONTH, &ec) + 1;  // UCAL_MONTH is 0-based
  int32_t d = ucal_get(impl_->cal, UCAL_DATE, &ec);
  int32_t h = ucal_get(impl_->cal, UCAL_HOUR_OF_DAY, &ec);
  int32_t mi = ucal_get(impl_->cal, UCAL_MINUTE, &ec);
  int32_t s = ucal_get(impl_->cal, UCAL_SECOND, &ec);
  if (U_FAILURE(ec)) {
    throw IoError(fmt::format("time zone conversion failed in '{}': {}", name_,
                              u_errorName(ec)));
  }
  CivilTime civil;
  civil.date = std::chrono::year{y} / mo / d;
  civil.seconds_of_day = h * 3600 + mi * 60 + s;
  return civil;
}

}  // namespace nsp
