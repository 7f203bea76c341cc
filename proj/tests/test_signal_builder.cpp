#include <doctest.h>

#include <sstream>

#include "nsp/common.hpp"
#include "nsp/signal_builder.hpp"

using namespace nsp;
using market::TradingCalendar;
using signal::ScoredHeadline;
using signal::TimingOptions;

namespace {

// Mon 2023-01-02 .. Fri 2023-01-06 with Thursday missing, then Mon 2023-01-09.
TradingCalendar test_calendar() {
  std::istringstream in(
      "{\"close_time\":\"16:00\",\"timezone\":\"America/New_York\"}\n"
      "{\"date\":\"2023-01-02\"}\n"
      "{\"date\":\"2023-01-03\"}\n"
      "{\"date\":\"2023-01-04\"}\n"
      "{\"date\":\"2023-01-06\"}\n"
      "{\"date\":\"2023-01-09\"}\n");
  return market::load_calendar(in);
}

ScoredHeadline scored(const std::string& id, const std::string& firm, const std::string& when,
                      int score, std::optional<double> vendor = std::nullopt) {
  ScoredHeadline s;
  s.record.story_id = id;
  s.record.firm_id = firm;
  s.record.firm_name = "Firm " + firm;
  s.record.published_at = parse_timestamp(when);
  s.record.headline = "headline " + id;
  s.record.vendor_sentiment = vendor;
  s.score = score;
  return s;
}

market::ReturnRecord ret_row(const std::string& firm, const std::string& date, double ret,
                             std::optional<double> cap = std::nullopt) {
  market::ReturnRecord r;
  r.firm_id = firm;
  r.date = parse_date(date);
  r.ret = ret;
  r.market_cap = cap;
  r.share_code = 10;
  r.exchange = market::Exchange::NYSE;
  return r;
}

}  // namespace

TEST_CASE("effective date: the close splits same-day from next-day") {
  auto cal = test_calendar();
  auto eff = [&](const char* ts) {
    return format_date(signal::assign_effective_date(parse_timestamp(ts), cal));
  };

  CHECK(eff("2023-01-03T10:30:00-05:00") == "2023-01-03");  // intraday
  CHECK(eff("2023-01-03T16:00:00-05:00") == "2023-01-03");  // exactly at close
  CHECK(eff("2023-01-03T16:00:01-05:00") == "2023-01-04");  // one second later
  CHECK(eff("2023-01-03T07:00:00-05:00") == "2023-01-03");  // pre-open, tradable at open
  CHECK(eff("2023-01-03T00:00:00-05:00") == "2023-01-03");  // midnight
}

TEST_CASE("effective date: non-trading days roll forward") {
  auto cal = test_calendar();
  auto eff = [&](const char* ts) {
    return format_date(signal::assign_effective_date(parse_timestamp(ts), cal));
  };

  CHECK(eff("2023-01-05T11:00:00-05:00") == "2023-01-06");  // mid-week holiday
  CHECK(eff("2023-01-07T12:00:00-05:00") == "2023-01-09");  // Saturday
  CHECK(eff("2023-01-08T12:00:00-05:00") == "2023-01-09");  // Sunday
  CHECK(eff("2023-01-06T18:00:00-05:00") == "2023-01-09");  // Friday evening
}

TEST_CASE("effective date: offsets are resolved in the exchange zone") {
  auto cal = test_calendar();
  // 21:30Z on Jan 3 is 16:30 in New York: after the close.
  auto eff = signal::assign_effective_date(parse_timestamp("2023-01-03T21:30:00Z"), cal);
  CHECK(format_date(eff) == "2023-01-04");
  // 20:55Z is 15:55 in New York: before the close.
  auto eff2 = signal::assign_effective_date(parse_timestamp("2023-01-03T20:55:00Z"), cal);
  CHECK(format_date(eff2) == "2023-01-03");
}

TEST_CASE("effective date: extra lag shifts whole sessions") {
  auto cal = test_calendar();
  TimingOptions lag1;
  lag1.extra_lag_days = 1;
  auto eff =
      signal::assign_effective_date(parse_timestamp("2023-01-03T10:00:00-05:00"), cal, lag1);
  CHECK(format_date(eff) == "2023-01-04");
  // Lag crosses the missing Thursday.
  auto eff2 =
      signal::assign_effective_date(parse_timestamp("2023-01-04T10:00:00-05:00"), cal, lag1);
  CHECK(format_date(eff2) == "2023-01-06");
}

TEST_CASE("effective date: instants outside the calendar are rejected") {
  auto cal = test_calendar();
  CHECK_THROWS_AS(
      signal::assign_effective_date(parse_timestamp("2022-12-30T10:00:00-05:00"), cal),
      ValidationError);
  // After the close of the last session there is no next trading day.
  CHECK_THROWS_AS(
      signal::assign_effective_date(parse_timestamp("2023-01-09T19:00:00-05:00"), cal),
      ValidationError);
}

TEST_CASE("aggregate averages scores per firm-day, zeros included") {
  auto cal = test_calendar();
  std::vector<ScoredHeadline> rows{
      scored("S1", "F1", "2023-01-03T10:00:00-05:00", 1, 0.8),
      scored("S2", "F1", "2023-01-03T11:00:00-05:00", 0),
      scored("S3", "F1", "2023-01-03T12:00:00-05:00", -1, -0.4),
      scored("S4", "F1", "2023-01-03T17:00:00-05:00", 1),   // after close -> Jan 4
      scored("S5", "F0", "2023-01-03T10:00:00-05:00", -1),  // other firm
  };
  auto signals = signal::aggregate_firm_day(rows, cal);
  REQUIRE(signals.size() == 3);

  // Sorted by firm then date.
  CHECK(signals[0].firm_id == "F0");
  CHECK(signals[1].firm_id == "F1");
  CHECK(format_date(signals[1].effective_date) == "2023-01-03");
  CHECK(signals[2].firm_id == "F1");
  CHECK(format_date(signals[2].effective_date) == "2023-01-04");

  // Mean over {1, 0, -1} = 0; the 0 participates.
  CHECK(signals[1].chatgpt_score == doctest::Approx(0.0));
  CHECK(signals[1].n_headlines == 3);
  // Vendor mean over the two rows that carry one.
  REQUIRE(signals[1].vendor_score.has_value());
  CHECK(*signals[1].vendor_score == doctest::Approx(0.2));
  CHECK(!signals[2].vendor_score.has_value());

  // Input order does not matter.
  std::vector<ScoredHeadline> shuffled{rows[3], rows[1], rows[4], rows[0], rows[2]};
  auto signals2 = signal::aggregate_firm_day(shuffled, cal);
  REQUIRE(signals2.size() == signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) {
    CHECK(signals2[i].firm_id == signals[i].firm_id);
    CHECK(signals2[i].chatgpt_score == signals[i].chatgpt_score);
    CHECK(signals2[i].n_headlines == signals[i].n_headlines);
  }
}

TEST_CASE("build_panel joins signals with returns and classifies size") {
  auto cal = test_calendar();
  std::vector<ScoredHeadline> rows{
      scored("S1", "F1", "2023-01-03T10:00:00-05:00", 1),
      scored("S2", "F2", "2023-01-03T10:00:00-05:00", -1),
      scored("S3", "F3", "2023-01-03T10:00:00-05:00", 1),  // no return row
  };
  auto signals = signal::aggregate_firm_day(rows, cal);

  std::vector<market::ReturnRecord> returns{
      ret_row("F1", "2023-01-03", 0.01, 50.0),
      ret_row("F2", "2023-01-03", -0.02, 500.0),
      ret_row("F1", "2023-01-02", 0.005, 50.0),  // other day, ignored by the join
  };
  std::map<Date, double> breakpoints{{parse_date("2023-01-03"), 100.0}};

  signal::PanelBuildStats stats;
  auto panel = signal::build_panel(signals, returns, breakpoints, &stats);
  REQUIRE(panel.size() == 2);
  CHECK(panel[0].firm_id == "F1");
  CHECK(panel[0].ret_next == doctest::Approx(0.01));
  CHECK(panel[0].chatgpt_score == doctest::Approx(1.0));
  REQUIRE(panel[0].size_class.has_value());
  CHECK(*panel[0].size_class == market::SizeClass::Small);
  CHECK(panel[0].market_cap == doctest::Approx(50.0));
  CHECK(panel[1].firm_id == "F2");
  REQUIRE(panel[1].size_class.has_value());
  CHECK(*panel[1].size_class == market::SizeClass::NonSmall);

  CHECK(stats.signals_total == 3);
  CHECK(stats.matched == 2);
  CHECK(stats.dropped_no_return == 1);
  CHECK(stats.unclassified_size == 0);
}

TEST_CASE("build_panel leaves rows unclassified without a breakpoint or cap") {
  auto cal = test_calendar();
  std::vector<ScoredHeadline> rows{
      scored("S1", "F1", "2023-01-03T10:00:00-05:00", 1),
      scored("S2", "F2", "2023-01-04T10:00:00-05:00", 1),
  };
  auto signals = signal::aggregate_firm_day(rows, cal);
  std::vector<market::ReturnRecord> returns{
      ret_row("F1", "2023-01-03", 0.01),  // no market cap
      ret_row("F2", "2023-01-04", 0.02, 300.0),
  };
  // Breakpoint exists for Jan 3 only.
  std::map<Date, double> breakpoints{{parse_date("2023-01-03"), 100.0}};

  signal::PanelBuildStats stats;
  auto panel = signal::build_panel(signals, returns, breakpoints, &stats);
  REQUIRE(panel.size() == 2);
  CHECK(!panel[0].size_class.has_value());
  CHECK(!panel[1].size_class.has_value());
  CHECK(stats.unclassified_size == 2);
}

TEST_CASE("build_panel rejects duplicate return rows") {
  auto cal = test_calendar();
  auto signals = signal::aggregate_firm_day(
      {scored("S1", "F1", "2023-01-03T10:00:00-05:00", 1)}, cal);
  std::vector<market::ReturnRecord> returns{
      ret_row("F1", "2023-01-03", 0.01, 50.0),
      ret_row("F1", "2023-01-03", 0.02, 50.0),
  };
  CHECK_THROWS_AS(signal::build_panel(signals, returns, {}), ValidationError);
}

TEST_CASE("build_panel output is sorted by firm then date") {
  auto cal = test_calendar();
  std::vector<ScoredHeadline> rows{
      scored("S1", "F2", "2023-01-04T10:00:00-05:00", 1),
      scored("S2", "F1", "2023-01-04T10:00:00-05:00", 1),
      scored("S3", "F2", "2023-01-03T10:00:00-05:00", 1),
  };
  auto signals = signal::aggregate_firm_day(rows, cal);
  std::vector<market::ReturnRecord> returns{
      ret_row("F1", "2023-01-04", 0.01, 100.0),
      ret_row("F2", "2023-01-03", 0.02, 100.0),
      ret_row("F2", "2023-01-04", 0.03, 100.0),
  };
  auto panel = signal::build_panel(signals, returns, {});
  REQUIRE(panel.size() == 3);
  CHECK(panel[0].firm_id == "F1");
  CHECK(panel[1].firm_id == "F2");
  CHECK(format_date(panel[1].date) == "2023-01-03");
  CHECK(panel[2].firm_id == "F2");
  CHECK(format_date(panel[2].date) == "2023-01-04");
}
