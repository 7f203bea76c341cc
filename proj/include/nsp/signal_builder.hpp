#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsp/market_data.hpp"
#include "nsp/news_ingest.hpp"
#include "nsp/sentiment.hpp"
#include "nsp/time_util.hpp"

namespace nsp::signal {

struct TimingOptions {
  // Extra sessions of delay on top of the after-close shift. 0 means a signal
  // is matched to the first session during which it is tradable.
  int extra_lag_days = 0;
};

// Maps a publication instant to the first trading session whose return the
// story may predict: trading day d at or before the close -> d (pre-open news
// is tradable at that day's open), anything later -> the next trading day.
// Throws ValidationError when the instant falls outside the calendar.
Date assign_effective_date(const Timestamp& published_at, const market::TradingCalendar& calendar,
                           const TimingOptions& options = {});

struct ScoredHeadline {
  news::HeadlineRecord record;
  int score = 0;  // -1, 0, +1
};

struct FirmDaySignal {
  std::string firm_id;
  Date effective_date{};
  double chatgpt_score = 0.0;              // mean of constituent scores, in [-1, +1]
  std::optional<double> vendor_score;      // mean over headlines that carry one
  int n_headlines = 0;
};

// Groups by (firm_id, effective date) and averages. Scores 0 participate in
// the mean. Output sorted by (firm_id, effective_date); group members are
// summed in story_id order so the result is invariant to input order.
std::vector<FirmDaySignal> aggregate_firm_day(const std::vector<ScoredHeadline>& scored,
                                              const market::TradingCalendar& calendar,
                                              const TimingOptions& options = {});

struct PanelObservation {
  std::string firm_id;
  Date date{};                         // session whose return is predicted
  double ret_next = 0.0;               // return realized on `date`
  double chatgpt_score = 0.0;
  std::optional<double> vendor_score;
  std::optional<market::SizeClass> size_class;
  std::optional<double> market_cap;    // weight for value-weighted portfolios
};

struct PanelBuildStats {
  std::size_t signals_total = 0;
  std::size_t matched = 0;
  std::size_t dropped_no_return = 0;  // signals_total = matched + dropped_no_return
  std::size_t unclassified_size = 0;  // matched rows without a size class
};

// Inner join of signals and returns on (firm_id, effective_date == date).
// Size classes come from the per-date NYSE breakpoints; rows whose date has
// no breakpoint or whose return record has no market cap stay unclassified.
std::vector<PanelObservation> build_panel(const std::vector<FirmDaySignal>& signals,
                                          const std::vector<market::ReturnRecord>& returns,
                                          const std::map<Date, double>& breakpoints,
                                          PanelBuildStats* stats = nullptr);

}  // namespace nsp::signal
