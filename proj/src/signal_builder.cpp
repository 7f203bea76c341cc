#include "nsp/signal_builder.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "nsp/common.hpp"

namespace nsp::signal {

Date assign_effective_date(const Timestamp& published_at, const market::TradingCalendar& calendar,
                           const TimingOptions& options) {
  if (options.extra_lag_days < 0) {
    throw ValidationError("extra_lag_days must be non-negative");
  }
  CivilTime civil = calendar.zone.to_civil(published_at.instant);
  if (to_days(civil.date) < to_days(calendar.first_day())) {
    throw ValidationError(fmt::format("timestamp {} precedes the calendar (starts {})",
                                      format_timestamp(published_at),
                                      format_date(calendar.first_day())));
  }
  Date effective;
  if (calendar.is_trading_day(civil.date) && civil.seconds_of_day <= calendar.close_seconds) {
    effective = civil.date;
  } else {
    effective = calendar.next_trading_day(civil.date);
  }
  for (int i = 0; i < options.extra_lag_days; ++i) {
    effective = calendar.next_trading_day(effective);
  }
  return effective;
}

std::vector<FirmDaySignal> aggregate_firm_day(const std::vector<ScoredHeadline>& scored,
                                              const market::TradingCalendar& calendar,
                                              const TimingOptions& options) {
  struct Member {
    std::string story_id;
    int score;
    std::optional<double> vendor;
  };
  std::map<std::pair<std::string, std::chrono::sys_days>, std::vector<Member>> groups;
  for (const ScoredHeadline& sh : scored) {
    if (sh.score < -1 || sh.score > 1) {
      throw ValidationError(fmt::format("story {}: score {} outside [-1, +1]",
                                        sh.record.story_id, sh.score));
    }
    Date effective = assign_effective_date(sh.record.published_at, calendar, options);
    groups[{sh.record.firm_id, to_days(effective)}].push_back(
        Member{sh.record.story_id, sh.score, sh.record.vendor_sentiment});
  }

  std::vector<FirmDaySignal> signals;
  signals.reserve(groups.size());
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const Member& a, const Member& b) { return a.story_id < b.story_id; });
    long score_sum = 0;
    double vendor_sum = 0.0;
    int vendor_n = 0;
    for (const Member& m : members) {
      score_sum += m.score;
      if (m.vendor.has_value()) {
        vendor_sum += *m.vendor;
        ++vendor_n;
      }
    }
    FirmDaySignal sig;
    sig.firm_id = key.first;
    sig.effective_date = Date{key.second};
    sig.chatgpt_score = static_cast<double>(score_sum) / static_cast<double>(members.size());
    if (vendor_n > 0) sig.vendor_score = vendor_sum / vendor_n;
    sig.n_headlines = static_cast<int>(members.size());
    signals.push_back(std::move(sig));
  }
  return signals;  // map iteration already yields (firm_id, date) order
}

std::vector<PanelObservation> build_panel(const std::vector<FirmDaySignal>& signals,
                                          const std::vector<market::ReturnRecord>& returns,
                                          const std::map<Date, double>& breakpoints,
                                          PanelBuildStats* stats) {
  std::map<std::pair<std::string, std::chrono::sys_days>, const market::ReturnRecord*> by_key;
  for (const market::ReturnRecord& r : returns) {
    auto [it, inserted] = by_key.try_emplace({r.firm_id, to_days(r.date)}, &r);
    if (!inserted) {
      throw ValidationError(fmt::format("duplicate return for firm {} on {}", r.firm_id,
                                        format_date(r.date)));
    }
  }

  PanelBuildStats local;
  local.signals_total = signals.size();
  std::vector<PanelObservation> panel;
  panel.reserve(signals.size());
  for (const FirmDaySignal& sig : signals) {
    auto it = by_key.find({sig.firm_id, to_days(sig.effective_date)});
    if (it == by_key.end()) {
      ++local.dropped_no_return;
      continue;
    }
    const market::ReturnRecord& ret = *it->second;
    PanelObservation obs;
    obs.firm_id = sig.firm_id;
    obs.date = sig.effective_date;
    obs.ret_next = ret.ret;
    obs.chatgpt_score = sig.chatgpt_score;
    obs.vendor_score = sig.vendor_score;
    obs.market_cap = ret.market_cap;
    auto bp = breakpoints.find(sig.effective_date);
    if (bp != breakpoints.end() && ret.market_cap.has_value()) {
      obs.size_class = market::classify_size(ret, bp->second);
    } else {
      ++local.unclassified_size;
    }
    ++local.matched;
    panel.push_back(std::move(obs));
  }

  std::sort(panel.begin(), panel.end(), [](const PanelObservation& a, const PanelObservation& b) {
    if (a.firm_id != b.firm_id) return a.firm_id < b.firm_id;
    return to_days(a.date) < to_days(b.date);
  });
  if (stats != nullptr) *stats = local;
  return panel;
}

}  // namespace nsp::signal
