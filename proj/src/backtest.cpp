#include "nsp/backtest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "nsp/common.hpp"

namespace nsp::backtest {

namespace {

struct Leg {
  double weighted_return = 0.0;
  double weight = 0.0;
  int count = 0;
};

void accumulate(Leg& leg, const signal::PanelObservation& obs, Weighting weighting) {
  double w = 1.0;
  if (weighting == Weighting::Value) {
    if (!obs.market_cap.has_value()) return;  // no weight, no position
    w = *obs.market_cap;
  }
  leg.weighted_return += w * obs.ret_next;
  leg.weight += w;
  leg.count += 1;
}

}  // namespace

PortfolioSeries form_portfolio(const std::vector<signal::PanelObservation>& panel,
                               const BacktestOptions& options) {
  if (panel.empty()) throw ValidationError("cannot form a portfolio from an empty panel");
  if (options.cost_per_side_bps < 0.0) throw ValidationError("cost must be non-negative");

  std::map<std::chrono::sys_days, std::pair<Leg, Leg>> by_date;  // (long, short)
  for (const signal::PanelObservation& obs : panel) {
    auto& [long_leg, short_leg] = by_date[to_days(obs.date)];
    if (obs.chatgpt_score > 0.0) {
      accumulate(long_leg, obs, options.weighting);
    } else if (obs.chatgpt_score < 0.0) {
      accumulate(short_leg, obs, options.weighting);
    }
  }

  PortfolioSeries series;
  series.days.reserve(by_date.size());
  const double cost = options.cost_per_side_bps / 1e4;
  double cumulative = 1.0;
  for (const auto& [day, legs] : by_date) {
    const auto& [long_leg, short_leg] = legs;
    DayResult result;
    result.date = Date{day};
    result.n_long = long_leg.count;
    result.n_short = short_leg.count;
    if (long_leg.count > 0) result.long_return = long_leg.weighted_return / long_leg.weight;
    if (short_leg.count > 0) result.short_return = short_leg.weighted_return / short_leg.weight;
    result.incomplete = long_leg.count == 0 || short_leg.count == 0;
    const int sides = (long_leg.count > 0 ? 1 : 0) + (short_leg.count > 0 ? 1 : 0);
    result.long_short_return = result.long_return - result.short_return - sides * cost;
    cumulative *= 1.0 + result.long_short_return;
    result.cumulative = cumulative;
    series.days.push_back(result);
  }

  Summary summary;
  summary.n_days = series.days.size();
  double sum = 0.0;
  for (const DayResult& d : series.days) {
    sum += d.long_short_return;
    if (d.incomplete) ++summary.incomplete_days;
  }
  summary.mean_daily = sum / static_cast<double>(series.days.size());
  double sq = 0.0;
  for (const DayResult& d : series.days) {
    const double dev = d.long_short_return - summary.mean_daily;
    sq += dev * dev;
  }
  if (series.days.size() > 1) {
    const double sd = std::sqrt(sq / static_cast<double>(series.days.size() - 1));
    summary.sharpe_annualized = sd > 0.0 ? summary.mean_daily / sd * std::sqrt(252.0) : 0.0;
  }
  double peak = 1.0;
  for (const DayResult& d : series.days) {
    peak = std::max(peak, d.cumulative);
    summary.max_drawdown = std::max(summary.max_drawdown, (peak - d.cumulative) / peak);
  }
  series.summary = summary;
  return series;
}

SizeSplit split_by_size(const std::vector<signal::PanelObservation>& panel) {
  SizeSplit split;
  for (const signal::PanelObservation& obs : panel) {
    if (!obs.size_class.has_value()) {
      ++split.unclassified;
    } else if (*obs.size_class == market::SizeClass::Small) {
      split.small.push_back(obs);
    } else {
      split.non_small.push_back(obs);
    }
  }
  return split;
}

}  // namespace nsp::backtest
