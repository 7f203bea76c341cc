#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "nsp/signal_builder.hpp"

namespace nsp::backtest {

enum class Weighting { Equal, Value };

struct BacktestOptions {
  Weighting weighting = Weighting::Equal;
  // Charged per populated side per day (daily rebalance). 0 = frictionless.
  double cost_per_side_bps = 0.0;
};

struct DayResult {
  Date date{};
  double long_return = 0.0;        // 0 when the leg is empty
  double short_return = 0.0;
  double long_short_return = 0.0;  // long - short - costs
  int n_long = 0;
  int n_short = 0;
  bool incomplete = false;         // at least one leg was empty
  double cumulative = 1.0;         // product of (1 + long_short_return), base 1.0
};

struct Summary {
  double mean_daily = 0.0;
  double sharpe_annualized = 0.0;  // mean/sd * sqrt(252); 0 when sd is 0
  double max_drawdown = 0.0;       // peak-relative, in [0, 1+]
  std::size_t n_days = 0;
  std::size_t incomplete_days = 0;
};

struct PortfolioSeries {
  std::vector<DayResult> days;  // ascending by date, one row per panel date
  Summary summary;
};

// Sign-split rule: per date, long leg = firms with score > 0, short leg =
// firms with score < 0, zeros excluded. Legs are equal-weighted by default;
// value weighting uses market caps and skips rows without one. Days with an
// empty leg keep that leg at 0 and are flagged, keeping the date axis dense.
PortfolioSeries form_portfolio(const std::vector<signal::PanelObservation>& panel,
                               const BacktestOptions& options = {});

// Partition by stored size class; unclassified rows land in neither half.
struct SizeSplit {
  std::vector<signal::PanelObservation> small;
  std::vector<signal::PanelObservation> non_small;
  std::size_t unclassified = 0;
};

SizeSplit split_by_size(const std::vector<signal::PanelObservation>& panel);

}  // namespace nsp::backtest
