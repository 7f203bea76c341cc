#pragma once

#include <string>
#include <vector>

#include "nsp/backtest.hpp"
#include "nsp/panel.hpp"

namespace nsp::report {

// Text table with one column per regression: coefficient rows with
// t-statistics in parentheses beneath, then N, R2, adjusted R2, AIC, BIC,
// fixed-effect and cluster rows.
std::string render_regression_table(const std::vector<panel::RegressionResult>& results);

struct BacktestLine {
  std::string sample;  // full / small / non_small
  backtest::Summary summary;
};

std::string render_backtest_summary(const std::vector<BacktestLine>& lines);

}  // namespace nsp::report
