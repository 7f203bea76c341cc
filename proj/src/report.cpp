#include "nsp/report.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "nsp/common.hpp"

namespace nsp::report {

namespace {

// One logical row of the table: a label and one cell per result column.
struct Row {
  std::string label;
  std::vector<std::string> cells;
};

std::string pad_left(const std::string& s, std::size_t width) {
  return std::string(width - std::min(width, s.size()), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s + std::string(width - std::min(width, s.size()), ' ');
}

}  // namespace

std::string render_regression_table(const std::vector<panel::RegressionResult>& results) {
  if (results.empty()) throw ValidationError("no regression results to render");

  std::vector<std::string> regressors;
  for (const auto& result : results) {
    for (const auto& name : result.regressors) {
      if (std::find(regressors.begin(), regressors.end(), name) == regressors.end()) {
        regressors.push_back(name);
      }
    }
  }

  const std::size_t n_cols = results.size();
  auto cell = [&](auto&& fn) {
    std::vector<std::string> cells(n_cols);
    for (std::size_t i = 0; i < n_cols; ++i) cells[i] = fn(results[i]);
    return cells;
  };

  std::vector<Row> rows;
  for (const std::string& name : regressors) {
    rows.push_back({name, cell([&](const panel::RegressionResult& r) {
                      auto it = r.coefficients.find(name);
                      return it == r.coefficients.end() ? std::string()
                                                        : fmt::format("{:.5f}", it->second);
                    })});
    rows.push_back({"", cell([&](const panel::RegressionResult& r) {
                      auto it = r.t_stats.find(name);
                      return it == r.t_stats.end() ? std::string()
                                                   : fmt::format("({:.2f})", it->second);
                    })});
  }
  rows.push_back({"N", cell([](const auto& r) { return fmt::format("{}", r.n_obs); })});
  rows.push_back({"R2", cell([](const auto& r) { return fmt::format("{:.4f}", r.r2); })});
  rows.push_back({"Adj. R2", cell([](const auto& r) { return fmt::format("{:.4f}", r.adj_r2); })});
  rows.push_back({"AIC", cell([](const auto& r) { return fmt::format("{:.1f}", r.aic); })});
  rows.push_back({"BIC", cell([](const auto& r) { return fmt::format("{:.1f}", r.bic); })});
  rows.push_back({"Firm FE", cell([](const auto& r) {
                    return std::string(r.fixed_effect_firm ? "yes" : "no");
                  })});
  rows.push_back({"Date FE", cell([](const auto& r) {
                    return std::string(r.fixed_effect_date ? "yes" : "no");
                  })});
  for (const char* dim : {"firm", "date"}) {
    bool any = std::any_of(results.begin(), results.end(),
                           [&](const auto& r) { return r.n_clusters.contains(dim); });
    if (!any) continue;
    rows.push_back({fmt::format("Clusters ({})", dim), cell([&](const auto& r) {
                      auto it = r.n_clusters.find(dim);
                      return it == r.n_clusters.end() ? std::string()
                                                      : fmt::format("{}", it->second);
                    })});
  }

  std::vector<std::string> headers(n_cols);
  for (std::size_t i = 0; i < n_cols; ++i) {
    headers[i] = fmt::format("({}) {}", i + 1, results[i].name);
  }

  std::size_t label_width = 0;
  for (const Row& row : rows) label_width = std::max(label_width, row.label.size());
  std::vector<std::size_t> widths(n_cols);
  for (std::size_t i = 0; i < n_cols; ++i) {
    widths[i] = headers[i].size();
    for (const Row& row : rows) widths[i] = std::max(widths[i], row.cells[i].size());
  }

  std::string out;
  out += pad_right("", label_width);
  for (std::size_t i = 0; i < n_cols; ++i) out += "  " + pad_left(headers[i], widths[i]);
  out += '\n';
  std::size_t total = label_width;
  for (std::size_t w : widths) total += w + 2;
  out += std::string(total, '-');
  out += '\n';
  for (const Row& row : rows) {
    out += pad_right(row.label, label_width);
    for (std::size_t i = 0; i < n_cols; ++i) out += "  " + pad_left(row.cells[i], widths[i]);
    out += '\n';
  }
  return out;
}

std::string render_backtest_summary(const std::vector<BacktestLine>& lines) {
  std::string out = fmt::format("{:<12}{:>8}{:>14}{:>10}{:>15}{:>13}\n", "sample", "days",
                                "mean daily", "sharpe", "max drawdown", "incomplete");
  out += std::string(72, '-');
  out += '\n';
  for (const BacktestLine& line : lines) {
    out += fmt::format("{:<12}{:>8}{:>14.6f}{:>10.2f}{:>15.4f}{:>13}\n", line.sample,
                       line.summary.n_days, line.summary.mean_daily,
                       line.summary.sharpe_annualized, line.summary.max_drawdown,
                       line.summary.incomplete_days);
  }
  return out;
}

}  // namespace nsp::report
