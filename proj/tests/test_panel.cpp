#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "nsp/common.hpp"
#include "nsp/panel.hpp"
#include "oracles.hpp"

using namespace nsp;
using panel::Dim;
using panel::GroupIndex;

namespace {

// Tolerance for implementation-vs-oracle comparisons: absolute on small
// magnitudes, relative above 1.
bool close(double a, long double b, double tol = 1e-8) {
  long double scale = std::max<long double>({1.0L, std::abs((long double)a), std::abs(b)});
  return std::abs((long double)a - b) <= tol * scale;
}

signal::PanelObservation obs(const std::string& firm, int day_offset, double ret, double chatgpt,
                             std::optional<double> vendor = std::nullopt) {
  signal::PanelObservation o;
  o.firm_id = firm;
  o.date = Date{std::chrono::sys_days{std::chrono::year{2023} / 1 / 2} +
                std::chrono::days{day_offset}};
  o.ret_next = ret;
  o.chatgpt_score = chatgpt;
  o.vendor_score = vendor;
  return o;
}

}  // namespace

TEST_CASE("make_group_index validates labels") {
  GroupIndex g = panel::make_group_index({0, 1, 0, 2, 1});
  CHECK(g.n_groups == 3);
  CHECK(g.rows[0] == std::vector<int>{0, 2});
  CHECK(g.rows[1] == std::vector<int>{1, 4});
  CHECK(g.rows[2] == std::vector<int>{3});
  CHECK_THROWS_AS(panel::make_group_index({0, -1}), ValidationError);
  CHECK_THROWS_AS(panel::make_group_index({0, 2}), ValidationError);  // gap
}

TEST_CASE("demean removes group means, one dimension") {
  Eigen::MatrixXd m(4, 1);
  m << 1.0, 2.0, 3.0, 4.0;
  GroupIndex g = panel::make_group_index({0, 0, 1, 1});
  panel::demean(m, {g});
  CHECK(m(0, 0) == doctest::Approx(-0.5));
  CHECK(m(1, 0) == doctest::Approx(0.5));
  CHECK(m(2, 0) == doctest::Approx(-0.5));
  CHECK(m(3, 0) == doctest::Approx(0.5));
}

TEST_CASE("demean with no dimensions centers on the grand mean") {
  Eigen::MatrixXd m(3, 2);
  m << 1.0, 10.0, 2.0, 20.0, 3.0, 30.0;
  panel::demean(m, {});
  CHECK(m.col(0).sum() == doctest::Approx(0.0));
  CHECK(m.col(1).sum() == doctest::Approx(0.0));
  CHECK(m(0, 0) == doctest::Approx(-1.0));
  CHECK(m(0, 1) == doctest::Approx(-10.0));
}

TEST_CASE("two-way demeaning drives every group mean to the tolerance") {
  oracle::Rng rng(3);
  oracle::PanelData d = oracle::random_panel(rng, 8, 11, 2);
  const int n = static_cast<int>(d.y.size());
  Eigen::MatrixXd m(n, 3);
  for (int r = 0; r < n; ++r) {
    m(r, 0) = d.y[r];
    m(r, 1) = d.x[r][0];
    m(r, 2) = d.x[r][1];
  }
  GroupIndex firms = panel::make_group_index(d.firm);
  GroupIndex dates = panel::make_group_index(d.date);
  int sweeps = panel::demean(m, {firms, dates});
  CHECK(sweeps >= 1);

  for (const GroupIndex* g : {&firms, &dates}) {
    for (const auto& rows : g->rows) {
      for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (int r : rows) mean += m(r, c);
        mean /= static_cast<double>(rows.size());
        CHECK(std::abs(mean) < 1e-9);
      }
    }
  }
}

TEST_CASE("demean reports non-convergence") {
  oracle::Rng rng(5);
  oracle::PanelData d = oracle::random_panel(rng, 6, 7, 1);
  const int n = static_cast<int>(d.y.size());
  Eigen::MatrixXd m(n, 1);
  for (int r = 0; r < n; ++r) m(r, 0) = d.y[r];
  GroupIndex firms = panel::make_group_index(d.firm);
  GroupIndex dates = panel::make_group_index(d.date);
  CHECK_THROWS_WITH_AS(panel::demean(m, {firms, dates}, 1e-10, 1),
                       doctest::Contains("did not converge"), EstimationError);
}

TEST_CASE("ols solves a known system and names rank-deficient columns") {
  Eigen::MatrixXd x(4, 1);
  x << 1.0, 2.0, 3.0, 4.0;
  Eigen::VectorXd y(4);
  y << 2.0, 4.0, 6.0, 8.0;
  Eigen::VectorXd beta = panel::ols(x, y, {"slope"});
  CHECK(beta(0) == doctest::Approx(2.0));

  Eigen::MatrixXd dup(4, 2);
  dup << 1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0;
  // Which of the two collinear columns gets named depends on the pivot order.
  CHECK_THROWS_WITH_AS(panel::ols(dup, y, {"a", "b"}), doctest::Contains("collinear"),
                       EstimationError);
}

TEST_CASE("one-way clustered covariance matches the brute-force oracle") {
  oracle::Rng rng(11);
  oracle::PanelData d = oracle::random_panel(rng, 7, 9, 2);
  const int n = static_cast<int>(d.y.size());
  const int p = 2;

  Eigen::MatrixXd m(n, 1 + p);
  for (int r = 0; r < n; ++r) {
    m(r, 0) = d.y[r];
    for (int c = 0; c < p; ++c) m(r, 1 + c) = d.x[r][c];
  }
  GroupIndex firms = panel::make_group_index(d.firm);
  GroupIndex dates = panel::make_group_index(d.date);
  panel::demean(m, {firms, dates});
  Eigen::VectorXd y = m.col(0);
  Eigen::MatrixXd x = m.rightCols(p);
  Eigen::VectorXd beta = panel::ols(x, y, {"a", "b"});
  Eigen::VectorXd u = y - x * beta;
  const int k_model = 1 + (d.n_firms - 1) + (d.n_dates - 1) + p;

  oracle::DummyFit fit = oracle::dummy_ols(d);
  for (int c = 0; c < p; ++c) CHECK(close(beta(c), fit.beta[c]));

  Eigen::MatrixXd cov = panel::clustered_cov(x, u, firms, k_model);
  oracle::LMat v = oracle::sandwich_block(d, fit, d.firm);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) CHECK(close(cov(i, j), v[i][j]));
  }
}

TEST_CASE("two-way covariance with identical dimensions collapses to one-way") {
  oracle::Rng rng(13);
  oracle::PanelData d = oracle::random_panel(rng, 6, 8, 1);
  const int n = static_cast<int>(d.y.size());
  Eigen::MatrixXd m(n, 2);
  for (int r = 0; r < n; ++r) {
    m(r, 0) = d.y[r];
    m(r, 1) = d.x[r][0];
  }
  GroupIndex firms = panel::make_group_index(d.firm);
  GroupIndex dates = panel::make_group_index(d.date);
  panel::demean(m, {firms, dates});
  Eigen::VectorXd y = m.col(0);
  Eigen::MatrixXd x = m.rightCols(1);
  Eigen::VectorXd beta = panel::ols(x, y, {"a"});
  Eigen::VectorXd u = y - x * beta;
  const int k_model = 1 + (d.n_firms - 1) + (d.n_dates - 1) + 1;

  Eigen::MatrixXd one_way = panel::clustered_cov(x, u, firms, k_model);
  panel::TwoWayCov two_way = panel::clustered_cov_two_way(x, u, firms, firms, k_model);
  CHECK(std::abs(two_way.cov(0, 0) - one_way(0, 0)) <=
        1e-10 * std::max(1.0, std::abs(one_way(0, 0))));
  CHECK(!two_way.psd_repaired);
}

TEST_CASE("intersect_clusters builds the cross partition") {
  GroupIndex a = panel::make_group_index({0, 0, 1, 1});
  GroupIndex b = panel::make_group_index({0, 1, 0, 1});
  GroupIndex inter = panel::intersect_clusters(a, b);
  CHECK(inter.n_groups == 4);

  GroupIndex same = panel::intersect_clusters(a, a);
  CHECK(same.n_groups == 2);
}

TEST_CASE("clustered covariance guards degenerate inputs") {
  Eigen::MatrixXd x(3, 1);
  x << 1.0, 2.0, 3.0;
  Eigen::VectorXd u(3);
  u << 0.1, -0.2, 0.1;
  GroupIndex one = panel::make_group_index({0, 0, 0});
  CHECK_THROWS_WITH_AS(panel::clustered_cov(x, u, one, 1), doctest::Contains("single cluster"),
                       EstimationError);
  GroupIndex two = panel::make_group_index({0, 0, 1});
  CHECK_THROWS_AS(panel::clustered_cov(x, u, two, 3), EstimationError);  // n <= k
}

TEST_CASE("fit_stats formulas and error branches") {
  Eigen::VectorXd y(4);
  y << 1.0, -1.0, 2.0, -2.0;
  Eigen::VectorXd u(4);
  u << 0.5, -0.5, 0.5, -0.5;
  panel::FitStats s = panel::fit_stats(y, u, 2, 4);
  // SST = 10, SSR = 1.
  CHECK(s.r2 == doctest::Approx(0.9));
  CHECK(s.adj_r2 == doctest::Approx(1.0 - 0.1 * 3.0 / 2.0));
  CHECK(s.aic == doctest::Approx(4.0 * std::log(0.25) + 4.0));
  CHECK(s.bic == doctest::Approx(4.0 * std::log(0.25) + 2.0 * std::log(4.0)));

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_WITH_AS(panel::fit_stats(zero, u, 2, 4), doctest::Contains("SST"),
                       EstimationError);
  CHECK_THROWS_WITH_AS(panel::fit_stats(y, zero, 2, 4), doctest::Contains("perfect fit"),
                       EstimationError);
  CHECK_THROWS_AS(panel::fit_stats(y, u, 4, 4), EstimationError);

  // Zero-coefficient fit on demeaned y: residuals equal y, r2 = 0.
  panel::FitStats flat = panel::fit_stats(y, y, 1, 4);
  CHECK(flat.r2 == doctest::Approx(0.0));
}

TEST_CASE("estimate validates the regressor list") {
  std::vector<signal::PanelObservation> panel_rows{obs("F1", 0, 0.01, 1.0),
                                                   obs("F2", 0, -0.01, -1.0)};
  panel::RegressionSpec spec;
  spec.name = "bad";
  spec.regressors = {"momentum"};
  CHECK_THROWS_WITH_AS(panel::estimate(panel_rows, spec), doctest::Contains("momentum"),
                       ValidationError);
  spec.regressors = {"chatgpt_score", "chatgpt_score"};
  CHECK_THROWS_WITH_AS(panel::estimate(panel_rows, spec), doctest::Contains("duplicate"),
                       ValidationError);
  spec.regressors = {};
  CHECK_THROWS_AS(panel::estimate(panel_rows, spec), ValidationError);
}

namespace {

// A panel big enough for two-way FE with clusters: scores drawn from
// {-1,0,+1}, returns correlated with the score.
std::vector<signal::PanelObservation> synthetic_panel(int n_firms, int n_dates,
                                                      bool with_vendor_gaps = false) {
  oracle::Rng rng(29);
  std::vector<signal::PanelObservation> rows;
  for (int f = 0; f < n_firms; ++f) {
    for (int t = 0; t < n_dates; ++t) {
      double score = static_cast<double>(rng.uniform_int(-1, 1));
      double ret = 0.002 * score + rng.normal(0.0, 0.01);
      auto o = obs("F" + std::to_string(f), t, ret, score);
      if (!with_vendor_gaps || rng.uniform01() < 0.7) {
        o.vendor_score = rng.normal(0.0, 1.0);
      }
      o.size_class = f < n_firms / 2 ? market::SizeClass::Small : market::SizeClass::NonSmall;
      rows.push_back(std::move(o));
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("estimate end to end: counts, filters, and cluster bookkeeping") {
  auto rows = synthetic_panel(8, 12, true);
  panel::RegressionSpec spec;
  spec.name = "both";
  spec.regressors = {"chatgpt_score", "vendor_score"};
  spec.fixed_effects = {Dim::Firm, Dim::Date};
  spec.cluster_dims = {Dim::Firm, Dim::Date};

  panel::RegressionResult res = panel::estimate(rows, spec);
  CHECK(res.n_obs + static_cast<int>(res.rows_missing_regressor) ==
        static_cast<int>(rows.size()));
  CHECK(res.rows_missing_regressor > 0);
  CHECK(res.n_clusters.at("firm") == 8);
  CHECK(res.n_clusters.at("date") == 12);
  CHECK(res.k_model == 1 + 7 + 11 + 2);
  CHECK(res.fixed_effect_firm);
  CHECK(res.fixed_effect_date);
  CHECK(res.demean_sweeps >= 1);
  for (const auto& name : res.regressors) {
    CHECK(res.std_errors.at(name) > 0.0);
    CHECK(res.t_stats.at(name) ==
          doctest::Approx(res.coefficients.at(name) / res.std_errors.at(name)));
  }
  CHECK(res.r2 >= 0.0);
  CHECK(res.r2 <= 1.0);

  // Sample filter drops the other half.
  panel::RegressionSpec small = spec;
  small.regressors = {"chatgpt_score"};
  small.sample_filter = market::SizeClass::Small;
  panel::RegressionResult res_small = panel::estimate(rows, small);
  CHECK(res_small.rows_filtered_out == rows.size() / 2);
  CHECK(res_small.n_clusters.at("firm") == 4);
}

TEST_CASE("estimate is scale-equivariant and t-stats are scale-free") {
  auto rows = synthetic_panel(6, 10);
  panel::RegressionSpec spec;
  spec.name = "one";
  spec.regressors = {"chatgpt_score"};
  spec.fixed_effects = {Dim::Firm, Dim::Date};
  spec.cluster_dims = {Dim::Firm};

  panel::RegressionResult base = panel::estimate(rows, spec);
  auto scaled_rows = rows;
  for (auto& o : scaled_rows) o.ret_next *= 100.0;
  panel::RegressionResult scaled = panel::estimate(scaled_rows, spec);

  CHECK(scaled.coefficients.at("chatgpt_score") ==
        doctest::Approx(100.0 * base.coefficients.at("chatgpt_score")).epsilon(1e-9));
  CHECK(scaled.std_errors.at("chatgpt_score") ==
        doctest::Approx(100.0 * base.std_errors.at("chatgpt_score")).epsilon(1e-9));
  CHECK(scaled.t_stats.at("chatgpt_score") ==
        doctest::Approx(base.t_stats.at("chatgpt_score")).epsilon(1e-9));
  CHECK(scaled.r2 == doctest::Approx(base.r2).epsilon(1e-9));
}

TEST_CASE("estimate without clusters falls back to row-level robust errors") {
  auto rows = synthetic_panel(6, 9);
  panel::RegressionSpec spec;
  spec.name = "hc1";
  spec.regressors = {"chatgpt_score"};
  spec.fixed_effects = {Dim::Firm, Dim::Date};

  panel::RegressionResult res = panel::estimate(rows, spec);
  CHECK(res.n_clusters.empty());
  CHECK(res.std_errors.at("chatgpt_score") > 0.0);
}

TEST_CASE("estimate without fixed effects uses the centered model") {
  auto rows = synthetic_panel(5, 8);
  panel::RegressionSpec spec;
  spec.name = "pooled";
  spec.regressors = {"chatgpt_score"};
  spec.cluster_dims = {Dim::Firm};

  panel::RegressionResult res = panel::estimate(rows, spec);
  CHECK(res.k_model == 2);  // grand mean + slope
  CHECK(!res.fixed_effect_firm);
  CHECK(!res.fixed_effect_date);
}

TEST_CASE("estimate rejects an empty sample") {
  auto rows = synthetic_panel(4, 6);
  for (auto& o : rows) o.size_class.reset();
  panel::RegressionSpec spec;
  spec.name = "empty";
  spec.regressors = {"chatgpt_score"};
  spec.sample_filter = market::SizeClass::Small;
  CHECK_THROWS_WITH_AS(panel::estimate(rows, spec), doctest::Contains("empty"),
                       EstimationError);
}

TEST_CASE("estimate matches the dummy-variable oracle through the public API") {
  // Build PanelData and PanelObservations from one draw so both paths see the
  // same rows; firms/dates are labeled in lexicographic order to match
  // estimate()'s internal mapping.
  oracle::Rng rng(31);
  oracle::PanelData d;
  d.n_firms = 9;
  d.n_dates = 11;
  std::vector<signal::PanelObservation> rows;
  for (int f = 0; f < d.n_firms; ++f) {
    for (int t = 0; t < d.n_dates; ++t) {
      if (f != 0 && t != 0 && rng.uniform01() < 0.15) continue;
      double score = rng.normal(0.0, 1.0);
      double y = 0.5 * score + rng.normal(0.0, 0.3) + 0.1 * f - 0.05 * t;
      d.firm.push_back(f);
      d.date.push_back(t);
      d.x.push_back({score});
      d.y.push_back(y);
      rows.push_back(obs("F" + std::to_string(f), t, y, score));
    }
  }

  panel::RegressionSpec spec;
  spec.name = "oracle";
  spec.regressors = {"chatgpt_score"};
  spec.fixed_effects = {Dim::Firm, Dim::Date};
  spec.cluster_dims = {Dim::Firm, Dim::Date};
  panel::RegressionResult res = panel::estimate(rows, spec);

  oracle::DummyFit fit = oracle::dummy_ols(d);
  CHECK(close(res.coefficients.at("chatgpt_score"), fit.beta[0]));
  CHECK(close(res.r2, fit.r2));
  CHECK(close(res.adj_r2, fit.adj_r2));
  CHECK(close(res.aic, fit.aic));
  CHECK(close(res.bic, fit.bic));

  oracle::TwoWayOracle two_way = oracle::sandwich_two_way(d, fit);
  CHECK(close(res.std_errors.at("chatgpt_score"), std::sqrt((long double)two_way.cov[0][0])));
}
