#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsp/signal_builder.hpp"

namespace nsp::panel {

enum class Dim { Firm, Date };

std::string_view dim_name(Dim dim);
Dim parse_dim(std::string_view token);

// Row labels for one grouping dimension, with per-group row lists so kernels
// can walk each group in a fixed order.
struct GroupIndex {
  int n_groups = 0;
  std::vector<int> label;               // per row, in [0, n_groups)
  std::vector<std::vector<int>> rows;   // rows.at(g) ascending
};

GroupIndex make_group_index(const std::vector<int>& labels);

// Alternating within-group demeaning of every column of `cols`, iterated
// until the largest absolute group mean over all dimensions, groups, and
// columns drops below `tol`. Returns the number of sweeps used. An empty
// dimension list centers on the grand mean (sweep count 0 or 1). Throws
// EstimationError when max_sweeps is hit, reporting the final residual.
int demean(Eigen::MatrixXd& cols, const std::vector<GroupIndex>& dims, double tol = 1e-10,
           int max_sweeps = 10000, int jobs = 0);
// Single-threaded reference with identical semantics.
int demean_serial(Eigen::MatrixXd& cols, const std::vector<GroupIndex>& dims, double tol = 1e-10,
                  int max_sweeps = 10000);

// Least squares via column-pivoted QR. Throws EstimationError on rank
// deficiency, naming the first dependent column.
Eigen::VectorXd ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::vector<std::string>& column_names);

// Sum over clusters of (X_g' u_g)(X_g' u_g)'. Per-cluster terms are computed
// independently and reduced in cluster order, so the result is bit-stable
// across thread counts.
Eigen::MatrixXd clustered_meat(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                               const GroupIndex& clusters, int jobs = 0);
Eigen::MatrixXd clustered_meat_serial(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                                      const GroupIndex& clusters);

// Sandwich estimator with the finite-sample factor G/(G-1) * (N-1)/(N-K),
// where K counts all model parameters including absorbed effects. Throws
// EstimationError when the dimension has a single cluster.
Eigen::MatrixXd clustered_cov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                              const GroupIndex& clusters, int k_model, int jobs = 0);

struct TwoWayCov {
  Eigen::MatrixXd cov;
  bool psd_repaired = false;
};

// V_firm + V_date - V_intersection, each term with its own finite-sample
// factor. A result with materially negative eigenvalues is repaired by
// flooring them at zero and flagged.
TwoWayCov clustered_cov_two_way(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                                const GroupIndex& firm_clusters, const GroupIndex& date_clusters,
                                int k_model, int jobs = 0);

// The intersection clustering: rows share a group iff they share both labels.
GroupIndex intersect_clusters(const GroupIndex& a, const GroupIndex& b);

struct FitStats {
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double aic = 0.0;
  double bic = 0.0;
};

// On the demeaned system: r2 = 1 - SSR/SST with SST = |y_demeaned|^2, and the
// Gaussian-likelihood AIC/BIC with constants dropped. k counts absorbed
// effects. Errors on SST = 0 (degenerate outcome), SSR = 0 (perfect fit,
// log-likelihood form undefined), and n <= k.
FitStats fit_stats(const Eigen::VectorXd& y_demeaned, const Eigen::VectorXd& residuals, int k,
                   int n);

struct RegressionSpec {
  std::string name;                      // label used in reports and artifacts
  std::vector<std::string> regressors;   // subset of {chatgpt_score, vendor_score}
  std::vector<Dim> fixed_effects;
  std::vector<Dim> cluster_dims;         // empty: every row its own cluster (HC1-style)
  std::optional<market::SizeClass> sample_filter;
};

struct RegressionResult {
  std::string name;
  std::vector<std::string> regressors;
  std::map<std::string, double> coefficients;
  std::map<std::string, double> std_errors;
  std::map<std::string, double> t_stats;  // coefficient / std_error, exactly
  int n_obs = 0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int k_model = 0;  // 1 + sum over effects of (groups - 1) + regressors
  std::map<std::string, int> n_clusters;  // per cluster dimension
  bool fixed_effect_firm = false;
  bool fixed_effect_date = false;
  bool cov_psd_repaired = false;
  int demean_sweeps = 0;
  std::size_t rows_filtered_out = 0;      // by sample_filter
  std::size_t rows_missing_regressor = 0; // dropped for a missing vendor score
};

// within_transform -> ols -> clustered_cov -> fit_stats. Applies the sample
// filter first, then drops rows missing a requested regressor.
RegressionResult estimate(const std::vector<signal::PanelObservation>& panel,
                          const RegressionSpec& spec, int jobs = 0);

}  // namespace nsp::panel
