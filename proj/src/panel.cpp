#include "nsp/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "nsp/common.hpp"

namespace nsp::panel {

std::string_view dim_name(Dim dim) {
  return dim == Dim::Firm ? "firm" : "date";
}

Dim parse_dim(std::string_view token) {
  if (token == "firm") return Dim::Firm;
  if (token == "date") return Dim::Date;
  throw ValidationError(fmt::format("unknown dimension '{}' (expected firm or date)", token));
}

GroupIndex make_group_index(const std::vector<int>& labels) {
  GroupIndex index;
  index.label = labels;
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw ValidationError("group labels must be non-negative");
    max_label = std::max(max_label, l);
  }
  index.n_groups = max_label + 1;
  index.rows.resize(index.n_groups);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    index.rows[labels[r]].push_back(static_cast<int>(r));
  }
  for (const auto& rows : index.rows) {
    if (rows.empty()) throw ValidationError("group labels must be contiguous from 0");
  }
  return index;
}

namespace {

GroupIndex whole_sample_group(Eigen::Index n) {
  return make_group_index(std::vector<int>(static_cast<std::size_t>(n), 0));
}

// One demeaning pass over one dimension. Each group touches a disjoint row
// set and sums its rows in ascending order, so the result does not depend on
// the thread count.
void demean_dim(Eigen::MatrixXd& cols, const GroupIndex& dim, int nthreads) {
  const int n_groups = dim.n_groups;
  const Eigen::Index n_cols = cols.cols();
#pragma omp parallel for schedule(static) num_threads(nthreads)
  for (int g = 0; g < n_groups; ++g) {
    const std::vector<int>& rows = dim.rows[g];
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      double sum = 0.0;
      for (int r : rows) sum += cols(r, c);
      const double mean = sum / static_cast<double>(rows.size());
      for (int r : rows) cols(r, c) -= mean;
    }
  }
}

void demean_dim_serial(Eigen::MatrixXd& cols, const GroupIndex& dim) {
  for (int g = 0; g < dim.n_groups; ++g) {
    const std::vector<int>& rows = dim.rows[g];
    for (Eigen::Index c = 0; c < cols.cols(); ++c) {
      double sum = 0.0;
      for (int r : rows) sum += cols(r, c);
      const double mean = sum / static_cast<double>(rows.size());
      for (int r : rows) cols(r, c) -= mean;
    }
  }
}

double max_abs_group_mean(const Eigen::MatrixXd& cols, const std::vector<const GroupIndex*>& dims,
                          int nthreads) {
  double residual = 0.0;
  for (const GroupIndex* dim : dims) {
    const int n_groups = dim->n_groups;
#pragma omp parallel for schedule(static) num_threads(nthreads) reduction(max : residual)
    for (int g = 0; g < n_groups; ++g) {
      const std::vector<int>& rows = dim->rows[g];
      for (Eigen::Index c = 0; c < cols.cols(); ++c) {
        double sum = 0.0;
        for (int r : rows) sum += cols(r, c);
        residual = std::max(residual, std::abs(sum / static_cast<double>(rows.size())));
      }
    }
  }
  return residual;
}

int demean_impl(Eigen::MatrixXd& cols, const std::vector<GroupIndex>& dims_in, double tol,
                int max_sweeps, int nthreads, bool parallel) {
  if (cols.rows() == 0) throw EstimationError("cannot demean an empty panel");
  GroupIndex whole;
  std::vector<const GroupIndex*> dims;
  if (dims_in.empty()) {
    whole = whole_sample_group(cols.rows());
    dims.push_back(&whole);
  } else {
    for (const GroupIndex& d : dims_in) {
      if (static_cast<Eigen::Index>(d.label.size()) != cols.rows()) {
        throw EstimationError("group index does not cover the panel rows");
      }
      dims.push_back(&d);
    }
  }

  double residual = 0.0;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (const GroupIndex* dim : dims) {
      if (parallel) {
        demean_dim(cols, *dim, nthreads);
      } else {
        demean_dim_serial(cols, *dim);
      }
    }
    residual = max_abs_group_mean(cols, dims, parallel ? nthreads : 1);
    if (residual < tol) return sweep;
  }
  throw EstimationError(fmt::format(
      "within transform did not converge after {} sweeps (residual {:.3e}, tolerance {:.1e})",
      max_sweeps, residual, tol));
}

}  // namespace

int demean(Eigen::MatrixXd& cols, const std::vector<GroupIndex>& dims, double tol, int max_sweeps,
           int jobs) {
  return demean_impl(cols, dims, tol, max_sweeps, resolve_jobs(jobs), true);
}

int demean_serial(Eigen::MatrixXd& cols, const std::vector<GroupIndex>& dims, double tol,
                  int max_sweeps) {
  return demean_impl(cols, dims, tol, max_sweeps, 1, false);
}

Eigen::VectorXd ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::vector<std::string>& column_names) {
  if (X.rows() != y.size()) throw EstimationError("design and outcome have different row counts");
  if (X.cols() == 0) throw EstimationError("design matrix has no columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) {
    const auto& perm = qr.colsPermutation().indices();
    int bad = perm(qr.rank());
    std::string name = bad < static_cast<int>(column_names.size())
                           ? column_names[bad]
                           : fmt::format("#{}", bad);
    throw EstimationError(
        fmt::format("design is rank deficient: column {} is collinear after demeaning", name));
  }
  return qr.solve(y);
}

namespace {

void check_cluster_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                        const GroupIndex& clusters) {
  if (X.rows() != residuals.size() ||
      static_cast<Eigen::Index>(clusters.label.size()) != X.rows()) {
    throw EstimationError("cluster labels must cover every design row");
  }
}

}  // namespace

Eigen::MatrixXd clustered_meat(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                               const GroupIndex& clusters, int jobs) {
  check_cluster_rows(X, residuals, clusters);
  const int k = static_cast<int>(X.cols());
  const int n_groups = clusters.n_groups;
  const int nthreads = resolve_jobs(jobs);
  std::vector<Eigen::VectorXd> scores(n_groups);
#pragma omp parallel for schedule(static) num_threads(nthreads)
  for (int g = 0; g < n_groups; ++g) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
    for (int r : clusters.rows[g]) s += residuals(r) * X.row(r).transpose();
    scores[g] = std::move(s);
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (int g = 0; g < n_groups; ++g) meat += scores[g] * scores[g].transpose();
  return meat;
}

Eigen::MatrixXd clustered_meat_serial(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                                      const GroupIndex& clusters) {
  check_cluster_rows(X, residuals, clusters);
  const int k = static_cast<int>(X.cols());
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (int g = 0; g < clusters.n_groups; ++g) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
    for (int r : clusters.rows[g]) s += residuals(r) * X.row(r).transpose();
    meat += s * s.transpose();
  }
  return meat;
}

Eigen::MatrixXd clustered_cov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                              const GroupIndex& clusters, int k_model, int jobs) {
  const double n = static_cast<double>(X.rows());
  const double big_g = static_cast<double>(clusters.n_groups);
  if (clusters.n_groups < 2) {
    throw EstimationError("cluster dimension has a single cluster; the variance is undefined");
  }
  if (X.rows() <= k_model) {
    throw EstimationError(fmt::format("{} rows cannot support {} model parameters", X.rows(),
                                      k_model));
  }
  Eigen::MatrixXd meat = clustered_meat(X, residuals, clusters, jobs);
  Eigen::MatrixXd bread =
      (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  const double factor = big_g / (big_g - 1.0) * (n - 1.0) / (n - static_cast<double>(k_model));
  Eigen::MatrixXd cov = factor * bread * meat * bread;
  return ((cov + cov.transpose()) / 2.0).eval();
}

GroupIndex intersect_clusters(const GroupIndex& a, const GroupIndex& b) {
  if (a.label.size() != b.label.size()) {
    throw EstimationError("cluster dimensions cover different row counts");
  }
  std::map<std::pair<int, int>, int> ids;
  std::vector<int> labels(a.label.size());
  for (std::size_t r = 0; r < a.label.size(); ++r) {
    auto [it, inserted] =
        ids.try_emplace({a.label[r], b.label[r]}, static_cast<int>(ids.size()));
    labels[r] = it->second;
  }
  return make_group_index(labels);
}

TwoWayCov clustered_cov_two_way(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                                const GroupIndex& firm_clusters, const GroupIndex& date_clusters,
                                int k_model, int jobs) {
  Eigen::MatrixXd v_firm = clustered_cov(X, residuals, firm_clusters, k_model, jobs);
  Eigen::MatrixXd v_date = clustered_cov(X, residuals, date_clusters, k_model, jobs);
  GroupIndex inter = intersect_clusters(firm_clusters, date_clusters);
  Eigen::MatrixXd v_inter = clustered_cov(X, residuals, inter, k_model, jobs);

  TwoWayCov out;
  out.cov = v_firm + v_date - v_inter;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.cov);
  if (es.info() != Eigen::Success) throw EstimationError("covariance eigendecomposition failed");
  const double min_eig = es.eigenvalues().minCoeff();
  const double max_eig = es.eigenvalues().maxCoeff();
  if (min_eig < 0.0) {
    Eigen::VectorXd floored = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd repaired =
        es.eigenvectors() * floored.asDiagonal() * es.eigenvectors().transpose();
    out.cov = ((repaired + repaired.transpose()) / 2.0).eval();
    // Round-off-scale negatives are floored quietly; only a material defect
    // is surfaced.
    out.psd_repaired = min_eig < -1e-12 * std::max(1.0, max_eig);
  }
  return out;
}

FitStats fit_stats(const Eigen::VectorXd& y_demeaned, const Eigen::VectorXd& residuals, int k,
                   int n) {
  if (y_demeaned.size() != residuals.size()) {
    throw EstimationError("outcome and residual lengths differ");
  }
  if (n <= k) {
    throw EstimationError(fmt::format("{} observations cannot support {} parameters", n, k));
  }
  const double sst = y_demeaned.squaredNorm();
  const double ssr = residuals.squaredNorm();
  if (sst == 0.0) {
    throw EstimationError("outcome is constant within every group (SST = 0)");
  }
  if (ssr == 0.0) {
    throw EstimationError("perfect fit (SSR = 0); log-likelihood statistics are undefined");
  }
  FitStats stats;
  stats.r2 = 1.0 - ssr / sst;
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  stats.adj_r2 = 1.0 - (1.0 - stats.r2) * (nd - 1.0) / (nd - kd);
  const double loglik_core = nd * std::log(ssr / nd);
  stats.aic = loglik_core + 2.0 * kd;
  stats.bic = loglik_core + kd * std::log(nd);
  return stats;
}

namespace {

bool has_dim(const std::vector<Dim>& dims, Dim d) {
  return std::find(dims.begin(), dims.end(), d) != dims.end();
}

}  // namespace

RegressionResult estimate(const std::vector<signal::PanelObservation>& panel,
                          const RegressionSpec& spec, int jobs) {
  if (spec.regressors.empty()) throw ValidationError("regressor list is empty");
  {
    std::set<std::string> seen;
    for (const std::string& r : spec.regressors) {
      if (r != "chatgpt_score" && r != "vendor_score") {
        throw ValidationError(fmt::format("unknown regressor '{}'", r));
      }
      if (!seen.insert(r).second) {
        throw ValidationError(fmt::format("duplicate regressor '{}'", r));
      }
    }
  }

  RegressionResult result;
  result.name = spec.name;
  result.regressors = spec.regressors;
  const bool wants_vendor =
      std::find(spec.regressors.begin(), spec.regressors.end(), "vendor_score") !=
      spec.regressors.end();

  std::vector<const signal::PanelObservation*> rows;
  rows.reserve(panel.size());
  for (const signal::PanelObservation& obs : panel) {
    if (spec.sample_filter.has_value()) {
      if (!obs.size_class.has_value() || *obs.size_class != *spec.sample_filter) {
        ++result.rows_filtered_out;
        continue;
      }
    }
    if (wants_vendor && !obs.vendor_score.has_value()) {
      ++result.rows_missing_regressor;
      continue;
    }
    rows.push_back(&obs);
  }
  if (rows.empty()) {
    throw EstimationError(fmt::format("regression {}: empty estimation sample", spec.name));
  }

  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(spec.regressors.size());

  std::map<std::string, int> firm_ids;
  std::map<std::chrono::sys_days, int> date_ids;
  for (const auto* obs : rows) {
    firm_ids.try_emplace(obs->firm_id, 0);
    date_ids.try_emplace(to_days(obs->date), 0);
  }
  int next = 0;
  for (auto& [key, id] : firm_ids) id = next++;
  next = 0;
  for (auto& [key, id] : date_ids) id = next++;

  std::vector<int> firm_labels(rows.size());
  std::vector<int> date_labels(rows.size());
  Eigen::MatrixXd design(n, 1 + p);  // column 0 is the outcome
  for (int r = 0; r < n; ++r) {
    const auto* obs = rows[r];
    firm_labels[r] = firm_ids.at(obs->firm_id);
    date_labels[r] = date_ids.at(to_days(obs->date));
    design(r, 0) = obs->ret_next;
    for (int c = 0; c < p; ++c) {
      design(r, 1 + c) =
          spec.regressors[c] == "chatgpt_score" ? obs->chatgpt_score : *obs->vendor_score;
    }
  }

  GroupIndex firm_index = make_group_index(firm_labels);
  GroupIndex date_index = make_group_index(date_labels);

  std::vector<GroupIndex> effects;
  int k_model = 1 + p;  // grand mean plus slopes
  result.fixed_effect_firm = has_dim(spec.fixed_effects, Dim::Firm);
  result.fixed_effect_date = has_dim(spec.fixed_effects, Dim::Date);
  if (result.fixed_effect_firm) {
    effects.push_back(firm_index);
    k_model += firm_index.n_groups - 1;
  }
  if (result.fixed_effect_date) {
    effects.push_back(date_index);
    k_model += date_index.n_groups - 1;
  }
  result.k_model = k_model;

  result.demean_sweeps = demean(design, effects, 1e-10, 10000, jobs);
  Eigen::VectorXd y = design.col(0);
  Eigen::MatrixXd X = design.rightCols(p);

  Eigen::VectorXd beta = ols(X, y, spec.regressors);
  Eigen::VectorXd residuals = y - X * beta;

  Eigen::MatrixXd cov;
  const bool cluster_firm = has_dim(spec.cluster_dims, Dim::Firm);
  const bool cluster_date = has_dim(spec.cluster_dims, Dim::Date);
  if (cluster_firm && cluster_date) {
    TwoWayCov two_way =
        clustered_cov_two_way(X, residuals, firm_index, date_index, k_model, jobs);
    cov = two_way.cov;
    result.cov_psd_repaired = two_way.psd_repaired;
    result.n_clusters["firm"] = firm_index.n_groups;
    result.n_clusters["date"] = date_index.n_groups;
  } else if (cluster_firm || cluster_date) {
    const GroupIndex& clusters = cluster_firm ? firm_index : date_index;
    cov = clustered_cov(X, residuals, clusters, k_model, jobs);
    result.n_clusters[cluster_firm ? "firm" : "date"] = clusters.n_groups;
  } else {
    // Degenerate clustering: every row its own cluster, an HC1-style
    // heteroskedasticity-robust covariance.
    std::vector<int> own(rows.size());
    for (std::size_t r = 0; r < own.size(); ++r) own[r] = static_cast<int>(r);
    cov = clustered_cov(X, residuals, make_group_index(own), k_model, jobs);
  }

  for (int c = 0; c < p; ++c) {
    const std::string& name = spec.regressors[c];
    const double variance = cov(c, c);
    if (!(variance > 0.0)) {
      throw EstimationError(fmt::format("non-positive variance for {}", name));
    }
    result.coefficients[name] = beta(c);
    result.std_errors[name] = std::sqrt(variance);
    result.t_stats[name] = beta(c) / result.std_errors[name];
  }

  FitStats stats = fit_stats(y, residuals, k_model, n);
  result.n_obs = n;
  result.r2 = stats.r2;
  result.adj_r2 = stats.adj_r2;
  result.aic = stats.aic;
  result.bic = stats.bic;
  return result;
}

}  // namespace nsp::panel
