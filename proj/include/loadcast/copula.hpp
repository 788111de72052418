#pragma once

#include "loadcast/dataset.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>
#include <utility>
#include <vector>

namespace loadcast::copula {

using dataset::ColumnKind;
using dataset::ObservationMatrix;

/// Per-column map between data space and the latent standard-normal scale.
///
/// Continuous columns: `support` holds the sorted distinct observed values and
/// `ecdf_probs` their mid-rank empirical CDF rescaled by m_obs + 1.
/// Ordinal columns: `support` holds the observed levels in order and
/// `ecdf_probs` the k - 1 cumulative level frequencies separating them.
struct MarginalTransform {
  ColumnKind kind = ColumnKind::continuous;
  std::vector<double> support;
  std::vector<double> ecdf_probs;

  /// Latent value of a continuous observation (interpolated off-support).
  double forward(double x) const;
  /// Latent interval (lo, hi] of an ordinal observation.
  std::pair<double, double> interval(double level) const;
  /// Data value for a latent coordinate: interpolated empirical quantile for
  /// continuous columns, the level whose interval contains z for ordinal ones.
  double inverse(double z) const;
};

struct EmTraceEntry {
  int iteration;
  double delta;  // relative Frobenius change of sigma
  double pseudo_loglik;
};

struct CopulaModel {
  Eigen::MatrixXd sigma;
  std::vector<MarginalTransform> marginals;
  std::vector<EmTraceEntry> em_trace;
  bool converged = false;
};

/// Latent-space observation pattern of one row; the three sets partition the columns.
struct RowConstraint {
  struct Interval {
    Eigen::Index col;
    double lo;
    double hi;
  };
  std::vector<std::pair<Eigen::Index, double>> observed_continuous;
  std::vector<Interval> observed_ordinal;
  std::vector<Eigen::Index> missing;

  bool fully_missing() const { return observed_continuous.empty() && observed_ordinal.empty(); }
};

struct EmConfig {
  int max_iters = 100;
  double tol = 1e-4;
  double ridge = 1e-8;
  int threads = 1;
};

struct EStepResult {
  Eigen::VectorXd e_z;
  Eigen::MatrixXd e_zzT;
};

inline constexpr double kEigenFloor = 1e-6;

std::vector<MarginalTransform> fit_marginals(const ObservationMatrix& matrix);

std::vector<RowConstraint> row_constraints(const ObservationMatrix& matrix,
                                           std::span<const MarginalTransform> marginals);

/// Conditional first and second latent moments of one row given its constraint.
EStepResult e_step(const Eigen::MatrixXd& sigma, const RowConstraint& constraint,
                   double ridge = 1e-8);

/// Rescales a symmetric matrix to unit diagonal, clipping eigenvalues below
/// kEigenFloor when needed so the result is a valid correlation matrix.
Eigen::MatrixXd project_correlation(const Eigen::MatrixXd& s);

CopulaModel em_fit(const ObservationMatrix& matrix, const EmConfig& config = {});

/// Gaussian log-density of the exactly observed latent coordinates plus the
/// log-probability of ordinal intervals given them. `ridge_repairs` (optional)
/// counts singular blocks that needed extra ridge.
double pseudo_loglik(const Eigen::MatrixXd& sigma, std::span<const RowConstraint> constraints,
                     int* ridge_repairs = nullptr);
double pseudo_loglik(const CopulaModel& model, std::span<const RowConstraint> constraints);

struct ImputationResult {
  ObservationMatrix completed;
  // Rows with nothing observed, filled with marginal medians.
  std::vector<Eigen::Index> flagged_rows;
};

ImputationResult impute(const CopulaModel& model, const ObservationMatrix& matrix);

nlohmann::json to_json(const CopulaModel& model);
CopulaModel copula_model_from_json(const nlohmann::json& j);

}  // namespace loadcast::copula
