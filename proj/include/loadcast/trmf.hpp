#pragma once

#include "loadcast/forecaster.hpp"

#include <cstdint>
#include <functional>

namespace loadcast::forecasters {

struct TrmfHyper {
  int rank = 4;
  std::vector<int> lags{1, 12};
  double lambda_reg = 0.1;  // ridge on loadings and factors
  double kappa_reg = 0.1;   // weight of the autoregressive penalty on factors
  double ar_ridge = 1e-6;   // ridge on the AR weights, inside the kappa term
  int sweeps = 50;
  // Stop once a sweep lowers the objective by less than this fraction.
  double tol = 1e-9;
  std::uint64_t seed = 0;
};

/// Y (q x m) ~ loadings (q x k) * factors (k x m), each factor row following
/// an AR recursion over `lags`.
struct TrmfModel {
  Eigen::MatrixXd loadings;
  Eigen::MatrixXd factors;
  Eigen::MatrixXd ar_weights;  // k x |lags|
  TrmfHyper hyper;
  std::vector<double> objective;  // after each sweep

  Eigen::MatrixXd reconstruction() const { return loadings * factors; }
  /// AR prediction of factor column t from the columns before it.
  Eigen::VectorXd ar_predict(const Eigen::MatrixXd& factors, Eigen::Index t) const;
};

/// ||Y - LS||^2 + lambda (||L||^2 + ||S||^2)
///   + kappa (sum_r sum_t (S_rt - sum_l w_rl S_r,t-l)^2 + ar_ridge ||W||^2)
double trmf_objective(const Eigen::MatrixXd& y, const TrmfModel& model);

/// Alternating exact minimization: loadings by row ridge, all factors jointly
/// (sparse solve including the AR coupling), then AR weights.
TrmfModel fit_trmf(const Eigen::MatrixXd& y, const TrmfHyper& hyper,
                   const std::function<void(const TrmfModel&)>& after_sweep = {});

/// Columns m .. m+horizon-1 of the reconstruction, factors extrapolated by
/// their AR recursions.
Eigen::MatrixXd forecast_trmf(const TrmfModel& model, int horizon);

class TrmfForecaster final : public TrainedForecaster {
 public:
  TrmfForecaster(std::string name, Eigen::Index target, TrmfModel model, Eigen::RowVectorXd mean,
                 Eigen::RowVectorXd scale, std::vector<double> round_errors);

  double predict(const Eigen::MatrixXd& data, Eigen::Index t) const override;
  const TrmfModel& model() const { return model_; }

 private:
  nlohmann::json hyper_json() const override;
  nlohmann::json parameters_json() const override;

  Eigen::Index target_;
  TrmfModel model_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
};

/// Factorizes every column of the train span (standardized); rows after the
/// train span are folded in one at a time as history becomes available.
ForecasterPtr fit_trmf_forecaster(const ForecastTask& task, const Eigen::MatrixXd& data,
                                  const TrmfHyper& hyper = {}, std::string name = "trmf");

}  // namespace loadcast::forecasters
