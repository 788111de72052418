#pragma once

#include "loadcast/forecaster.hpp"

namespace loadcast::forecasters {

struct RidgeArHyper {
  std::vector<int> lags{1, 2, 3, 12};
  double ridge = 1e-3;
  int difference_lag = 0;
};

/// Closed-form ridge regression of the target on its own lags (and optional
/// exogenous features); the intercept is not penalized.
class RidgeArForecaster final : public TrainedForecaster {
 public:
  RidgeArForecaster(std::string name, LagDesign design, RidgeArHyper hyper, double intercept,
                    Eigen::VectorXd coefficients, std::vector<double> round_errors);

  double predict(const Eigen::MatrixXd& data, Eigen::Index t) const override;

  double intercept() const { return intercept_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }

 private:
  nlohmann::json hyper_json() const override;
  nlohmann::json parameters_json() const override;

  LagDesign design_;
  RidgeArHyper hyper_;
  double intercept_;
  Eigen::VectorXd coefficients_;
};

ForecasterPtr fit_ridge_ar(const ForecastTask& task, const Eigen::MatrixXd& data,
                           const RidgeArHyper& hyper = {}, std::string name = "ridge_ar");

}  // namespace loadcast::forecasters
