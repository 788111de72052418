#pragma once

#include "loadcast/forecaster.hpp"

namespace loadcast::forecasters {

/// y_hat(t) = y(t - period).
class NaiveSeasonalForecaster final : public TrainedForecaster {
 public:
  NaiveSeasonalForecaster(std::string name, Eigen::Index target, int period,
                          std::vector<double> round_errors);

  double predict(const Eigen::MatrixXd& data, Eigen::Index t) const override;
  int period() const { return period_; }

 private:
  nlohmann::json hyper_json() const override;
  nlohmann::json parameters_json() const override;

  Eigen::Index target_;
  int period_;
};

ForecasterPtr naive_seasonal(const ForecastTask& task, const Eigen::MatrixXd& data, int period = 12,
                             std::string name = "naive_seasonal");

}  // namespace loadcast::forecasters
