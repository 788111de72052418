#include "loadcast/naive_seasonal.hpp"

#include "loadcast/error.hpp"

namespace loadcast::forecasters {

NaiveSeasonalForecaster::NaiveSeasonalForecaster(std::string name, Eigen::Index target, int period,
                                                 std::vector<double> round_errors)
    : TrainedForecaster(std::move(name), "naive_seasonal", std::move(round_errors)),
      target_(target),
      period_(period) {}

double NaiveSeasonalForecaster::predict(const Eigen::MatrixXd& data, Eigen::Index t) const {
  if (t < period_) throw Error(ErrorCategory::forecaster, "naive_seasonal: no value one period back");
  return data(t - period_, target_);
}

nlohmann::json NaiveSeasonalForecaster::hyper_json() const { return {{"period", period_}}; }

nlohmann::json NaiveSeasonalForecaster::parameters_json() const { return {{"target", target_}}; }

ForecasterPtr naive_seasonal(const ForecastTask& task, const Eigen::MatrixXd& data, int period,
                             std::string name) {
  task.validate(data.rows(), data.cols());
  if (period < 1) throw Error(ErrorCategory::forecaster, "naive_seasonal: period must be positive");
  if (task.train.size() < period) {
    throw Error(ErrorCategory::forecaster, "naive_seasonal: train span shorter than the period");
  }
  const double err = span_mape(data, task.target, task.validation,
                               [&](Eigen::Index t) { return data(t - period, task.target); });
  // No training rounds: a constant two-round stream keeps ln R > 0.
  return std::make_shared<NaiveSeasonalForecaster>(std::move(name), task.target, period,
                                                   std::vector<double>{err, err});
}

}  // namespace loadcast::forecasters
