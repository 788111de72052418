#include "loadcast/forecaster.hpp"

#include "loadcast/error.hpp"

#include <algorithm>
#include <cmath>

namespace loadcast::forecasters {

namespace {

[[noreturn]] void task_error(const std::string& message) {
  throw Error(ErrorCategory::forecaster, message);
}

}  // namespace

void ForecastTask::validate(Eigen::Index rows, Eigen::Index cols) const {
  if (target < 0 || target >= cols) task_error("target column out of range");
  if (horizon < 1) task_error("horizon must be at least 1");
  if (train.begin < 0 || train.size() < 1) task_error("train span is empty");
  if (validation.size() < 1) task_error("validation span is empty");
  if (validation.begin != train.end) task_error("validation span must directly follow the train span");
  if (test().end > rows) task_error("test span runs past the last row");
  for (Eigen::Index f : features) {
    if (f < 0 || f >= cols) task_error("feature column out of range");
    if (f == target) task_error("the target cannot be a lag-0 feature");
  }
}

ForecastTask ForecastTask::holdout_split(Eigen::Index rows, Eigen::Index target, int horizon,
                                         int validation) {
  ForecastTask task;
  task.target = target;
  task.horizon = horizon;
  const Eigen::Index val_begin = rows - horizon - validation;
  if (val_begin < 1) task_error("series too short for the requested holdout and validation spans");
  task.train = {0, val_begin};
  task.validation = {val_begin, val_begin + validation};
  return task;
}

TrainedForecaster::TrainedForecaster(std::string name, std::string kind, std::vector<double> round_errors)
    : name_(std::move(name)), kind_(std::move(kind)), round_errors_(std::move(round_errors)) {
  if (round_errors_.size() < 2) task_error(name_ + ": needs at least 2 round errors");
  for (double e : round_errors_) {
    if (!std::isfinite(e) || e < 0.0) task_error(name_ + ": round errors must be finite and non-negative");
  }
}

std::vector<double> TrainedForecaster::predict_span(const Eigen::MatrixXd& data, Span span) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(span.size(), 0)));
  for (Eigen::Index t = span.begin; t < span.end; ++t) out.push_back(predict(data, t));
  return out;
}

nlohmann::json TrainedForecaster::to_json() const {
  return {{"name", name_},
          {"kind", kind_},
          {"hyper", hyper_json()},
          {"parameters", parameters_json()},
          {"round_errors", round_errors_}};
}

std::vector<double> pad_round_errors(std::vector<double> errors) {
  if (errors.empty()) task_error("learner produced no round errors");
  while (errors.size() < 2) errors.push_back(errors.back());
  return errors;
}

Eigen::Index LagDesign::first_row() const {
  const int max_lag = lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());
  return difference_lag + max_lag;
}

double LagDesign::response(const Eigen::MatrixXd& data, Eigen::Index t) const {
  return difference_lag > 0 ? data(t, target) - data(t - difference_lag, target) : data(t, target);
}

Eigen::VectorXd LagDesign::regressors(const Eigen::MatrixXd& data, Eigen::Index t) const {
  Eigen::VectorXd x(width());
  Eigen::Index k = 0;
  for (int lag : lags) x(k++) = response(data, t - lag);
  for (Eigen::Index f : features) x(k++) = data(t, f);
  return x;
}

double LagDesign::to_level(const Eigen::MatrixXd& data, Eigen::Index t, double r) const {
  return difference_lag > 0 ? data(t - difference_lag, target) + r : r;
}

void LagDesign::build(const Eigen::MatrixXd& data, Span span, Eigen::MatrixXd& x,
                      Eigen::VectorXd& y) const {
  const Eigen::Index begin = std::max(span.begin, first_row());
  const Eigen::Index n = std::max<Eigen::Index>(span.end - begin, 0);
  x.resize(n, width());
  y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    x.row(r) = regressors(data, begin + r).transpose();
    y(r) = response(data, begin + r);
  }
}

}  // namespace loadcast::forecasters
