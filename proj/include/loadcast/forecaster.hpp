#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace loadcast::forecasters {

/// Half-open row range [begin, end).
struct Span {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;

  Eigen::Index size() const { return end - begin; }
};

/// What to forecast and on which rows. Rows are time steps of the completed
/// matrix; the test span follows the validation span directly.
struct ForecastTask {
  Eigen::Index target = 0;
  int horizon = 12;
  Span train;
  Span validation;
  // Exogenous columns used at lag 0 by the regression learners.
  std::vector<Eigen::Index> features;

  Span test() const { return {validation.end, validation.end + horizon}; }
  void validate(Eigen::Index rows, Eigen::Index cols) const;

  /// Last `horizon` rows held out, the `validation` rows before them validate,
  /// everything earlier trains.
  static ForecastTask holdout_split(Eigen::Index rows, Eigen::Index target, int horizon = 12,
                                    int validation = 12);
};

/// A fitted base model. Forecasts are one step ahead: predict(data, t) reads
/// the target only at rows before t (exogenous features may be read at t).
class TrainedForecaster {
 public:
  virtual ~TrainedForecaster() = default;

  const std::string& name() const { return name_; }
  const std::string& kind() const { return kind_; }
  /// Validation MAPE (percent) after each training round.
  const std::vector<double>& round_errors() const { return round_errors_; }
  int rounds() const { return static_cast<int>(round_errors_.size()); }

  virtual double predict(const Eigen::MatrixXd& data, Eigen::Index t) const = 0;
  std::vector<double> predict_span(const Eigen::MatrixXd& data, Span span) const;

  /// name, kind, hyper, parameters, round_errors
  nlohmann::json to_json() const;

 protected:
  TrainedForecaster(std::string name, std::string kind, std::vector<double> round_errors);

  virtual nlohmann::json hyper_json() const = 0;
  virtual nlohmann::json parameters_json() const = 0;

 private:
  std::string name_;
  std::string kind_;
  std::vector<double> round_errors_;
};

using ForecasterPtr = std::shared_ptr<const TrainedForecaster>;

/// Learners that finish in fewer than two rounds repeat their last error so the
/// stream length R satisfies ln R > 0.
std::vector<double> pad_round_errors(std::vector<double> errors);

/// MAPE of one-step predictions against the target column over `span`.
template <typename Predict>
double span_mape(const Eigen::MatrixXd& data, Eigen::Index target, Span span, Predict&& predict);

/// Lagged regression rows on the (optionally differenced) target:
/// u_t = y_t - y_{t-d} (u_t = y_t when d = 0), regressors u_{t-l} for each lag
/// and the exogenous features at time t.
struct LagDesign {
  Eigen::Index target = 0;
  std::vector<int> lags;
  int difference_lag = 0;
  std::vector<Eigen::Index> features;

  Eigen::Index first_row() const;  // earliest t with every regressor defined
  Eigen::Index width() const { return static_cast<Eigen::Index>(lags.size() + features.size()); }
  double response(const Eigen::MatrixXd& data, Eigen::Index t) const;
  Eigen::VectorXd regressors(const Eigen::MatrixXd& data, Eigen::Index t) const;
  /// Maps a predicted response back to the target scale.
  double to_level(const Eigen::MatrixXd& data, Eigen::Index t, double response) const;

  void build(const Eigen::MatrixXd& data, Span span, Eigen::MatrixXd& x, Eigen::VectorXd& y) const;
};

}  // namespace loadcast::forecasters

#include "loadcast/evaluation.hpp"

namespace loadcast::forecasters {

template <typename Predict>
double span_mape(const Eigen::MatrixXd& data, Eigen::Index target, Span span, Predict&& predict) {
  std::vector<double> actual;
  std::vector<double> predicted;
  for (Eigen::Index t = span.begin; t < span.end; ++t) {
    actual.push_back(data(t, target));
    predicted.push_back(predict(t));
  }
  return evaluation::mape(actual, predicted);
}

}  // namespace loadcast::forecasters
