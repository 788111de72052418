#include "loadcast/ridge_ar.hpp"

#include "loadcast/error.hpp"

#include <algorithm>

namespace loadcast::forecasters {

RidgeArForecaster::RidgeArForecaster(std::string name, LagDesign design, RidgeArHyper hyper,
                                     double intercept, Eigen::VectorXd coefficients,
                                     std::vector<double> round_errors)
    : TrainedForecaster(std::move(name), "ridge_ar", std::move(round_errors)),
      design_(std::move(design)),
      hyper_(std::move(hyper)),
      intercept_(intercept),
      coefficients_(std::move(coefficients)) {}

double RidgeArForecaster::predict(const Eigen::MatrixXd& data, Eigen::Index t) const {
  if (t < design_.first_row()) throw Error(ErrorCategory::forecaster, name() + ": not enough history");
  const double r = intercept_ + coefficients_.dot(design_.regressors(data, t));
  return design_.to_level(data, t, r);
}

nlohmann::json RidgeArForecaster::hyper_json() const {
  return {{"lags", hyper_.lags}, {"ridge", hyper_.ridge}, {"difference_lag", hyper_.difference_lag}};
}

nlohmann::json RidgeArForecaster::parameters_json() const {
  return {{"intercept", intercept_},
          {"coefficients", std::vector<double>(coefficients_.data(), coefficients_.data() + coefficients_.size())},
          {"features", design_.features}};
}

ForecasterPtr fit_ridge_ar(const ForecastTask& task, const Eigen::MatrixXd& data,
                           const RidgeArHyper& hyper, std::string name) {
  task.validate(data.rows(), data.cols());
  if (hyper.lags.empty() || *std::min_element(hyper.lags.begin(), hyper.lags.end()) < 1) {
    throw Error(ErrorCategory::forecaster, name + ": lags must be positive");
  }
  if (hyper.ridge < 0.0) throw Error(ErrorCategory::forecaster, name + ": ridge must be non-negative");
  LagDesign design{task.target, hyper.lags, hyper.difference_lag, task.features};
  if (task.train.end <= design.first_row() + 1) {
    throw Error(ErrorCategory::forecaster, name + ": train span not longer than the maximum lag");
  }

  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  design.build(data, task.train, x, y);
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  if (hyper.ridge == 0.0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double top = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    if (eig.eigenvalues().minCoeff() <= 1e-12 * top) {
      throw Error(ErrorCategory::forecaster,
                  name + ": singular normal equations at ridge = 0; use ridge > 0");
    }
  }
  gram.diagonal().array() += hyper.ridge;
  const Eigen::VectorXd beta = gram.ldlt().solve(xc.transpose() * yc);
  const double intercept = y_mean - x_mean.dot(beta);

  auto model = std::make_shared<RidgeArForecaster>(name, design, hyper, intercept, beta,
                                                   std::vector<double>{0.0, 0.0});
  const double err = span_mape(data, task.target, task.validation,
                               [&](Eigen::Index t) { return model->predict(data, t); });
  return std::make_shared<RidgeArForecaster>(std::move(name), std::move(design), hyper, intercept,
                                             beta, std::vector<double>{err, err});
}

}  // namespace loadcast::forecasters
