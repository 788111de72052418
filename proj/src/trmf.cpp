#include "loadcast/trmf.hpp"

#include "loadcast/error.hpp"
#include "loadcast/rng.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

namespace loadcast::forecasters {

namespace {

[[noreturn]] void trmf_error(const std::string& message) { throw Error(ErrorCategory::forecaster, "trmf: " + message); }

int max_lag(const TrmfHyper& h) { return *std::max_element(h.lags.begin(), h.lags.end()); }

void update_loadings(const Eigen::MatrixXd& y, TrmfModel& model) {
  Eigen::MatrixXd gram = model.factors * model.factors.transpose();
  gram.diagonal().array() += model.hyper.lambda_reg;
  model.loadings = gram.llt().solve(model.factors * y.transpose()).transpose();
}

void update_factors(const Eigen::MatrixXd& y, TrmfModel& model) {
  const Eigen::Index k = model.loadings.cols();
  const Eigen::Index m = y.cols();
  const auto& hyper = model.hyper;
  const int lmax = max_lag(hyper);
  const auto var = [m](Eigen::Index r, Eigen::Index t) { return r * m + t; };

  Eigen::MatrixXd block = model.loadings.transpose() * model.loadings;
  block.diagonal().array() += hyper.lambda_reg;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(k * k * m + k * m * (hyper.lags.size() + 1) * (hyper.lags.size() + 1)));
  for (Eigen::Index t = 0; t < m; ++t) {
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) entries.emplace_back(var(a, t), var(b, t), block(a, b));
    }
  }
  if (hyper.kappa_reg > 0.0) {
    std::vector<std::pair<Eigen::Index, double>> resid;
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index t = lmax; t < m; ++t) {
        resid.assign(1, {t, 1.0});
        for (std::size_t j = 0; j < hyper.lags.size(); ++j) {
          resid.emplace_back(t - hyper.lags[j], -model.ar_weights(r, static_cast<Eigen::Index>(j)));
        }
        for (const auto& [ta, ca] : resid) {
          for (const auto& [tb, cb] : resid) entries.emplace_back(var(r, ta), var(r, tb), hyper.kappa_reg * ca * cb);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> hess(k * m, k * m);
  hess.setFromTriplets(entries.begin(), entries.end());

  const Eigen::MatrixXd rhs_mat = model.loadings.transpose() * y;  // k x m
  Eigen::VectorXd rhs(k * m);
  for (Eigen::Index r = 0; r < k; ++r) rhs.segment(r * m, m) = rhs_mat.row(r).transpose();

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(hess);
  if (solver.info() != Eigen::Success) trmf_error("factor system is not positive definite");
  const Eigen::VectorXd s = solver.solve(rhs);
  for (Eigen::Index r = 0; r < k; ++r) model.factors.row(r) = s.segment(r * m, m).transpose();
}

void update_ar_weights(TrmfModel& model) {
  const auto& hyper = model.hyper;
  const Eigen::Index m = model.factors.cols();
  const int lmax = max_lag(hyper);
  const auto p = static_cast<Eigen::Index>(hyper.lags.size());
  const Eigen::Index n = m - lmax;
  for (Eigen::Index r = 0; r < model.factors.rows(); ++r) {
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd target(n);
    for (Eigen::Index t = lmax; t < m; ++t) {
      target(t - lmax) = model.factors(r, t);
      for (Eigen::Index j = 0; j < p; ++j) x(t - lmax, j) = model.factors(r, t - hyper.lags[static_cast<std::size_t>(j)]);
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += hyper.ar_ridge;
    model.ar_weights.row(r) = gram.ldlt().solve(x.transpose() * target).transpose();
  }
}

}  // namespace

Eigen::VectorXd TrmfModel::ar_predict(const Eigen::MatrixXd& s, Eigen::Index t) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(s.rows());
  for (std::size_t j = 0; j < hyper.lags.size(); ++j) {
    const Eigen::Index src = t - hyper.lags[j];
    if (src < 0) continue;
    out += ar_weights.col(static_cast<Eigen::Index>(j)).cwiseProduct(s.col(src));
  }
  return out;
}

double trmf_objective(const Eigen::MatrixXd& y, const TrmfModel& model) {
  const auto& hyper = model.hyper;
  double value = (y - model.loadings * model.factors).squaredNorm() +
                 hyper.lambda_reg * (model.loadings.squaredNorm() + model.factors.squaredNorm());
  double ar = 0.0;
  for (Eigen::Index t = max_lag(hyper); t < model.factors.cols(); ++t) {
    ar += (model.factors.col(t) - model.ar_predict(model.factors, t)).squaredNorm();
  }
  return value + hyper.kappa_reg * (ar + hyper.ar_ridge * model.ar_weights.squaredNorm());
}

TrmfModel fit_trmf(const Eigen::MatrixXd& y, const TrmfHyper& hyper,
                   const std::function<void(const TrmfModel&)>& after_sweep) {
  const Eigen::Index q = y.rows();
  const Eigen::Index m = y.cols();
  if (hyper.rank < 1) trmf_error("rank must be at least 1");
  if (hyper.rank > std::min(q, m)) trmf_error("rank exceeds min(rows, columns)");
  if (hyper.lags.empty() || *std::min_element(hyper.lags.begin(), hyper.lags.end()) < 1) {
    trmf_error("lags must be positive");
  }
  if (max_lag(hyper) >= m) trmf_error("maximum lag must be shorter than the series");
  if (!(hyper.lambda_reg > 0.0) || hyper.kappa_reg < 0.0 || hyper.ar_ridge < 0.0) {
    trmf_error("need lambda_reg > 0 and non-negative kappa_reg, ar_ridge");
  }
  if (hyper.sweeps < 1) trmf_error("sweeps must be at least 1");
  if (!y.allFinite()) trmf_error("input contains non-finite values");

  TrmfModel model;
  model.hyper = hyper;
  const Eigen::Index k = hyper.rank;
  Rng rng = make_rng(hyper.seed, "trmf/init");
  std::normal_distribution<double> normal(0.0, 1.0);
  model.factors = Eigen::MatrixXd(k, m).unaryExpr([&](double) { return normal(rng); });
  model.loadings = Eigen::MatrixXd::Zero(q, k);
  model.ar_weights = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(hyper.lags.size()));

  for (int sweep = 1; sweep <= hyper.sweeps; ++sweep) {
    update_loadings(y, model);
    update_factors(y, model);
    update_ar_weights(model);
    const double obj = trmf_objective(y, model);
    if (!std::isfinite(obj)) trmf_error("objective became non-finite at sweep " + std::to_string(sweep));
    const double prev = model.objective.empty() ? obj : model.objective.back();
    model.objective.push_back(obj);
    if (after_sweep) after_sweep(model);
    if (sweep > 1 && prev - obj <= hyper.tol * std::max(prev, 1e-300)) break;
  }
  return model;
}

Eigen::MatrixXd forecast_trmf(const TrmfModel& model, int horizon) {
  if (horizon < 1) trmf_error("horizon must be at least 1");
  const Eigen::Index m = model.factors.cols();
  Eigen::MatrixXd s(model.factors.rows(), m + horizon);
  s.leftCols(m) = model.factors;
  for (Eigen::Index t = m; t < m + horizon; ++t) s.col(t) = model.ar_predict(s, t);
  return model.loadings * s.rightCols(horizon);
}

TrmfForecaster::TrmfForecaster(std::string name, Eigen::Index target, TrmfModel model,
                               Eigen::RowVectorXd mean, Eigen::RowVectorXd scale,
                               std::vector<double> round_errors)
    : TrainedForecaster(std::move(name), "trmf", std::move(round_errors)),
      target_(target),
      model_(std::move(model)),
      mean_(std::move(mean)),
      scale_(std::move(scale)) {}

namespace {

// Predicts target row t; rows past the fitted span (and before t) are folded
// in by the ridge problem ||y - L s||^2 + lambda ||s||^2 + kappa ||s - s_ar||^2.
double trmf_predict(const TrmfModel& model, const Eigen::MatrixXd& data, Eigen::Index target,
                    const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& scale, Eigen::Index t) {
  const Eigen::Index m = model.factors.cols();
  if (t < 1) trmf_error("not enough history");
  const Eigen::Index known = std::min(t, m);
  Eigen::MatrixXd s(model.factors.rows(), t + 1);
  s.leftCols(known) = model.factors.leftCols(known);
  if (t > m) {
    Eigen::MatrixXd gram = model.loadings.transpose() * model.loadings;
    gram.diagonal().array() += model.hyper.lambda_reg + model.hyper.kappa_reg;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    for (Eigen::Index tau = m; tau < t; ++tau) {
      const Eigen::VectorXd yt = ((data.row(tau) - mean).array() / scale.array()).matrix().transpose();
      s.col(tau) = llt.solve(model.loadings.transpose() * yt + model.hyper.kappa_reg * model.ar_predict(s, tau));
    }
  }
  const double z = model.loadings.row(target).dot(model.ar_predict(s, t));
  return z * scale(target) + mean(target);
}

}  // namespace

double TrmfForecaster::predict(const Eigen::MatrixXd& data, Eigen::Index t) const {
  return trmf_predict(model_, data, target_, mean_, scale_, t);
}

nlohmann::json TrmfForecaster::hyper_json() const {
  const auto& h = model_.hyper;
  return {{"rank", h.rank},   {"lags", h.lags},     {"lambda_reg", h.lambda_reg}, {"kappa_reg", h.kappa_reg},
          {"ar_ridge", h.ar_ridge}, {"sweeps", h.sweeps}, {"tol", h.tol},           {"seed", h.seed}};
}

nlohmann::json TrmfForecaster::parameters_json() const {
  const auto rows = [](const Eigen::MatrixXd& a) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const Eigen::RowVectorXd row = a.row(r);
      out.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    return out;
  };
  return {{"loadings", rows(model_.loadings)},
          {"factors", rows(model_.factors)},
          {"ar_weights", rows(model_.ar_weights)},
          {"column_mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
          {"column_scale", std::vector<double>(scale_.data(), scale_.data() + scale_.size())},
          {"objective", model_.objective}};
}

ForecasterPtr fit_trmf_forecaster(const ForecastTask& task, const Eigen::MatrixXd& data,
                                  const TrmfHyper& hyper, std::string name) {
  task.validate(data.rows(), data.cols());
  if (task.train.begin > 0) trmf_error("train span must start at row 0");
  const Eigen::MatrixXd train = data.middleRows(task.train.begin, task.train.size());
  const Eigen::RowVectorXd mean = train.colwise().mean();
  Eigen::RowVectorXd scale =
      ((train.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(train.rows())).sqrt();
  scale = scale.unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  const Eigen::MatrixXd z = (train.rowwise() - mean).array().rowwise() / scale.array();

  std::vector<double> errors;
  const auto validation_mape = [&](const TrmfModel& model) {
    return span_mape(data, task.target, task.validation,
                     [&](Eigen::Index t) { return trmf_predict(model, data, task.target, mean, scale, t); });
  };
  TrmfModel model = fit_trmf(z.transpose(), hyper, [&](const TrmfModel& m) { errors.push_back(validation_mape(m)); });
  return std::make_shared<TrmfForecaster>(std::move(name), task.target, std::move(model), mean, scale,
                                          pad_round_errors(std::move(errors)));
}

}  // namespace loadcast::forecasters
