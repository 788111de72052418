#pragma once

#include "loadcast/forecaster.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace loadcast::ensemble {

/// Sum of the first r errors (r is 1-based).
double cumulative_error(std::span<const double> errs, int r);

/// sqrt(1 / ln R); R must be at least 2.
double compute_lambda(int rounds);

/// Softmin exp(-lambda_t ce_t) / sum_n exp(-lambda_n ce_n), in log space.
Eigen::VectorXd update_weights(const Eigen::VectorXd& ce, const Eigen::VectorXd& lambda);

double aggregate(const Eigen::VectorXd& preds, const Eigen::VectorXd& weights);

/// One base model as seen by the ensemble: its per-round validation errors and
/// its forecasts for each evaluation period.
struct ModelStream {
  std::string name;
  std::vector<double> round_errors;
  std::vector<double> forecasts;
};

struct EnsembleState {
  std::vector<std::string> model_names;
  std::vector<std::vector<double>> err;
  Eigen::MatrixXd ce;       // rounds x models, frozen past each model's own R
  Eigen::VectorXd lambda;
  Eigen::MatrixXd weights;  // rounds x models
  Eigen::VectorXd final_weights;

  int rounds() const { return static_cast<int>(weights.rows()); }
};

/// Convergence trace: round, then err_<m>, ce_<m>, w_<m> for each model; err
/// is blank past the model's own R.
std::string trace_csv(const EnsembleState& state);

struct EnsembleResult {
  std::vector<double> forecasts;
  EnsembleState state;
};

EnsembleResult run_ensemble(const std::vector<ModelStream>& models);

/// Streams built from fitted forecasters over the task's test span.
std::vector<ModelStream> make_streams(const std::vector<forecasters::ForecasterPtr>& models,
                                      const forecasters::ForecastTask& task, const Eigen::MatrixXd& data);

struct AblationStep {
  int prefix_size = 0;
  std::vector<std::string> models;
  double mape = 0.0;
};

/// Orders models by final validation error (ties: larger final weight in the
/// full ensemble, then name) and scores the ensemble of every prefix against
/// `actuals`.
std::vector<AblationStep> ablation(const std::vector<ModelStream>& models, std::span<const double> actuals);

/// prefix_size, models (';'-joined), mape
std::string ablation_to_csv(const std::vector<AblationStep>& path);

}  // namespace loadcast::ensemble
