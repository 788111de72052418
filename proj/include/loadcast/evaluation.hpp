#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace loadcast::evaluation {

/// Mean absolute percentage error in percent. Throws on a zero actual.
double mape(std::span<const double> actual, std::span<const double> predicted);

struct MeanStd {
  double mean;
  double std;  // population (divisor n)
};

MeanStd mean_std_mape(std::span<const double> per_period);

struct WinLoss {
  int wins = 0;
  int losses = 0;
};

/// Ties count as ensemble wins.
WinLoss win_loss(std::span<const double> ensemble_mape, std::span<const double> baseline_mape);

/// Average rank per model (columns) across periods (rows); rank 1 is the
/// smallest error and ties share the mean of their ranks.
std::vector<double> friedman_rank(const Eigen::MatrixXd& mape_grid);

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;    // two-sided
  int n_effective = 0;
  bool exact = true;
  bool degenerate = false;  // every difference was zero
};

inline constexpr int kWilcoxonExactMaxN = 25;

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct EvaluationReport {
  std::vector<std::string> periods;
  std::vector<std::string> models;  // ensemble is the last column
  Eigen::MatrixXd per_period_mape;  // periods x models, percent
  std::vector<double> mean_mape;
  std::vector<double> std_mape;
  std::vector<double> f_rank;
  // Baseline statistics against the ensemble; the ensemble's own entry is empty.
  std::vector<WinLoss> win_loss;
  std::vector<WilcoxonResult> wilcoxon;

  std::size_t ensemble_index() const { return models.size() - 1; }
};

/// Builds the report from per-period MAPE values. `models` names the grid
/// columns; the column named `ensemble_name` is moved to the end.
EvaluationReport build_report_from_mape(const Eigen::MatrixXd& mape_grid,
                                        std::vector<std::string> models,
                                        const std::string& ensemble_name,
                                        std::vector<std::string> periods = {});

/// Per-period MAPE of each forecast column against the actuals, then the report.
EvaluationReport build_report(std::span<const double> actuals, const Eigen::MatrixXd& forecasts,
                              std::vector<std::string> models, const std::string& ensemble_name,
                              std::vector<std::string> periods = {});

nlohmann::json to_json(const EvaluationReport& report);
/// Periods as rows, models as columns, summary rows appended.
std::string to_table_csv(const EvaluationReport& report);

}  // namespace loadcast::evaluation
