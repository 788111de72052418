#pragma once

#include "loadcast/copula.hpp"
#include "loadcast/dataset.hpp"
#include "loadcast/ensemble.hpp"
#include "loadcast/evaluation.hpp"
#include "loadcast/forecaster.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loadcast::experiment {

struct ForecasterSpec {
  std::string name;
  std::string kind;  // naive_seasonal | ridge_ar | gbt | tcn | trmf
  nlohmann::json hyper = nlohmann::json::object();
};

/// Resolved experiment settings. Serializes back to the JSON document it was
/// read from, with every default filled in.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  std::string source = "synthetic";  // synthetic | csv
  std::string csv_path;
  std::map<std::string, std::vector<double>> ordinal;
  std::vector<std::string> missing_tokens{"", "NA"};
  dataset::SeasonalLoadParams synthetic;

  double mask_fraction = 0.1;
  copula::EmConfig copula;

  std::string target = "load";
  int horizon = 12;
  int validation = 12;
  std::vector<std::string> features;

  std::vector<ForecasterSpec> forecasters = default_roster();
  int threads = 1;

  static std::vector<ForecasterSpec> default_roster();
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Data after the masking and imputation stages.
struct Prepared {
  dataset::ObservationMatrix original;
  dataset::ObservationMatrix masked;
  dataset::MaskRecord mask;
  copula::CopulaModel model;
  copula::ImputationResult imputation;
};

dataset::ObservationMatrix load_data(const ExperimentConfig& config);
Prepared prepare(const ExperimentConfig& config);

/// MAE of copula and column-mean imputation on the erased cells, overall and per column.
nlohmann::json recovery_metrics(const Prepared& prepared);

forecasters::ForecastTask make_task(const ExperimentConfig& config, const dataset::ObservationMatrix& data);

forecasters::ForecasterPtr fit_forecaster(const ForecasterSpec& spec, const forecasters::ForecastTask& task,
                                          const Eigen::MatrixXd& data, std::uint64_t root_seed);

/// Fits the roster, fanning out over `threads` workers; output order follows the roster.
std::vector<forecasters::ForecasterPtr> fit_roster(const ExperimentConfig& config,
                                                   const forecasters::ForecastTask& task,
                                                   const Eigen::MatrixXd& data);

struct RunResult {
  Prepared prepared;
  forecasters::ForecastTask task;
  std::vector<forecasters::ForecasterPtr> models;
  std::vector<ensemble::ModelStream> streams;
  ensemble::EnsembleResult ensemble;
  std::vector<double> actuals;
  std::vector<std::string> periods;
  evaluation::EvaluationReport report;
};

RunResult run_pipeline(const ExperimentConfig& config);

/// Target values over the test span, taken from the pre-mask data where observed.
std::vector<double> holdout_actuals(const Prepared& prepared, const forecasters::ForecastTask& task);

// Subcommands. Each writes its artifacts under config.output_dir, including
// the resolved config.json.
void cmd_synth(const ExperimentConfig& config);
void cmd_impute(const ExperimentConfig& config);
RunResult cmd_run(const ExperimentConfig& config);
std::vector<ensemble::AblationStep> cmd_ablate(const ExperimentConfig& config);
evaluation::EvaluationReport cmd_eval(const std::filesystem::path& forecasts_csv,
                                      const std::filesystem::path& actuals_csv,
                                      const std::optional<std::filesystem::path>& out_dir);

}  // namespace loadcast::experiment
