#include "loadcast/error.hpp"
#include "loadcast/evaluation.hpp"
#include "loadcast/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using loadcast::experiment::ExperimentConfig;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "experiment config (JSON)");
  cmd->add_option("--out", flags.out, "output directory (overrides output_dir)");
  cmd->add_option("--seed", flags.seed, "root seed (overrides seed)");
}

ExperimentConfig resolve(const CommonFlags& flags) {
  ExperimentConfig config = flags.config.empty() ? ExperimentConfig{} : loadcast::experiment::load_config(flags.config);
  if (!flags.out.empty()) config.output_dir = flags.out;
  if (flags.seed) config.seed = *flags.seed;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Copula imputation, forecaster bank and adaptive ensemble"};
  app.require_subcommand(1);

  CommonFlags synth_flags, impute_flags, run_flags, ablate_flags;
  auto* synth = app.add_subcommand("synth", "write a synthetic seasonal load panel");
  add_common(synth, synth_flags);
  auto* impute = app.add_subcommand("impute", "mask, fit the copula and impute");
  add_common(impute, impute_flags);
  auto* run = app.add_subcommand("run", "full pipeline: impute, fit, ensemble, evaluate");
  add_common(run, run_flags);
  auto* ablate = app.add_subcommand("ablate", "ensemble MAPE as models are added in order");
  add_common(ablate, ablate_flags);

  std::string forecasts_path, actuals_path, eval_out;
  auto* eval = app.add_subcommand("eval", "recompute statistics from stored forecasts");
  eval->add_option("--forecasts", forecasts_path, "forecast CSV (date, one column per model)")->required();
  eval->add_option("--actuals", actuals_path, "actuals CSV (date, actual)")->required();
  eval->add_option("--out", eval_out, "directory for report.json and report.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    namespace ex = loadcast::experiment;
    if (*synth) {
      const auto config = resolve(synth_flags);
      ex::cmd_synth(config);
      std::cout << "wrote " << config.output_dir << "/data.csv\n";
    } else if (*impute) {
      const auto config = resolve(impute_flags);
      ex::cmd_impute(config);
      std::cout << "wrote " << config.output_dir << "/completed.csv\n";
    } else if (*run) {
      const auto config = resolve(run_flags);
      const auto result = ex::cmd_run(config);
      std::cout << loadcast::evaluation::to_table_csv(result.report);
    } else if (*ablate) {
      const auto config = resolve(ablate_flags);
      std::cout << loadcast::ensemble::ablation_to_csv(ex::cmd_ablate(config));
    } else if (*eval) {
      std::optional<std::filesystem::path> out;
      if (!eval_out.empty()) out = eval_out;
      std::cout << loadcast::evaluation::to_table_csv(ex::cmd_eval(forecasts_path, actuals_path, out));
    }
  } catch (const loadcast::Error& e) {
    std::cerr << "error: " << loadcast::to_string(e.category()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
