#include "loadcast/error.hpp"
#include "loadcast/experiment.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

using namespace loadcast;
using namespace loadcast::experiment;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("loadcast_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

ExperimentConfig config_in(const fs::path& dir) {
  ExperimentConfig c;
  c.output_dir = dir.string();
  return c;
}

std::optional<ErrorCategory> category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  return std::nullopt;
}

int run_cli(const std::string& args, const fs::path& stderr_file) {
  const std::string cmd = std::string(LOADCAST_CLI) + " " + args + " > /dev/null 2> " + stderr_file.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto c = ExperimentConfig::from_json(json::object());
  EXPECT_EQ(c.source, "synthetic");
  EXPECT_EQ(c.mask_fraction, 0.1);
  EXPECT_EQ(c.horizon, 12);
  EXPECT_EQ(c.validation, 12);
  ASSERT_EQ(c.forecasters.size(), 5u);
  EXPECT_EQ(c.forecasters[3].kind, "tcn");
}

TEST(Config, RoundTripsThroughJson) {
  auto c = ExperimentConfig::from_json(json::parse(R"({"seed": 9, "mask": {"fraction": 0.2},
      "forecasters": [{"kind": "gbt", "hyper": {"n_rounds": 7}}, {"name": "r2", "kind": "ridge_ar"}]})"));
  EXPECT_EQ(c.forecasters[0].name, "gbt");
  const auto j = c.to_json();
  EXPECT_EQ(j.at("forecasters")[0].at("hyper").at("n_rounds"), 7);
  EXPECT_EQ(j.at("forecasters")[0].at("hyper").at("max_depth"), 3);
  EXPECT_EQ(ExperimentConfig::from_json(j).to_json().dump(), j.dump());
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_EQ(category_of([] { ExperimentConfig::from_json(json::parse(R"({"sead": 1})")); }), ErrorCategory::config);
  EXPECT_EQ(category_of([] { ExperimentConfig::from_json(json::parse(R"({"mask": {"fraktion": 0.1}})")); }),
            ErrorCategory::config);
  EXPECT_EQ(category_of([] {
              ExperimentConfig::from_json(json::parse(R"({"forecasters": [{"kind": "gbt", "hyper": {"depth": 2}}]})"));
            }),
            ErrorCategory::config);
  EXPECT_EQ(category_of([] { ExperimentConfig::from_json(json::parse(R"({"horizon": "twelve"})")); }),
            ErrorCategory::config);
}

TEST(Config, ValidationRules) {
  const auto bad = [](const char* text) {
    return category_of([&] { ExperimentConfig::from_json(json::parse(text)); });
  };
  EXPECT_EQ(bad(R"({"mask": {"fraction": 1.5}})"), ErrorCategory::config);
  EXPECT_EQ(bad(R"({"forecasters": []})"), ErrorCategory::config);
  EXPECT_EQ(bad(R"({"forecasters": [{"kind": "gbt"}, {"kind": "gbt"}]})"), ErrorCategory::config);
  EXPECT_EQ(bad(R"({"forecasters": [{"name": "ensemble", "kind": "gbt"}]})"), ErrorCategory::config);
  EXPECT_EQ(bad(R"({"forecasters": [{"kind": "lstm"}]})"), ErrorCategory::config);
  EXPECT_EQ(bad(R"({"task": {"features": ["load"]}})"), ErrorCategory::config);
  EXPECT_EQ(bad(R"({"data": {"source": "csv"}})"), ErrorCategory::config);
  EXPECT_EQ(bad(R"({"threads": 0})"), ErrorCategory::config);
}

TEST(Synth, DefaultPanelAndByteIdenticalReruns) {
  const auto a = scratch("synth_a");
  const auto b = scratch("synth_b");
  cmd_synth(config_in(a));
  cmd_synth(config_in(b));
  const auto csv = slurp(a / "data.csv");
  EXPECT_EQ(line_count(csv), 109u);
  EXPECT_EQ(std::count(csv.begin(), csv.begin() + static_cast<long>(csv.find('\n')), ','), 13);
  EXPECT_EQ(csv, slurp(b / "data.csv"));
  EXPECT_EQ(slurp(a / "truth.json"), slurp(b / "truth.json"));
  EXPECT_TRUE(fs::exists(a / "config.json"));

  auto c = config_in(scratch("synth_bad"));
  c.synthetic.n_features = 0;
  EXPECT_THROW(cmd_synth(c), Error);
}

TEST(Impute, NoMaskIsIdentity) {
  const auto dir = scratch("impute_identity");
  cmd_synth(config_in(dir));
  auto c = config_in(dir / "imp");
  c.source = "csv";
  c.csv_path = (dir / "data.csv").string();
  c.mask_fraction = 0;
  cmd_impute(c);
  EXPECT_EQ(slurp(dir / "imp" / "completed.csv"), slurp(dir / "data.csv"));
}

TEST(Impute, CopulaBeatsColumnMeanOnCorrelatedCsv) {
  const auto dir = scratch("impute_recovery");
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1, 0.8, 0.8, 1;
  const auto sample =
      dataset::gen_copula_sample(sigma, {dataset::NormalMarginal{}, dataset::ExponentialMarginal{1.0}}, 2000, 5);
  dataset::save_csv(sample, dir / "pair.csv");
  auto c = config_in(dir / "imp");
  c.source = "csv";
  c.csv_path = (dir / "pair.csv").string();
  cmd_impute(c);
  const auto rec = json::parse(slurp(dir / "imp" / "recovery.json"));
  EXPECT_EQ(rec.at("erased_cells"), 400);
  EXPECT_LT(rec.at("copula_mae").get<double>(), rec.at("mean_mae").get<double>());
  for (const char* f : {"masked.csv", "copula_model.json", "mask.json", "config.json"}) EXPECT_TRUE(fs::exists(dir / "imp" / f)) << f;
}

TEST(Impute, ConstantColumnIsACopulaError) {
  const auto dir = scratch("impute_constant");
  spit(dir / "flat.csv", "date,a,b\n2020-01-01,1,5\n2020-02-01,2,5\n2020-03-01,3,5\n");
  auto c = config_in(dir / "imp");
  c.source = "csv";
  c.csv_path = (dir / "flat.csv").string();
  c.mask_fraction = 0;
  try {
    cmd_impute(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::copula);
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
    EXPECT_EQ(std::string(e.what()).rfind("impute: ", 0), 0u) << e.what();
  }
}

TEST(Run, DefaultBenchmarkArtifacts) {
  const auto dir = scratch("run_default");
  const auto r = cmd_run(config_in(dir));
  EXPECT_EQ(r.report.models.size(), 6u);
  EXPECT_EQ(r.report.models.back(), "ensemble");
  EXPECT_EQ(r.report.periods.size(), 12u);
  EXPECT_EQ(r.report.periods.front(), "2021-01-01");
  for (const char* f : {"forecasts.csv", "actuals.csv", "report.json", "report.csv", "trace.csv", "completed.csv",
                        "copula_model.json", "config.json", "models/tcn.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(line_count(slurp(dir / "forecasts.csv")), 13u);
  const auto trace = slurp(dir / "trace.csv");
  EXPECT_EQ(line_count(trace), 1u + static_cast<std::size_t>(r.ensemble.state.rounds()));
  EXPECT_EQ(json::parse(slurp(dir / "config.json")).at("output_dir"), dir.string());
}

TEST(Run, SingleModelRosterPassesThrough) {
  auto c = config_in(scratch("run_single"));
  c.forecasters = {{"ridge_ar", "ridge_ar", json::object()}};
  const auto r = cmd_run(c);
  ASSERT_EQ(r.report.models.size(), 2u);
  EXPECT_EQ(r.report.per_period_mape.col(0), r.report.per_period_mape.col(1));
}

TEST(Run, RerunIsByteIdenticalAcrossThreadCounts) {
  const auto dir = scratch("run_rerun");
  auto c = config_in(dir);
  cmd_run(c);
  const auto first = slurp(dir / "report.json") + slurp(dir / "forecasts.csv") + slurp(dir / "trace.csv") +
                     slurp(dir / "models" / "trmf.json");
  c.threads = 4;
  cmd_run(c);
  const auto second = slurp(dir / "report.json") + slurp(dir / "forecasts.csv") + slurp(dir / "trace.csv") +
                      slurp(dir / "models" / "trmf.json");
  EXPECT_EQ(first, second);
}

TEST(Ablate, RosterSizeAndDuplicateOfTheBest) {
  auto c = config_in(scratch("ablate_one"));
  c.forecasters = {{"gbt", "gbt", json::object()}};
  EXPECT_EQ(category_of([&] { cmd_ablate(c); }), ErrorCategory::config);

  c = config_in(scratch("ablate_two"));
  c.forecasters = {{"naive_seasonal", "naive_seasonal", json::object()}, {"gbt", "gbt", json::object()}};
  const auto two = cmd_ablate(c);
  EXPECT_EQ(two.size(), 2u);
  EXPECT_EQ(line_count(slurp(fs::path(c.output_dir) / "ablation.csv")), 3u);

  c.forecasters.push_back({"gbt_copy", "gbt", json::object()});
  const auto three = cmd_ablate(c);
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[1].models, (std::vector<std::string>{"gbt", "gbt_copy"}));
  EXPECT_EQ(three[1].mape, three[0].mape);
}

TEST(Eval, PerfectForecastsAndPreconditions) {
  const auto dir = scratch("eval");
  std::string f = "date,a,b,ensemble\n", a = "date,actual\n";
  for (int m = 1; m <= 3; ++m) {
    const std::string d = "2021-0" + std::to_string(m) + "-01";
    const std::string v = std::to_string(100 + m);
    f += d + "," + v + "," + std::to_string(90 + m) + "," + v + "\n";
    a += d + "," + v + "\n";
  }
  spit(dir / "f.csv", f);
  spit(dir / "a.csv", a);
  const auto report = cmd_eval(dir / "f.csv", dir / "a.csv", dir / "out");
  EXPECT_EQ(report.models.back(), "ensemble");
  EXPECT_TRUE(report.per_period_mape.col(2).isZero(0));
  EXPECT_TRUE(report.per_period_mape.col(0).isZero(0));
  EXPECT_TRUE(fs::exists(dir / "out" / "report.csv"));

  spit(dir / "f1.csv", "date,a,ensemble\n2021-01-01,1,1\n");
  spit(dir / "a1.csv", "date,actual\n2021-01-01,1\n");
  EXPECT_EQ(category_of([&] { cmd_eval(dir / "f1.csv", dir / "a1.csv", std::nullopt); }), ErrorCategory::evaluation);

  spit(dir / "a2.csv", "date,actual\n2021-01-01,1\n2021-02-01,2\n2021-04-01,3\n");
  EXPECT_EQ(category_of([&] { cmd_eval(dir / "f.csv", dir / "a2.csv", std::nullopt); }), ErrorCategory::data);
}

TEST(Eval, ReferenceGridRecoversWinLossAndFrank) {
  // Forecasts 100 * (1 + MAPE/100) against actuals of 100 reproduce the grid.
  const double grid[12][6] = {{6.47, 2.11, 5.37, 7.39, 14.63, 2.08},   {38.22, 5.78, 2.40, 13.31, 36.09, 2.40},
                              {11.18, 11.95, 14.22, 3.42, 9.65, 3.42}, {7.88, 1.97, 2.21, 5.97, 3.05, 2.10},
                              {8.10, 5.09, 0.76, 4.57, 2.08, 0.76},    {9.80, 0.32, 1.43, 3.32, 5.03, 0.32},
                              {24.50, 13.77, 14.27, 10.37, 5.51, 5.54}, {4.18, 13.93, 9.40, 14.94, 19.16, 4.18},
                              {0.33, 9.93, 1.69, 19.66, 8.18, 0.33},   {2.68, 1.93, 0.87, 10.68, 0.67, 0.67},
                              {6.61, 3.53, 1.93, 8.38, 0.01, 0.01},    {6.09, 5.30, 3.90, 1.66, 3.67, 3.75}};
  const auto dir = scratch("eval_grid");
  std::string f = "date,CNN,LSTM,TCN,TRMF,XGB,Ours\n", a = "date,actual\n";
  for (int m = 0; m < 12; ++m) {
    char date[16];
    std::snprintf(date, sizeof date, "2021-%02d-01", m + 1);
    f += date;
    for (double v : grid[m]) f += "," + std::to_string(100.0 + v);
    f += "\n";
    a += std::string(date) + ",100\n";
  }
  spit(dir / "f.csv", f);
  spit(dir / "a.csv", a);
  const auto report = cmd_eval(dir / "f.csv", dir / "a.csv", std::nullopt);
  EXPECT_EQ(report.models.back(), "Ours");
  const std::vector<int> wins{12, 11, 12, 11, 10};
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(report.win_loss[j].wins, wins[j]) << report.models[j];
  const std::vector<double> f_rank{4.7500, 3.6250, 3.2500, 4.2083, 3.5000, 1.6667};
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(report.f_rank[j], f_rank[j], 1e-4);
}

TEST(Cli, ExitCodesAndSingleLineErrors) {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  EXPECT_EQ(run_cli("synth --out " + (dir / "s").string() + " --seed 3", dir / "err.txt"), 0);
  EXPECT_TRUE(fs::exists(dir / "s" / "data.csv"));
  EXPECT_EQ(json::parse(slurp(dir / "s" / "config.json")).at("seed"), 3);

  spit(dir / "bad.json", R"({"mask": {"fraction": 2}})");
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string(), dir / "err.txt"), 2);
  const auto err = slurp(dir / "err.txt");
  EXPECT_EQ(err.rfind("error: config: ", 0), 0u) << err;
  EXPECT_EQ(line_count(err), 1u);

  EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string(), dir / "err.txt"), 2);
  EXPECT_EQ(slurp(dir / "err.txt").rfind("error: io: ", 0), 0u);
  EXPECT_NE(run_cli("frobnicate", dir / "err.txt"), 0);
}
