#include "loadcast/experiment.hpp"

#include "loadcast/error.hpp"
#include "loadcast/format.hpp"
#include "loadcast/gbt.hpp"
#include "loadcast/naive_seasonal.hpp"
#include "loadcast/ridge_ar.hpp"
#include "loadcast/rng.hpp"
#include "loadcast/tcn.hpp"
#include "loadcast/trmf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

namespace loadcast::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCategory::config, message); }

// Reads keys from a JSON object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) config_error(where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      config_error(where_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    T value{};
    seen_.insert(key);
    if (!j_.contains(key)) return;
    get(key, value);
    out = value;
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) config_error(where_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

forecasters::RidgeArHyper parse_ridge(const json& j, const std::string& where) {
  forecasters::RidgeArHyper h;
  Reader r(j, where);
  r.get("lags", h.lags);
  r.get("ridge", h.ridge);
  r.get("difference_lag", h.difference_lag);
  r.finish();
  return h;
}

forecasters::GbtHyper parse_gbt(const json& j, const std::string& where) {
  forecasters::GbtHyper h;
  Reader r(j, where);
  r.get("n_rounds", h.n_rounds);
  r.get("max_depth", h.max_depth);
  r.get("min_leaf", h.min_leaf);
  r.get("reg_alpha", h.reg_alpha);
  r.get("reg_gamma", h.reg_gamma);
  r.get("learning_rate", h.learning_rate);
  r.get("tol", h.tol);
  r.get("lags", h.lags);
  r.get("difference_lag", h.difference_lag);
  r.finish();
  return h;
}

// Seed stays empty unless given, so it follows the experiment seed.
forecasters::TcnHyper parse_tcn(const json& j, const std::string& where, std::optional<std::uint64_t>& seed) {
  forecasters::TcnHyper h;
  Reader r(j, where);
  r.get("epochs", h.epochs);
  r.get("learn_rate", h.learn_rate);
  r.get("channels", h.channels);
  r.get("kernel", h.kernel);
  r.get("dilations", h.dilations);
  r.get("difference_lag", h.difference_lag);
  r.get("seed", seed);
  r.finish();
  return h;
}

forecasters::TrmfHyper parse_trmf(const json& j, const std::string& where, std::optional<std::uint64_t>& seed) {
  forecasters::TrmfHyper h;
  Reader r(j, where);
  r.get("rank", h.rank);
  r.get("lags", h.lags);
  r.get("lambda_reg", h.lambda_reg);
  r.get("kappa_reg", h.kappa_reg);
  r.get("ar_ridge", h.ar_ridge);
  r.get("sweeps", h.sweeps);
  r.get("tol", h.tol);
  r.get("seed", seed);
  r.finish();
  return h;
}

int parse_period(const json& j, const std::string& where) {
  int period = 12;
  Reader r(j, where);
  r.get("period", period);
  r.finish();
  return period;
}

// Full hyper object with defaults filled in.
json resolved_hyper(const ForecasterSpec& spec) {
  const std::string where = "forecasters." + spec.name + ".hyper";
  std::optional<std::uint64_t> seed;
  json out;
  if (spec.kind == "naive_seasonal") {
    out = {{"period", parse_period(spec.hyper, where)}};
  } else if (spec.kind == "ridge_ar") {
    const auto h = parse_ridge(spec.hyper, where);
    out = {{"lags", h.lags}, {"ridge", h.ridge}, {"difference_lag", h.difference_lag}};
  } else if (spec.kind == "gbt") {
    const auto h = parse_gbt(spec.hyper, where);
    out = {{"n_rounds", h.n_rounds},   {"max_depth", h.max_depth},         {"min_leaf", h.min_leaf},
           {"reg_alpha", h.reg_alpha}, {"reg_gamma", h.reg_gamma},         {"learning_rate", h.learning_rate},
           {"tol", h.tol},             {"lags", h.lags},                   {"difference_lag", h.difference_lag}};
  } else if (spec.kind == "tcn") {
    const auto h = parse_tcn(spec.hyper, where, seed);
    out = {{"epochs", h.epochs},       {"learn_rate", h.learn_rate}, {"channels", h.channels},
           {"kernel", h.kernel},       {"dilations", h.dilations},   {"difference_lag", h.difference_lag}};
  } else if (spec.kind == "trmf") {
    const auto h = parse_trmf(spec.hyper, where, seed);
    out = {{"rank", h.rank},         {"lags", h.lags},     {"lambda_reg", h.lambda_reg}, {"kappa_reg", h.kappa_reg},
           {"ar_ridge", h.ar_ridge}, {"sweeps", h.sweeps}, {"tol", h.tol}};
  } else {
    config_error("forecaster '" + spec.name + "': unknown kind '" + spec.kind + "'");
  }
  if (seed) out["seed"] = *seed;
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCategory::io, "failed writing " + path.string());
}

fs::path ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCategory::io, "cannot create output directory " + dir.string());
  return dir;
}

void write_config(const ExperimentConfig& config) {
  write_text(fs::path(config.output_dir) / "config.json", config.to_json().dump(2) + "\n");
}

// Re-raises an error with the failing stage prefixed, keeping its category.
template <typename F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.category(), name + ": " + e.what());
  }
}

}  // namespace

std::vector<ForecasterSpec> ExperimentConfig::default_roster() {
  return {{"naive_seasonal", "naive_seasonal", json::object()},
          {"ridge_ar", "ridge_ar", json::object()},
          {"gbt", "gbt", json::object()},
          {"tcn", "tcn", json::object()},
          {"trmf", "trmf", json::object()}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  Reader top(j, "config");
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  top.get("threads", c.threads);
  if (const json* d = top.sub("data")) {
    Reader r(*d, "data");
    r.get("source", c.source);
    r.get("csv_path", c.csv_path);
    r.get("ordinal", c.ordinal);
    r.get("missing_tokens", c.missing_tokens);
    if (const json* s = r.sub("synthetic")) {
      Reader g(*s, "data.synthetic");
      g.get("n_periods", c.synthetic.n_periods);
      g.get("base", c.synthetic.base);
      g.get("trend", c.synthetic.trend);
      g.get("seasonal_amp", c.synthetic.seasonal_amp);
      g.get("noise_sd", c.synthetic.noise_sd);
      g.get("n_features", c.synthetic.n_features);
      g.get("first_month", c.synthetic.first_month);
      g.finish();
    }
    r.finish();
  }
  if (const json* m = top.sub("mask")) {
    Reader r(*m, "mask");
    r.get("fraction", c.mask_fraction);
    r.finish();
  }
  if (const json* cp = top.sub("copula")) {
    Reader r(*cp, "copula");
    r.get("max_iters", c.copula.max_iters);
    r.get("tol", c.copula.tol);
    r.get("ridge", c.copula.ridge);
    r.finish();
  }
  if (const json* t = top.sub("task")) {
    Reader r(*t, "task");
    r.get("target", c.target);
    r.get("horizon", c.horizon);
    r.get("validation", c.validation);
    r.get("features", c.features);
    r.finish();
  }
  if (const json* f = top.sub("forecasters")) {
    if (!f->is_array()) config_error("forecasters must be an array");
    c.forecasters.clear();
    for (const auto& item : *f) {
      ForecasterSpec spec;
      Reader r(item, "forecasters[]");
      r.get("name", spec.name);
      r.get("kind", spec.kind);
      r.get("hyper", spec.hyper);
      r.finish();
      if (spec.name.empty()) spec.name = spec.kind;
      c.forecasters.push_back(std::move(spec));
    }
  }
  top.finish();
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json roster = json::array();
  for (const auto& spec : forecasters) {
    roster.push_back({{"name", spec.name}, {"kind", spec.kind}, {"hyper", resolved_hyper(spec)}});
  }
  return {{"seed", seed},
          {"output_dir", output_dir},
          {"threads", threads},
          {"data",
           {{"source", source},
            {"csv_path", csv_path},
            {"ordinal", ordinal},
            {"missing_tokens", missing_tokens},
            {"synthetic",
             {{"n_periods", synthetic.n_periods},
              {"base", synthetic.base},
              {"trend", synthetic.trend},
              {"seasonal_amp", synthetic.seasonal_amp},
              {"noise_sd", synthetic.noise_sd},
              {"n_features", synthetic.n_features},
              {"first_month", synthetic.first_month}}}}},
          {"mask", {{"fraction", mask_fraction}}},
          {"copula", {{"max_iters", copula.max_iters}, {"tol", copula.tol}, {"ridge", copula.ridge}}},
          {"task", {{"target", target}, {"horizon", horizon}, {"validation", validation}, {"features", features}}},
          {"forecasters", std::move(roster)}};
}

void ExperimentConfig::validate() const {
  if (source != "synthetic" && source != "csv") config_error("data.source must be 'synthetic' or 'csv'");
  if (source == "csv" && csv_path.empty()) config_error("data.csv_path is required for a csv source");
  if (!(mask_fraction >= 0.0 && mask_fraction <= 1.0)) config_error("mask.fraction must lie in [0, 1]");
  if (copula.max_iters < 1 || !(copula.tol > 0.0) || copula.ridge < 0.0) {
    config_error("copula needs max_iters >= 1, tol > 0 and ridge >= 0");
  }
  if (horizon < 1 || validation < 1) config_error("task.horizon and task.validation must be at least 1");
  if (threads < 1) config_error("threads must be at least 1");
  if (forecasters.empty()) config_error("forecaster roster is empty");
  std::set<std::string> names;
  for (const auto& spec : forecasters) {
    if (spec.name == "ensemble" || spec.name == "date") config_error("forecaster name '" + spec.name + "' is reserved");
    if (spec.name.find_first_of(",;\"\n") != std::string::npos) {
      config_error("forecaster name '" + spec.name + "' contains a separator character");
    }
    if (!names.insert(spec.name).second) config_error("duplicate forecaster name '" + spec.name + "'");
    resolved_hyper(spec);
  }
  if (std::find(features.begin(), features.end(), target) != features.end()) {
    config_error("task.target cannot also be a feature");
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

dataset::ObservationMatrix load_data(const ExperimentConfig& config) {
  if (config.source == "csv") {
    dataset::Schema schema;
    schema.ordinal = config.ordinal;
    schema.missing_tokens = config.missing_tokens;
    return dataset::load_csv(config.csv_path, schema);
  }
  dataset::SeasonalLoadParams params = config.synthetic;
  params.seed = derive_seed(config.seed, "synthetic");
  return dataset::gen_seasonal_load(params);
}

Prepared prepare(const ExperimentConfig& config) {
  Prepared p;
  p.original = stage("data", [&] { return load_data(config); });
  if (config.mask_fraction > 0.0) {
    auto [masked, record] =
        stage("mask", [&] { return dataset::apply_mask(p.original, config.mask_fraction, derive_seed(config.seed, "mask")); });
    p.masked = std::move(masked);
    p.mask = std::move(record);
  } else {
    p.masked = p.original;
    p.mask.seed = derive_seed(config.seed, "mask");
  }
  copula::EmConfig em = config.copula;
  em.threads = config.threads;
  p.model = stage("impute", [&] { return copula::em_fit(p.masked, em); });
  p.imputation = stage("impute", [&] { return copula::impute(p.model, p.masked); });
  return p;
}

json recovery_metrics(const Prepared& p) {
  const auto& masked = p.masked;
  const Eigen::Index q = masked.cols();
  Eigen::VectorXd col_mean = Eigen::VectorXd::Zero(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    double sum = 0.0;
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < masked.rows(); ++i) {
      if (masked.mask(i, j)) {
        sum += masked.values(i, j);
        ++n;
      }
    }
    col_mean(j) = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  std::vector<double> copula_abs(static_cast<std::size_t>(q), 0.0);
  std::vector<double> mean_abs(static_cast<std::size_t>(q), 0.0);
  std::vector<int> count(static_cast<std::size_t>(q), 0);
  double copula_total = 0.0;
  double mean_total = 0.0;
  for (std::size_t k = 0; k < p.mask.erased_cells.size(); ++k) {
    const auto [i, j] = p.mask.erased_cells[k];
    const double truth = p.mask.original_values[k];
    const double c = std::abs(p.imputation.completed.values(i, j) - truth);
    const double m = std::abs(col_mean(j) - truth);
    copula_abs[static_cast<std::size_t>(j)] += c;
    mean_abs[static_cast<std::size_t>(j)] += m;
    ++count[static_cast<std::size_t>(j)];
    copula_total += c;
    mean_total += m;
  }
  const double n = static_cast<double>(p.mask.erased_cells.size());
  json columns = json::array();
  for (Eigen::Index j = 0; j < q; ++j) {
    const auto u = static_cast<std::size_t>(j);
    if (count[u] == 0) continue;
    columns.push_back({{"column", masked.column_names[u]},
                       {"cells", count[u]},
                       {"copula_mae", copula_abs[u] / count[u]},
                       {"mean_mae", mean_abs[u] / count[u]}});
  }
  json out = {{"erased_cells", p.mask.erased_cells.size()}, {"columns", std::move(columns)}};
  if (n > 0) {
    out["copula_mae"] = copula_total / n;
    out["mean_mae"] = mean_total / n;
  }
  return out;
}

forecasters::ForecastTask make_task(const ExperimentConfig& config, const dataset::ObservationMatrix& data) {
  const Eigen::Index target = stage("task", [&] { return data.column_index(config.target); });
  auto task = stage("task", [&] {
    return forecasters::ForecastTask::holdout_split(data.rows(), target, config.horizon, config.validation);
  });
  for (const auto& f : config.features) task.features.push_back(stage("task", [&] { return data.column_index(f); }));
  stage("task", [&] {
    task.validate(data.rows(), data.cols());
    return 0;
  });
  return task;
}

forecasters::ForecasterPtr fit_forecaster(const ForecasterSpec& spec, const forecasters::ForecastTask& task,
                                          const Eigen::MatrixXd& data, std::uint64_t root_seed) {
  const std::string where = "forecasters." + spec.name + ".hyper";
  std::optional<std::uint64_t> seed;
  const std::uint64_t derived = derive_seed(root_seed, "forecaster/" + spec.name);
  if (spec.kind == "naive_seasonal") return forecasters::naive_seasonal(task, data, parse_period(spec.hyper, where), spec.name);
  if (spec.kind == "ridge_ar") return forecasters::fit_ridge_ar(task, data, parse_ridge(spec.hyper, where), spec.name);
  if (spec.kind == "gbt") return forecasters::fit_gbt(task, data, parse_gbt(spec.hyper, where), spec.name);
  if (spec.kind == "tcn") {
    auto h = parse_tcn(spec.hyper, where, seed);
    h.seed = seed.value_or(derived);
    return forecasters::fit_tcn(task, data, h, spec.name);
  }
  if (spec.kind == "trmf") {
    auto h = parse_trmf(spec.hyper, where, seed);
    h.seed = seed.value_or(derived);
    return forecasters::fit_trmf_forecaster(task, data, h, spec.name);
  }
  config_error("forecaster '" + spec.name + "': unknown kind '" + spec.kind + "'");
}

std::vector<forecasters::ForecasterPtr> fit_roster(const ExperimentConfig& config,
                                                   const forecasters::ForecastTask& task,
                                                   const Eigen::MatrixXd& data) {
  const auto fit_one = [&](const ForecasterSpec& spec) {
    return stage("fit " + spec.name, [&] { return fit_forecaster(spec, task, data, config.seed); });
  };
  std::vector<forecasters::ForecasterPtr> out(config.forecasters.size());
  if (config.threads <= 1) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fit_one(config.forecasters[i]);
    return out;
  }
  const auto width = static_cast<std::size_t>(config.threads);
  for (std::size_t begin = 0; begin < out.size(); begin += width) {
    const std::size_t end = std::min(out.size(), begin + width);
    std::vector<std::future<forecasters::ForecasterPtr>> jobs;
    for (std::size_t i = begin; i < end; ++i) {
      jobs.push_back(std::async(std::launch::async, fit_one, std::cref(config.forecasters[i])));
    }
    for (std::size_t i = begin; i < end; ++i) out[i] = jobs[i - begin].get();
  }
  return out;
}

std::vector<double> holdout_actuals(const Prepared& p, const forecasters::ForecastTask& task) {
  std::vector<double> out;
  const auto span = task.test();
  for (Eigen::Index t = span.begin; t < span.end; ++t) {
    out.push_back(p.original.mask(t, task.target) ? p.original.values(t, task.target)
                                                   : p.imputation.completed.values(t, task.target));
  }
  return out;
}

RunResult run_pipeline(const ExperimentConfig& config) {
  RunResult r;
  r.prepared = prepare(config);
  const auto& completed = r.prepared.imputation.completed;
  r.task = make_task(config, completed);
  r.models = fit_roster(config, r.task, completed.values);
  r.streams = stage("forecast", [&] { return ensemble::make_streams(r.models, r.task, completed.values); });
  r.ensemble = stage("ensemble", [&] { return ensemble::run_ensemble(r.streams); });
  r.actuals = holdout_actuals(r.prepared, r.task);
  const auto span = r.task.test();
  for (Eigen::Index t = span.begin; t < span.end; ++t) r.periods.push_back(completed.time_index[static_cast<std::size_t>(t)]);

  Eigen::MatrixXd grid(static_cast<Eigen::Index>(r.periods.size()), static_cast<Eigen::Index>(r.streams.size() + 1));
  std::vector<std::string> names;
  for (std::size_t m = 0; m < r.streams.size(); ++m) {
    names.push_back(r.streams[m].name);
    for (std::size_t p = 0; p < r.periods.size(); ++p) {
      grid(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m)) = r.streams[m].forecasts[p];
    }
  }
  names.emplace_back("ensemble");
  for (std::size_t p = 0; p < r.periods.size(); ++p) {
    grid(static_cast<Eigen::Index>(p), grid.cols() - 1) = r.ensemble.forecasts[p];
  }
  r.report = stage("evaluate", [&] { return evaluation::build_report(r.actuals, grid, names, "ensemble", r.periods); });
  return r;
}

void cmd_synth(const ExperimentConfig& config) {
  const fs::path dir = ensure_dir(config.output_dir);
  dataset::SeasonalLoadParams params = config.synthetic;
  params.seed = derive_seed(config.seed, "synthetic");
  const auto data = stage("data", [&] { return dataset::gen_seasonal_load(params); });
  std::vector<double> signal;
  for (int t = 0; t < params.n_periods; ++t) signal.push_back(dataset::seasonal_signal(params, t));
  const json truth = {{"target", "load"},
                      {"generator_seed", params.seed},
                      {"signal", signal},
                      {"base", params.base},
                      {"trend", params.trend},
                      {"seasonal_amp", params.seasonal_amp},
                      {"noise_sd", params.noise_sd}};
  write_text(dir / "data.csv", dataset::to_csv(data));
  write_text(dir / "truth.json", truth.dump(2) + "\n");
  write_config(config);
}

void cmd_impute(const ExperimentConfig& config) {
  const fs::path dir = ensure_dir(config.output_dir);
  const Prepared p = prepare(config);
  write_text(dir / "completed.csv", dataset::to_csv(p.imputation.completed));
  write_text(dir / "masked.csv", dataset::to_csv(p.masked));
  write_text(dir / "copula_model.json", copula::to_json(p.model).dump(2) + "\n");
  write_text(dir / "mask.json", dataset::to_json(p.mask).dump(2) + "\n");
  json recovery = recovery_metrics(p);
  recovery["flagged_rows"] = p.imputation.flagged_rows;
  recovery["em_iterations"] = p.model.em_trace.size();
  recovery["em_converged"] = p.model.converged;
  write_text(dir / "recovery.json", recovery.dump(2) + "\n");
  write_config(config);
}

RunResult cmd_run(const ExperimentConfig& config) {
  const fs::path dir = ensure_dir(config.output_dir);
  RunResult r = run_pipeline(config);

  std::string forecasts = "date";
  for (const auto& s : r.streams) forecasts += "," + s.name;
  forecasts += ",ensemble\n";
  std::string actuals = "date,actual\n";
  for (std::size_t p = 0; p < r.periods.size(); ++p) {
    forecasts += r.periods[p];
    for (const auto& s : r.streams) forecasts += "," + format_number(s.forecasts[p]);
    forecasts += "," + format_number(r.ensemble.forecasts[p]) + "\n";
    actuals += r.periods[p] + "," + format_number(r.actuals[p]) + "\n";
  }
  write_text(dir / "forecasts.csv", forecasts);
  write_text(dir / "actuals.csv", actuals);
  write_text(dir / "report.json", evaluation::to_json(r.report).dump(2) + "\n");
  write_text(dir / "report.csv", evaluation::to_table_csv(r.report));
  write_text(dir / "trace.csv", ensemble::trace_csv(r.ensemble.state));
  write_text(dir / "completed.csv", dataset::to_csv(r.prepared.imputation.completed));
  write_text(dir / "copula_model.json", copula::to_json(r.prepared.model).dump(2) + "\n");
  const fs::path models = ensure_dir(dir / "models");
  for (const auto& m : r.models) write_text(models / (m->name() + ".json"), m->to_json().dump(2) + "\n");
  write_config(config);
  return r;
}

std::vector<ensemble::AblationStep> cmd_ablate(const ExperimentConfig& config) {
  if (config.forecasters.size() < 2) config_error("ablation needs a roster of at least 2 models");
  const fs::path dir = ensure_dir(config.output_dir);
  const RunResult r = run_pipeline(config);
  auto path = stage("ablation", [&] { return ensemble::ablation(r.streams, r.actuals); });
  write_text(dir / "ablation.csv", ensemble::ablation_to_csv(path));
  write_config(config);
  return path;
}

evaluation::EvaluationReport cmd_eval(const fs::path& forecasts_csv, const fs::path& actuals_csv,
                                      const std::optional<fs::path>& out_dir) {
  const auto forecasts = dataset::load_csv(forecasts_csv);
  const auto actuals = dataset::load_csv(actuals_csv);
  if (actuals.cols() != 1) throw Error(ErrorCategory::data, actuals_csv.string() + ": expected exactly one value column");
  if (forecasts.time_index != actuals.time_index) {
    throw Error(ErrorCategory::data, "forecast and actual files are misaligned (period labels differ)");
  }
  if (!forecasts.mask.all() || !actuals.mask.all()) throw Error(ErrorCategory::data, "missing cells in forecast or actual file");
  const auto& names = forecasts.column_names;
  const auto it = std::find(names.begin(), names.end(), "ensemble");
  const std::string ensemble_name = it != names.end() ? *it : names.back();
  const Eigen::VectorXd y = actuals.values.col(0);
  const auto report = evaluation::build_report(std::vector<double>(y.data(), y.data() + y.size()), forecasts.values,
                                               names, ensemble_name, forecasts.time_index);
  if (out_dir) {
    const fs::path dir = ensure_dir(*out_dir);
    write_text(dir / "report.json", evaluation::to_json(report).dump(2) + "\n");
    write_text(dir / "report.csv", evaluation::to_table_csv(report));
  }
  return report;
}

}  // namespace loadcast::experiment
