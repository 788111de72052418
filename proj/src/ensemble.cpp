#include "loadcast/ensemble.hpp"

#include "loadcast/error.hpp"
#include "loadcast/evaluation.hpp"
#include "loadcast/format.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace loadcast::ensemble {

namespace {

[[noreturn]] void ensemble_error(const std::string& message) {
  throw Error(ErrorCategory::ensemble, message);
}

}  // namespace

double cumulative_error(std::span<const double> errs, int r) {
  if (r < 1 || static_cast<std::size_t>(r) > errs.size()) ensemble_error("cumulative_error: round out of range");
  double sum = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(r); ++i) {
    if (!(errs[i] >= 0.0)) ensemble_error("cumulative_error: errors must be non-negative");
    sum += errs[i];
  }
  return sum;
}

double compute_lambda(int rounds) {
  if (rounds <= 1) ensemble_error("compute_lambda: R must be at least 2 (ln R <= 0)");
  return std::sqrt(1.0 / std::log(static_cast<double>(rounds)));
}

Eigen::VectorXd update_weights(const Eigen::VectorXd& ce, const Eigen::VectorXd& lambda) {
  if (ce.size() < 1 || ce.size() != lambda.size()) ensemble_error("update_weights: need matching non-empty inputs");
  const Eigen::VectorXd logit = -(lambda.array() * ce.array()).matrix();
  if (!logit.allFinite()) ensemble_error("update_weights: non-finite exponent");
  const Eigen::VectorXd e = (logit.array() - logit.maxCoeff()).exp();
  return e / e.sum();
}

double aggregate(const Eigen::VectorXd& preds, const Eigen::VectorXd& weights) {
  if (preds.size() != weights.size()) ensemble_error("aggregate: length mismatch");
  return preds.dot(weights);
}

EnsembleResult run_ensemble(const std::vector<ModelStream>& models) {
  if (models.empty()) ensemble_error("run_ensemble: empty model list");
  const auto n = static_cast<Eigen::Index>(models.size());
  const std::size_t periods = models.front().forecasts.size();
  std::size_t max_r = 0;
  for (const auto& m : models) {
    if (m.round_errors.size() < 2) ensemble_error(m.name + ": needs at least 2 round errors");
    if (m.forecasts.size() != periods) ensemble_error(m.name + ": forecast count differs from the other models");
    max_r = std::max(max_r, m.round_errors.size());
  }

  EnsembleResult result;
  EnsembleState& st = result.state;
  st.lambda.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& m = models[static_cast<std::size_t>(t)];
    st.model_names.push_back(m.name);
    st.err.push_back(m.round_errors);
    st.lambda(t) = compute_lambda(static_cast<int>(m.round_errors.size()));
  }
  const auto rounds = static_cast<Eigen::Index>(max_r);
  st.ce.resize(rounds, n);
  st.weights.resize(rounds, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& errs = models[static_cast<std::size_t>(t)].round_errors;
    double sum = 0.0;
    for (Eigen::Index r = 0; r < rounds; ++r) {
      if (static_cast<std::size_t>(r) < errs.size()) {
        if (!(errs[static_cast<std::size_t>(r)] >= 0.0) || !std::isfinite(errs[static_cast<std::size_t>(r)])) {
          ensemble_error(models[static_cast<std::size_t>(t)].name + ": round errors must be finite and non-negative");
        }
        sum += errs[static_cast<std::size_t>(r)];
      }
      st.ce(r, t) = sum;
    }
  }
  for (Eigen::Index r = 0; r < rounds; ++r) {
    st.weights.row(r) = update_weights(st.ce.row(r).transpose(), st.lambda).transpose();
  }
  st.final_weights = st.weights.row(rounds - 1).transpose();

  result.forecasts.resize(periods);
  Eigen::VectorXd preds(n);
  for (std::size_t p = 0; p < periods; ++p) {
    for (Eigen::Index t = 0; t < n; ++t) preds(t) = models[static_cast<std::size_t>(t)].forecasts[p];
    result.forecasts[p] = aggregate(preds, st.final_weights);
  }
  return result;
}

std::string trace_csv(const EnsembleState& st) {
  std::string out = "round";
  for (const auto& name : st.model_names) out += ",err_" + name + ",ce_" + name + ",w_" + name;
  out += '\n';
  for (int r = 0; r < st.rounds(); ++r) {
    out += std::to_string(r + 1);
    for (std::size_t t = 0; t < st.model_names.size(); ++t) {
      const auto& errs = st.err[t];
      out += ',';
      if (static_cast<std::size_t>(r) < errs.size()) out += format_number(errs[static_cast<std::size_t>(r)]);
      out += ',' + format_number(st.ce(r, static_cast<Eigen::Index>(t)));
      out += ',' + format_number(st.weights(r, static_cast<Eigen::Index>(t)));
    }
    out += '\n';
  }
  return out;
}

std::vector<ModelStream> make_streams(const std::vector<forecasters::ForecasterPtr>& models,
                                      const forecasters::ForecastTask& task, const Eigen::MatrixXd& data) {
  std::vector<ModelStream> streams;
  streams.reserve(models.size());
  for (const auto& m : models) streams.push_back({m->name(), m->round_errors(), m->predict_span(data, task.test())});
  return streams;
}

std::vector<AblationStep> ablation(const std::vector<ModelStream>& models, std::span<const double> actuals) {
  const EnsembleResult full = run_ensemble(models);
  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ea = models[a].round_errors.back();
    const double eb = models[b].round_errors.back();
    if (ea != eb) return ea < eb;
    const double wa = full.state.final_weights(static_cast<Eigen::Index>(a));
    const double wb = full.state.final_weights(static_cast<Eigen::Index>(b));
    if (wa != wb) return wa > wb;
    if (models[a].name != models[b].name) return models[a].name < models[b].name;
    return a < b;
  });

  std::vector<AblationStep> path;
  std::vector<ModelStream> prefix;
  for (std::size_t i = 0; i < order.size(); ++i) {
    prefix.push_back(models[order[i]]);
    AblationStep step;
    step.prefix_size = static_cast<int>(i + 1);
    for (const auto& m : prefix) step.models.push_back(m.name);
    step.mape = evaluation::mape(actuals, run_ensemble(prefix).forecasts);
    path.push_back(std::move(step));
  }
  return path;
}

std::string ablation_to_csv(const std::vector<AblationStep>& path) {
  std::string out = "prefix_size,models,mape\n";
  for (const auto& step : path) {
    std::string names;
    for (const auto& n : step.models) names += (names.empty() ? "" : ";") + n;
    out += std::to_string(step.prefix_size) + "," + names + "," + format_number(step.mape) + "\n";
  }
  return out;
}

}  // namespace loadcast::ensemble
