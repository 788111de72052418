#include "loadcast/evaluation.hpp"

#include "loadcast/error.hpp"
#include "loadcast/format.hpp"
#include "loadcast/normal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace loadcast::evaluation {

namespace {

[[noreturn]] void eval_error(const std::string& message) {
  throw Error(ErrorCategory::evaluation, message);
}

// Ranks (1-based) of `values` in ascending order, ties averaged.
std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    while (b < order.size() && values[order[b]] == values[order[a]]) ++b;
    const double rank = 0.5 * static_cast<double>(a + 1 + b);
    for (std::size_t k = a; k < b; ++k) ranks[order[k]] = rank;
    a = b;
  }
  return ranks;
}

}  // namespace

double mape(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size() || actual.empty()) {
    eval_error("mape needs equal-length non-empty series");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) eval_error("mape undefined: actual value is zero at index " + std::to_string(i));
    total += std::abs((actual[i] - predicted[i]) / actual[i]);
  }
  return 100.0 * total / static_cast<double>(actual.size());
}

MeanStd mean_std_mape(std::span<const double> per_period) {
  if (per_period.size() < 2) eval_error("mean/std of MAPE needs at least 2 periods");
  const double n = static_cast<double>(per_period.size());
  const double mean = std::accumulate(per_period.begin(), per_period.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : per_period) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

WinLoss win_loss(std::span<const double> ensemble_mape, std::span<const double> baseline_mape) {
  if (ensemble_mape.size() != baseline_mape.size()) eval_error("win/loss needs equal period counts");
  WinLoss out;
  for (std::size_t i = 0; i < ensemble_mape.size(); ++i) {
    if (ensemble_mape[i] <= baseline_mape[i]) {
      ++out.wins;
    } else {
      ++out.losses;
    }
  }
  return out;
}

std::vector<double> friedman_rank(const Eigen::MatrixXd& grid) {
  if (grid.rows() < 1 || grid.cols() < 2) eval_error("friedman rank needs >= 1 period and >= 2 models");
  if (!grid.allFinite()) eval_error("friedman rank needs finite MAPE values");
  std::vector<double> sum(static_cast<std::size_t>(grid.cols()), 0.0);
  std::vector<double> row(static_cast<std::size_t>(grid.cols()));
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) row[static_cast<std::size_t>(j)] = grid(i, j);
    const auto ranks = average_ranks(row);
    for (std::size_t j = 0; j < ranks.size(); ++j) sum[j] += ranks[j];
  }
  for (double& s : sum) s /= static_cast<double>(grid.rows());
  return sum;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) eval_error("wilcoxon needs equal-length samples");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) diff.push_back(a[i] - b[i]);
  }
  WilcoxonResult out;
  out.n_effective = static_cast<int>(diff.size());
  if (diff.empty()) {
    out.degenerate = true;
    out.p_value = 1.0;
    return out;
  }
  std::vector<double> magnitude(diff.size());
  std::transform(diff.begin(), diff.end(), magnitude.begin(), [](double d) { return std::abs(d); });
  const auto ranks = average_ranks(magnitude);
  for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? out.w_plus : out.w_minus) += ranks[i];
  out.statistic = std::min(out.w_plus, out.w_minus);
  const int n = out.n_effective;

  if (n <= kWilcoxonExactMaxN) {
    // Average ranks are multiples of 1/2, so doubled ranks are integers and the
    // null distribution of 2*W+ over all 2^n sign patterns is a subset-sum count.
    std::vector<int> doubled(ranks.size());
    std::transform(ranks.begin(), ranks.end(), doubled.begin(),
                   [](double r) { return static_cast<int>(std::lround(2.0 * r)); });
    const int total = std::accumulate(doubled.begin(), doubled.end(), 0);
    std::vector<std::uint64_t> count(static_cast<std::size_t>(total) + 1, 0);
    count[0] = 1;
    for (int r : doubled) {
      for (int s = total; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
    }
    const auto threshold = std::lround(2.0 * out.statistic);
    std::uint64_t tail = 0;
    for (long s = 0; s <= threshold; ++s) tail += count[static_cast<std::size_t>(s)];
    const double patterns = std::ldexp(1.0, n);
    out.p_value = std::min(1.0, 2.0 * static_cast<double>(tail) / patterns);
    out.exact = true;
  } else {
    const double nd = static_cast<double>(n);
    std::vector<double> sorted = magnitude;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t k = 0; k < sorted.size();) {
      std::size_t e = k;
      while (e < sorted.size() && sorted[e] == sorted[k]) ++e;
      const double t = static_cast<double>(e - k);
      tie_term += t * t * t - t;
      k = e;
    }
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (out.statistic - mean + 0.5) / std::sqrt(var);
    out.p_value = std::min(1.0, 2.0 * normal::cdf(z));
    out.exact = false;
  }
  return out;
}

EvaluationReport build_report_from_mape(const Eigen::MatrixXd& grid, std::vector<std::string> models,
                                        const std::string& ensemble_name,
                                        std::vector<std::string> periods) {
  if (static_cast<Eigen::Index>(models.size()) != grid.cols()) eval_error("model names do not match grid columns");
  if (grid.rows() < 2) eval_error("a report needs at least 2 periods");
  if (!grid.allFinite() || (grid.array() < 0.0).any()) eval_error("MAPE grid must be finite and non-negative");
  const auto found = std::find(models.begin(), models.end(), ensemble_name);
  if (found == models.end()) eval_error("ensemble column '" + ensemble_name + "' not found");
  if (periods.empty()) {
    for (Eigen::Index i = 0; i < grid.rows(); ++i) periods.push_back(std::to_string(i + 1));
  }
  if (static_cast<Eigen::Index>(periods.size()) != grid.rows()) eval_error("period labels do not match grid rows");

  // Reorder so the ensemble is the last column.
  std::vector<Eigen::Index> order;
  const auto ens = static_cast<Eigen::Index>(found - models.begin());
  for (Eigen::Index j = 0; j < grid.cols(); ++j) {
    if (j != ens) order.push_back(j);
  }
  order.push_back(ens);

  EvaluationReport report;
  report.periods = std::move(periods);
  report.per_period_mape = grid(Eigen::all, order);
  for (Eigen::Index j : order) report.models.push_back(models[static_cast<std::size_t>(j)]);

  const auto n_models = report.models.size();
  const auto column = [&](std::size_t j) {
    const Eigen::VectorXd c = report.per_period_mape.col(static_cast<Eigen::Index>(j));
    return std::vector<double>(c.data(), c.data() + c.size());
  };
  const auto ensemble_col = column(n_models - 1);
  for (std::size_t j = 0; j < n_models; ++j) {
    const auto col = column(j);
    const auto ms = mean_std_mape(col);
    report.mean_mape.push_back(ms.mean);
    report.std_mape.push_back(ms.std);
    if (j + 1 < n_models) {
      report.win_loss.push_back(win_loss(ensemble_col, col));
      report.wilcoxon.push_back(wilcoxon_signed_rank(ensemble_col, col));
    } else {
      report.win_loss.push_back({});
      report.wilcoxon.push_back({});
    }
  }
  report.f_rank = n_models >= 2 ? friedman_rank(report.per_period_mape) : std::vector<double>{1.0};
  return report;
}

EvaluationReport build_report(std::span<const double> actuals, const Eigen::MatrixXd& forecasts,
                              std::vector<std::string> models, const std::string& ensemble_name,
                              std::vector<std::string> periods) {
  if (static_cast<Eigen::Index>(actuals.size()) != forecasts.rows()) {
    eval_error("forecast rows do not align with actual periods");
  }
  Eigen::MatrixXd grid(forecasts.rows(), forecasts.cols());
  for (Eigen::Index i = 0; i < forecasts.rows(); ++i) {
    for (Eigen::Index j = 0; j < forecasts.cols(); ++j) {
      const double p = forecasts(i, j);
      grid(i, j) = mape(actuals.subspan(static_cast<std::size_t>(i), 1), std::span<const double>(&p, 1));
    }
  }
  return build_report_from_mape(grid, std::move(models), ensemble_name, std::move(periods));
}

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json models = nlohmann::json::array();
  for (std::size_t j = 0; j < report.models.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    std::vector<double> per_period(report.per_period_mape.rows());
    for (Eigen::Index i = 0; i < report.per_period_mape.rows(); ++i) per_period[static_cast<std::size_t>(i)] = report.per_period_mape(i, col);
    nlohmann::json m = {{"name", report.models[j]},
                        {"per_period_mape", per_period},
                        {"mean_mape", report.mean_mape[j]},
                        {"std_mape", report.std_mape[j]},
                        {"f_rank", report.f_rank[j]}};
    if (j != report.ensemble_index()) {
      const auto& w = report.wilcoxon[j];
      m["wins"] = report.win_loss[j].wins;
      m["losses"] = report.win_loss[j].losses;
      m["wilcoxon"] = {{"w_plus", w.w_plus},   {"w_minus", w.w_minus}, {"statistic", w.statistic},
                       {"p_value", w.p_value}, {"n_effective", w.n_effective},
                       {"exact", w.exact},     {"degenerate", w.degenerate}};
    }
    models.push_back(std::move(m));
  }
  return {{"periods", report.periods},
          {"ensemble", report.models.back()},
          {"models", std::move(models)}};
}

std::string to_table_csv(const EvaluationReport& report) {
  std::string out = "period";
  for (const auto& m : report.models) out += "," + m;
  out += "\n";
  for (std::size_t i = 0; i < report.periods.size(); ++i) {
    out += report.periods[i];
    for (std::size_t j = 0; j < report.models.size(); ++j) {
      out += "," + format_number(report.per_period_mape(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += "\n";
  }
  const auto summary = [&](const std::string& label, auto cell) {
    out += label;
    for (std::size_t j = 0; j < report.models.size(); ++j) out += "," + cell(j);
    out += "\n";
  };
  summary("mean_mape", [&](std::size_t j) { return format_number(report.mean_mape[j]); });
  summary("std_mape", [&](std::size_t j) { return format_number(report.std_mape[j]); });
  summary("win_loss", [&](std::size_t j) {
    if (j == report.ensemble_index()) {
      int wins = 0, losses = 0;
      for (std::size_t k = 0; k + 1 < report.models.size(); ++k) {
        wins += report.win_loss[k].wins;
        losses += report.win_loss[k].losses;
      }
      return std::to_string(wins) + "/" + std::to_string(losses);
    }
    return std::to_string(report.win_loss[j].wins) + "/" + std::to_string(report.win_loss[j].losses);
  });
  summary("f_rank", [&](std::size_t j) { return format_number(report.f_rank[j]); });
  summary("p_value", [&](std::size_t j) {
    return j == report.ensemble_index() ? std::string("-") : format_number(report.wilcoxon[j].p_value);
  });
  return out;
}

}  // namespace loadcast::evaluation
