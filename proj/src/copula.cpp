#include "loadcast/copula.hpp"

#include "loadcast/error.hpp"
#include "loadcast/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace loadcast::copula {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinRcond = 1e-13;
constexpr int kMeanFieldMaxIters = 50;
constexpr double kMeanFieldTol = 1e-6;
// Rows per E-step work unit; fixed so the M-step sum order never depends on threads.
constexpr Eigen::Index kRowChunk = 64;

[[noreturn]] void copula_error(const std::string& message) {
  throw Error(ErrorCategory::copula, message);
}

// Piecewise-linear interpolation on a strictly increasing grid, clamped at the ends.
double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto upper = std::upper_bound(xs.begin(), xs.end(), x);
  const auto k = static_cast<std::size_t>(upper - xs.begin());
  const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}

}  // namespace

double MarginalTransform::forward(double x) const {
  if (kind == ColumnKind::ordinal) {
    const auto [lo, hi] = interval(x);
    const double p_lo = std::isinf(lo) ? 0.0 : normal::cdf(lo);
    const double p_hi = std::isinf(hi) ? 1.0 : normal::cdf(hi);
    return normal::quantile(0.5 * (p_lo + p_hi));
  }
  return normal::quantile(interpolate(support, ecdf_probs, x));
}

std::pair<double, double> MarginalTransform::interval(double level) const {
  const auto it = std::find(support.begin(), support.end(), level);
  if (it == support.end()) copula_error("ordinal level not seen when fitting the marginal");
  const auto k = static_cast<std::size_t>(it - support.begin());
  const double lo = k == 0 ? -kInf : normal::quantile(ecdf_probs[k - 1]);
  const double hi = k + 1 == support.size() ? kInf : normal::quantile(ecdf_probs[k]);
  return {lo, hi};
}

double MarginalTransform::inverse(double z) const {
  const double p = normal::cdf(z);
  if (kind == ColumnKind::ordinal) {
    const auto k = std::lower_bound(ecdf_probs.begin(), ecdf_probs.end(), p) - ecdf_probs.begin();
    return support[static_cast<std::size_t>(k)];
  }
  return interpolate(ecdf_probs, support, p);
}

std::vector<MarginalTransform> fit_marginals(const ObservationMatrix& matrix) {
  std::vector<MarginalTransform> out;
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    const std::string& name = matrix.column_names[static_cast<std::size_t>(j)];
    std::vector<double> obs;
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
      if (matrix.mask(i, j)) obs.push_back(matrix.values(i, j));
    }
    if (obs.empty()) copula_error("column '" + name + "' has no observed cells");
    std::sort(obs.begin(), obs.end());
    const double n = static_cast<double>(obs.size());

    MarginalTransform t;
    t.kind = matrix.column_kinds[static_cast<std::size_t>(j)];
    if (t.kind == ColumnKind::continuous) {
      for (std::size_t a = 0; a < obs.size();) {
        std::size_t b = a;
        while (b < obs.size() && obs[b] == obs[a]) ++b;
        // mid-rank of the tie group, 1-based
        const double rank = 0.5 * static_cast<double>(a + 1 + b);
        t.support.push_back(obs[a]);
        t.ecdf_probs.push_back(rank / (n + 1.0));
        a = b;
      }
    } else {
      std::size_t cumulative = 0;
      for (double level : matrix.ordinal_levels[static_cast<std::size_t>(j)]) {
        const auto count = static_cast<std::size_t>(std::count(obs.begin(), obs.end(), level));
        if (count == 0) continue;
        if (!t.support.empty()) t.ecdf_probs.push_back(static_cast<double>(cumulative) / n);
        t.support.push_back(level);
        cumulative += count;
      }
    }
    if (t.support.size() < 2) {
      copula_error("column '" + name + "' is constant among observed cells");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<RowConstraint> row_constraints(const ObservationMatrix& matrix,
                                           std::span<const MarginalTransform> marginals) {
  if (static_cast<Eigen::Index>(marginals.size()) != matrix.cols()) {
    copula_error("marginal count does not match column count");
  }
  std::vector<RowConstraint> out(static_cast<std::size_t>(matrix.rows()));
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    auto& row = out[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      const auto& g = marginals[static_cast<std::size_t>(j)];
      if (!matrix.mask(i, j)) {
        row.missing.push_back(j);
      } else if (g.kind == ColumnKind::continuous) {
        row.observed_continuous.emplace_back(j, g.forward(matrix.values(i, j)));
      } else {
        const auto [lo, hi] = g.interval(matrix.values(i, j));
        row.observed_ordinal.push_back({j, lo, hi});
      }
    }
  }
  return out;
}

EStepResult e_step(const Eigen::MatrixXd& sigma, const RowConstraint& c, double ridge) {
  const Eigen::Index q = sigma.rows();
  const auto n_cont = static_cast<Eigen::Index>(c.observed_continuous.size());
  const auto n_ord = static_cast<Eigen::Index>(c.observed_ordinal.size());
  const Eigen::Index n_obs = n_cont + n_ord;
  const auto n_mis = static_cast<Eigen::Index>(c.missing.size());

  EStepResult out{Eigen::VectorXd::Zero(q), Eigen::MatrixXd::Zero(q, q)};
  if (n_obs == 0) {
    out.e_zzT = sigma;
    return out;
  }

  // Observed coordinates ordered continuous first, then ordinal.
  std::vector<Eigen::Index> obs_idx;
  obs_idx.reserve(static_cast<std::size_t>(n_obs));
  for (const auto& [j, z] : c.observed_continuous) obs_idx.push_back(j);
  for (const auto& iv : c.observed_ordinal) obs_idx.push_back(iv.col);
  const std::vector<Eigen::Index>& mis_idx = c.missing;

  Eigen::MatrixXd s_oo = sigma(obs_idx, obs_idx);
  s_oo.diagonal().array() += ridge;
  const Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinRcond) {
    copula_error("observed block of sigma is numerically singular");
  }

  Eigen::VectorXd mu_o(n_obs);
  Eigen::VectorXd var_o = Eigen::VectorXd::Zero(n_obs);
  for (Eigen::Index a = 0; a < n_cont; ++a) mu_o(a) = c.observed_continuous[a].second;

  if (n_ord > 0) {
    // Mean-field fixed point: each ordinal coordinate is a univariate truncated
    // normal given the current means of every other observed coordinate.
    const Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(n_obs, n_obs));
    for (Eigen::Index d = 0; d < n_ord; ++d) {
      const auto& iv = c.observed_ordinal[d];
      const auto m = normal::truncated_moments(0.0, 1.0, iv.lo, iv.hi);
      mu_o(n_cont + d) = m.mean;
      var_o(n_cont + d) = m.variance;
    }
    for (int iter = 0; iter < kMeanFieldMaxIters; ++iter) {
      double change = 0.0;
      for (Eigen::Index d = 0; d < n_ord; ++d) {
        const Eigen::Index a = n_cont + d;
        const double p_aa = precision(a, a);
        const double cond_mean = -(precision.row(a).dot(mu_o) - p_aa * mu_o(a)) / p_aa;
        const auto& iv = c.observed_ordinal[d];
        const auto m = normal::truncated_moments(cond_mean, std::sqrt(1.0 / p_aa), iv.lo, iv.hi);
        change = std::max(change, std::abs(m.mean - mu_o(a)) / std::max(1.0, std::abs(mu_o(a))));
        mu_o(a) = m.mean;
        var_o(a) = m.variance;
      }
      if (change < kMeanFieldTol) break;
    }
  }

  for (Eigen::Index a = 0; a < n_obs; ++a) {
    out.e_z(obs_idx[a]) = mu_o(a);
    for (Eigen::Index b = 0; b < n_obs; ++b) {
      out.e_zzT(obs_idx[a], obs_idx[b]) = mu_o(a) * mu_o(b) + (a == b ? var_o(a) : 0.0);
    }
  }
  if (n_mis == 0) return out;

  const Eigen::MatrixXd s_om = sigma(obs_idx, mis_idx);
  const Eigen::MatrixXd gain = llt.solve(s_om).transpose();  // n_mis x n_obs
  const Eigen::VectorXd mu_m = gain * mu_o;
  const Eigen::MatrixXd gain_v = gain * var_o.asDiagonal();
  const Eigen::MatrixXd cov_m =
      Eigen::MatrixXd(sigma(mis_idx, mis_idx)) - gain * s_om + gain_v * gain.transpose();
  const Eigen::MatrixXd cross = mu_m * mu_o.transpose() + gain_v;  // E[z_M z_O^T]

  for (Eigen::Index a = 0; a < n_mis; ++a) {
    out.e_z(mis_idx[a]) = mu_m(a);
    for (Eigen::Index b = 0; b < n_mis; ++b) {
      out.e_zzT(mis_idx[a], mis_idx[b]) = cov_m(a, b) + mu_m(a) * mu_m(b);
    }
    for (Eigen::Index b = 0; b < n_obs; ++b) {
      out.e_zzT(mis_idx[a], obs_idx[b]) = cross(a, b);
      out.e_zzT(obs_idx[b], mis_idx[a]) = cross(a, b);
    }
  }
  return out;
}

Eigen::MatrixXd project_correlation(const Eigen::MatrixXd& s) {
  const Eigen::Index q = s.rows();
  if (q == 0 || s.cols() != q) copula_error("correlation projection needs a square matrix");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    copula_error("correlation projection needs a symmetric matrix");
  }
  if ((s.diagonal().array() <= 0.0).any()) {
    copula_error("correlation projection needs a strictly positive diagonal");
  }

  auto unit_diagonal = [q](const Eigen::MatrixXd& a) {
    const Eigen::VectorXd inv_sd = a.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd c = inv_sd.asDiagonal() * a * inv_sd.asDiagonal();
    c = 0.5 * (c + c.transpose()).eval();
    for (Eigen::Index j = 0; j < q; ++j) c(j, j) = 1.0;
    return c;
  };

  Eigen::MatrixXd c = unit_diagonal(s);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  double floor = kEigenFloor;
  // Rescaling after a clip can push the smallest eigenvalue slightly below the
  // floor again, so raise the clip level until the result clears it.
  for (int attempt = 0; attempt < 64 && eig.eigenvalues().minCoeff() < kEigenFloor; ++attempt) {
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
    c = unit_diagonal(eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose());
    eig.compute(c);
    floor *= 2.0;
  }
  return c;
}

double pseudo_loglik(const Eigen::MatrixXd& sigma, std::span<const RowConstraint> constraints,
                     int* ridge_repairs) {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (const auto& c : constraints) {
    std::vector<Eigen::Index> idx;
    Eigen::VectorXd z(static_cast<Eigen::Index>(c.observed_continuous.size()));
    for (std::size_t a = 0; a < c.observed_continuous.size(); ++a) {
      idx.push_back(c.observed_continuous[a].first);
      z(static_cast<Eigen::Index>(a)) = c.observed_continuous[a].second;
    }
    const auto n = static_cast<Eigen::Index>(idx.size());

    Eigen::LLT<Eigen::MatrixXd> llt;
    if (n > 0) {
      Eigen::MatrixXd block = sigma(idx, idx);
      llt.compute(block);
      for (double ridge = 1e-8; llt.info() != Eigen::Success && ridge < 1.0; ridge *= 10.0) {
        if (ridge_repairs != nullptr) ++*ridge_repairs;
        Eigen::MatrixXd repaired = block;
        repaired.diagonal().array() += ridge;
        llt.compute(repaired);
      }
      if (llt.info() != Eigen::Success) copula_error("pseudo-likelihood block is singular");
      const Eigen::MatrixXd l = llt.matrixL();
      const double log_det = 2.0 * l.diagonal().array().log().sum();
      const Eigen::VectorXd w = llt.matrixL().solve(z);
      total += -0.5 * (static_cast<double>(n) * log_2pi + log_det + w.squaredNorm());
    }

    for (const auto& iv : c.observed_ordinal) {
      double mean = 0.0;
      double var = 1.0;
      if (n > 0) {
        const Eigen::VectorXd s_cd = sigma(idx, Eigen::all).col(iv.col);
        const Eigen::VectorXd coef = llt.solve(s_cd);
        mean = coef.dot(z);
        var = std::max(sigma(iv.col, iv.col) - coef.dot(s_cd), 1e-12);
      }
      total += normal::log_interval_probability(mean, std::sqrt(var), iv.lo, iv.hi);
    }
  }
  return total;
}

double pseudo_loglik(const CopulaModel& model, std::span<const RowConstraint> constraints) {
  return pseudo_loglik(model.sigma, constraints);
}

CopulaModel em_fit(const ObservationMatrix& matrix, const EmConfig& config) {
  matrix.validate();
  if (config.max_iters < 1 || !(config.tol > 0.0) || !(config.ridge >= 0.0)) {
    throw Error(ErrorCategory::config, "em_fit needs max_iters >= 1, tol > 0 and ridge >= 0");
  }
  Eigen::Index informative_rows = 0;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) informative_rows += matrix.mask.row(i).any();
  if (informative_rows < 2) copula_error("em_fit needs at least 2 rows with an observed cell");

  CopulaModel model;
  model.marginals = fit_marginals(matrix);
  const Eigen::Index q = matrix.cols();
  model.sigma = Eigen::MatrixXd::Identity(q, q);
  if (q == 1) {
    model.converged = true;
    return model;
  }

  const auto constraints = row_constraints(matrix, model.marginals);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    if (!constraints[i].fully_missing()) rows.push_back(i);
  }
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index n_chunks = (n_rows + kRowChunk - 1) / kRowChunk;
  const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(n_chunks)));

  std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(n_chunks));
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    auto run_chunks = [&](int worker) {
      for (Eigen::Index k = worker; k < n_chunks; k += threads) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(q, q);
        const Eigen::Index end = std::min(n_rows, (k + 1) * kRowChunk);
        for (Eigen::Index r = k * kRowChunk; r < end; ++r) {
          acc += e_step(model.sigma, constraints[rows[static_cast<std::size_t>(r)]], config.ridge).e_zzT;
        }
        partial[static_cast<std::size_t>(k)] = std::move(acc);
      }
    };
    if (threads == 1) {
      run_chunks(0);
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < threads; ++w) pool.emplace_back(run_chunks, w);
    }
    Eigen::MatrixXd second_moment = Eigen::MatrixXd::Zero(q, q);
    for (const auto& p : partial) second_moment += p;
    second_moment /= static_cast<double>(n_rows);
    second_moment = 0.5 * (second_moment + second_moment.transpose()).eval();

    Eigen::MatrixXd next = project_correlation(second_moment);
    const double delta = (next - model.sigma).norm() / model.sigma.norm();
    model.sigma = std::move(next);
    model.em_trace.push_back({iter, delta, pseudo_loglik(model.sigma, constraints)});
    if (delta < config.tol) {
      model.converged = true;
      break;
    }
  }
  return model;
}

ImputationResult impute(const CopulaModel& model, const ObservationMatrix& matrix) {
  const Eigen::Index q = matrix.cols();
  if (static_cast<Eigen::Index>(model.marginals.size()) != q || model.sigma.rows() != q) {
    copula_error("copula model does not match the matrix columns");
  }
  const auto constraints = row_constraints(matrix, model.marginals);
  ImputationResult out{matrix, {}};
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    const auto& c = constraints[static_cast<std::size_t>(i)];
    if (c.missing.empty()) continue;
    if (c.fully_missing()) {
      out.flagged_rows.push_back(i);
      for (Eigen::Index j : c.missing) out.completed.values(i, j) = model.marginals[j].inverse(0.0);
    } else {
      const auto moments = e_step(model.sigma, c);
      for (Eigen::Index j : c.missing) {
        out.completed.values(i, j) = model.marginals[j].inverse(moments.e_z(j));
      }
    }
  }
  out.completed.mask.setConstant(true);
  return out;
}

nlohmann::json to_json(const CopulaModel& model) {
  nlohmann::json sigma = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.sigma.rows(); ++i) {
    for (Eigen::Index j = 0; j < model.sigma.cols(); ++j) sigma.push_back(model.sigma(i, j));
  }
  nlohmann::json marginals = nlohmann::json::array();
  for (const auto& g : model.marginals) {
    marginals.push_back({{"kind", g.kind == ColumnKind::continuous ? "continuous" : "ordinal"},
                         {"support", g.support},
                         {"ecdf_probs", g.ecdf_probs}});
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& e : model.em_trace) trace.push_back({e.iteration, e.delta, e.pseudo_loglik});
  return {{"sigma", sigma}, {"marginals", marginals}, {"em_trace", trace},
          {"converged", model.converged}};
}

CopulaModel copula_model_from_json(const nlohmann::json& j) {
  CopulaModel model;
  const auto flat = j.at("sigma").get<std::vector<double>>();
  const auto q = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(flat.size()))));
  if (q * q != static_cast<Eigen::Index>(flat.size())) copula_error("sigma is not square");
  model.sigma.resize(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index k = 0; k < q; ++k) model.sigma(i, k) = flat[static_cast<std::size_t>(i * q + k)];
  }
  for (const auto& g : j.at("marginals")) {
    MarginalTransform t;
    t.kind = g.at("kind") == "ordinal" ? ColumnKind::ordinal : ColumnKind::continuous;
    t.support = g.at("support").get<std::vector<double>>();
    t.ecdf_probs = g.at("ecdf_probs").get<std::vector<double>>();
    model.marginals.push_back(std::move(t));
  }
  for (const auto& e : j.at("em_trace")) {
    model.em_trace.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>()});
  }
  model.converged = j.value("converged", false);
  return model;
}

}  // namespace loadcast::copula
