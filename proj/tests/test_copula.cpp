#include "loadcast/copula.hpp"
#include "loadcast/error.hpp"
#include "loadcast/normal.hpp"
#include "loadcast/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

using namespace loadcast;
using namespace loadcast::copula;
using dataset::ObservationMatrix;

namespace {

Eigen::MatrixXd corr2(double rho) {
  Eigen::MatrixXd s(2, 2);
  s << 1, rho, rho, 1;
  return s;
}

ObservationMatrix column(std::vector<double> v) {
  return ObservationMatrix::from_values(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

ObservationMatrix bivariate(double rho, Eigen::Index n, std::uint64_t seed) {
  return dataset::gen_copula_sample(corr2(rho), {dataset::NormalMarginal{}, dataset::ExponentialMarginal{1.0}}, n, seed);
}

double min_eigen(const Eigen::MatrixXd& s) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff();
}

}  // namespace

TEST(Marginals, RescaledRankExample) {
  const auto g = fit_marginals(column({30, 10, 40, 20}))[0];
  ASSERT_EQ(g.ecdf_probs.size(), 4u);
  const std::vector<double> expected{0.2, 0.4, 0.6, 0.8};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g.ecdf_probs[i], expected[i], 1e-15);
  EXPECT_NEAR(g.forward(30), normal::quantile(0.6), 1e-12);
  EXPECT_NEAR(g.forward(30), 0.2533471031357997, 1e-12);
}

TEST(Marginals, MedianMapsToZero) {
  const auto g = fit_marginals(column({3, 1, 2}))[0];
  EXPECT_NEAR(g.forward(2), 0.0, 1e-15);
  EXPECT_NEAR(g.inverse(0.0), 2.0, 1e-12);
}

TEST(Marginals, ForwardInverseIdentityOnSupport) {
  const auto m = bivariate(0.3, 300, 4);
  for (const auto& g : fit_marginals(m)) {
    for (std::size_t k = 1; k < g.ecdf_probs.size(); ++k) EXPECT_LT(g.ecdf_probs[k - 1], g.ecdf_probs[k]);
    EXPECT_GT(g.ecdf_probs.front(), 0.0);
    EXPECT_LT(g.ecdf_probs.back(), 1.0);
    for (double x : g.support) EXPECT_NEAR(g.inverse(g.forward(x)), x, 1e-9 * (1 + std::abs(x)));
  }
}

TEST(Marginals, InverseClampsToObservedRange) {
  const auto g = fit_marginals(column({5, 1, 9, 7}))[0];
  EXPECT_EQ(g.inverse(-40.0), 1.0);
  EXPECT_EQ(g.inverse(40.0), 9.0);
}

TEST(Marginals, BalancedBinaryOrdinalCutsAtZero) {
  auto m = column({1, 2, 1, 2, 2, 1});
  m.column_kinds[0] = dataset::ColumnKind::ordinal;
  m.ordinal_levels[0] = {1, 2};
  const auto g = fit_marginals(m)[0];
  const auto [lo1, hi1] = g.interval(1);
  const auto [lo2, hi2] = g.interval(2);
  EXPECT_EQ(lo1, -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(hi1, 0.0, 1e-15);
  EXPECT_NEAR(lo2, 0.0, 1e-15);
  EXPECT_EQ(hi2, std::numeric_limits<double>::infinity());
  EXPECT_EQ(g.inverse(-0.3), 1.0);
  EXPECT_EQ(g.inverse(0.3), 2.0);
}

TEST(Marginals, RejectsConstantAndEmptyColumns) {
  EXPECT_THROW(fit_marginals(column({4, 4, 4})), Error);
  auto m = column({1, 2, 3});
  m.mask.setConstant(false);
  EXPECT_THROW(fit_marginals(m), Error);
  try {
    fit_marginals(column({4, 4}));
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::copula);
  }
}

TEST(RowConstraints, PartitionCases) {
  Eigen::MatrixXd v(4, 3);
  v << 1, 1, 5, 2, 2, 6, 3, 1, 7, 4, 2, 8;
  auto m = ObservationMatrix::from_values(v);
  m.column_kinds[1] = dataset::ColumnKind::ordinal;
  m.ordinal_levels[1] = {1, 2};
  m.mask(1, 0) = m.mask(1, 1) = m.mask(1, 2) = false;
  m.mask(2, 2) = false;
  const auto g = fit_marginals(m);
  const auto rc = row_constraints(m, g);
  EXPECT_EQ(rc[0].observed_continuous.size(), 2u);
  EXPECT_EQ(rc[0].observed_ordinal.size(), 1u);
  EXPECT_TRUE(rc[0].missing.empty());
  EXPECT_TRUE(rc[1].fully_missing());
  EXPECT_EQ(rc[1].missing.size(), 3u);
  ASSERT_EQ(rc[2].observed_ordinal.size(), 1u);
  EXPECT_EQ(rc[2].observed_ordinal[0].lo, -std::numeric_limits<double>::infinity());
  // three observed levels {1, 2, 1}: the cut sits at cumulative frequency 2/3
  EXPECT_NEAR(rc[2].observed_ordinal[0].hi, 0.4307272992954576, 1e-12);
  EXPECT_EQ(rc[2].missing, std::vector<Eigen::Index>{2});
}

TEST(EStep, FullyObservedHasNoUncertainty) {
  RowConstraint c;
  c.observed_continuous = {{0, 0.3}, {1, -1.2}, {2, 0.7}};
  Eigen::MatrixXd sigma(3, 3);
  sigma << 1, 0.2, 0.1, 0.2, 1, 0.4, 0.1, 0.4, 1;
  const auto r = e_step(sigma, c);
  const Eigen::Vector3d z(0.3, -1.2, 0.7);
  EXPECT_TRUE(r.e_z.isApprox(z, 1e-14));
  EXPECT_TRUE(r.e_zzT.isApprox(z * z.transpose(), 1e-14));
}

TEST(EStep, BivariateConditioningHandExample) {
  RowConstraint c;
  c.observed_continuous = {{1, 1.0}};
  c.missing = {0};
  const auto r = e_step(corr2(0.5), c, 0.0);
  EXPECT_NEAR(r.e_z(0), 0.5, 1e-12);
  EXPECT_NEAR(r.e_zzT(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(r.e_zzT(0, 1), 0.5, 1e-12);
}

TEST(EStep, ConditioningGridMatchesClosedForm) {
  for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
    for (double z2 : {-1.7, 0.0, 0.4, 2.2}) {
      RowConstraint c;
      c.observed_continuous = {{1, z2}};
      c.missing = {0};
      const auto r = e_step(corr2(rho), c, 0.0);
      EXPECT_NEAR(r.e_z(0), rho * z2, 1e-12);
      EXPECT_NEAR(r.e_zzT(0, 0), 1 - rho * rho + rho * rho * z2 * z2, 1e-12);
      EXPECT_NEAR(r.e_zzT(0, 1), rho * z2 * z2, 1e-12);
    }
  }
}

TEST(EStep, HalfNormalMeanAgainstRejectionSampling) {
  RowConstraint c;
  c.observed_ordinal = {{0, 0.0, std::numeric_limits<double>::infinity()}};
  c.missing = {1};
  const auto r = e_step(corr2(0.0), c, 0.0);
  EXPECT_NEAR(r.e_z(0), std::sqrt(2.0 / std::numbers::pi), 1e-12);
  EXPECT_NEAR(r.e_z(1), 0.0, 1e-12);

  Rng rng(123);
  std::normal_distribution<double> n01;
  double sum = 0;
  int kept = 0;
  while (kept < 200000) {
    const double z = n01(rng);
    if (z > 0) {
      sum += z;
      ++kept;
    }
  }
  EXPECT_NEAR(r.e_z(0), sum / kept, 0.01);
}

TEST(EStep, TruncatedCoordinateWithCorrelatedPartnersMatchesMonteCarlo) {
  // z ~ N(0, S); coordinate 0 constrained to (0, inf), coordinate 1 observed at 1.0,
  // coordinate 2 missing. With one ordinal coordinate the fixed point is exact.
  Eigen::MatrixXd s(3, 3);
  s << 1, 0.5, 0.3, 0.5, 1, 0.2, 0.3, 0.2, 1;
  RowConstraint c;
  c.observed_ordinal = {{0, 0.0, std::numeric_limits<double>::infinity()}};
  c.observed_continuous = {{1, 1.0}};
  c.missing = {2};
  const auto r = e_step(s, c, 0.0);

  // Sample (z0, z2) | z1 = 1 by conditioning, then reject z0 <= 0.
  const Eigen::Matrix2d s_aa = (Eigen::Matrix2d() << 1, 0.3, 0.3, 1).finished();
  const Eigen::Vector2d s_ab(0.5, 0.2);
  const Eigen::Vector2d mu = s_ab * 1.0;
  const Eigen::Matrix2d cov = s_aa - s_ab * s_ab.transpose();
  const Eigen::Matrix2d l = cov.llt().matrixL();
  Rng rng(77);
  std::normal_distribution<double> n01;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  double sq0 = 0;
  int kept = 0;
  while (kept < 200000) {
    const Eigen::Vector2d z = mu + l * Eigen::Vector2d(n01(rng), n01(rng));
    if (z(0) > 0) {
      sum += z;
      sq0 += z(0) * z(0);
      ++kept;
    }
  }
  EXPECT_NEAR(r.e_z(0), sum(0) / kept, 0.01);
  EXPECT_NEAR(r.e_z(2), sum(1) / kept, 0.01);
  EXPECT_NEAR(r.e_zzT(0, 0), sq0 / kept, 0.02);
  EXPECT_DOUBLE_EQ(r.e_z(1), 1.0);
}

TEST(EStep, SecondMomentIsPositiveSemidefinite) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
    a(0, 1) = a(1, 0) = u(rng);
    a(2, 3) = a(3, 2) = u(rng);
    a(1, 2) = a(2, 1) = 0.5 * u(rng);
    const Eigen::MatrixXd sigma = project_correlation(a);
    RowConstraint c;
    c.observed_continuous = {{0, u(rng)}};
    c.observed_ordinal = {{1, -0.5, 0.8}, {3, 0.1, std::numeric_limits<double>::infinity()}};
    c.missing = {2};
    const auto r = e_step(sigma, c);
    const Eigen::MatrixXd cov = r.e_zzT - r.e_z * r.e_z.transpose();
    EXPECT_GT(min_eigen(cov), -1e-9);
    EXPECT_TRUE(r.e_zzT.isApprox(r.e_zzT.transpose(), 1e-12));
    EXPECT_GE(r.e_z(1), -0.5);
    EXPECT_LE(r.e_z(1), 0.8);
  }
}

TEST(ProjectCorrelation, Examples) {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_TRUE(project_correlation(id).isApprox(id));
  Eigen::MatrixXd s(2, 2);
  s << 4, 1, 1, 1;
  EXPECT_TRUE(project_correlation(s).isApprox(corr2(0.5), 1e-14));
  const Eigen::MatrixXd p = project_correlation(corr2(1.2));
  EXPECT_GE(min_eigen(p), 1e-6 * (1 - 1e-9));
  EXPECT_NEAR(p(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(p(1, 1), 1.0, 1e-14);
  EXPECT_LT(p(0, 1), 1.0);
}

TEST(ProjectCorrelation, RejectsBadInput) {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.2, 0.5, 1;
  EXPECT_THROW(project_correlation(asym), Error);
  Eigen::MatrixXd neg(2, 2);
  neg << -1, 0, 0, 1;
  EXPECT_THROW(project_correlation(neg), Error);
}

TEST(ProjectCorrelation, RandomSymmetricInputsGiveValidIdempotentOutput) {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_real_distribution<double> d(0.1, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int q = 2 + trial % 5;
    Eigen::MatrixXd s(q, q);
    for (int i = 0; i < q; ++i) {
      s(i, i) = d(rng);
      for (int j = 0; j < i; ++j) s(i, j) = s(j, i) = u(rng);
    }
    const Eigen::MatrixXd p = project_correlation(s);
    EXPECT_TRUE(p.isApprox(p.transpose(), 1e-14));
    for (int i = 0; i < q; ++i) EXPECT_NEAR(p(i, i), 1.0, 1e-12);
    EXPECT_GE(min_eigen(p), 1e-6 * (1 - 1e-6));
    EXPECT_TRUE(project_correlation(p).isApprox(p, 1e-10));
  }
}

TEST(EmFit, RecoversBivariateCorrelation) {
  const auto m = bivariate(0.8, 2000, 21);
  const auto model = em_fit(m);
  EXPECT_NEAR(model.sigma(0, 1), 0.8, 0.05);
  EXPECT_TRUE(model.converged);
  const auto [masked, record] = dataset::apply_mask(m, 0.1, 22);
  EXPECT_NEAR(em_fit(masked).sigma(0, 1), 0.8, 0.08);
}

TEST(EmFit, SingleColumnIsTrivial) {
  const auto model = em_fit(column({1, 2, 3, 4}));
  EXPECT_EQ(model.sigma, Eigen::MatrixXd::Identity(1, 1));
  EXPECT_TRUE(model.em_trace.empty());
}

TEST(EmFit, RecoversOrdinalLatentCorrelation) {
  const auto m = dataset::gen_copula_sample(corr2(0.6),
                                            {dataset::NormalMarginal{}, dataset::OrdinalMarginal{{0.3, 0.4, 0.3}}},
                                            3000, 8);
  EXPECT_NEAR(em_fit(m).sigma(0, 1), 0.6, 0.06);
}

TEST(EmFit, BitIdenticalAcrossThreadCounts) {
  const auto [masked, record] = dataset::apply_mask(bivariate(0.5, 700, 3), 0.15, 4);
  EmConfig one;
  EmConfig four;
  four.threads = 4;
  const auto a = em_fit(masked, one);
  const auto b = em_fit(masked, four);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(EmFit, RejectsEmptyInput) {
  auto m = bivariate(0.5, 10, 1);
  m.mask.setConstant(false);
  EXPECT_THROW(em_fit(m), Error);
}

TEST(PseudoLoglik, StandardNormalAtZero) {
  RowConstraint c;
  c.observed_continuous = {{0, 0.0}};
  c.missing = {1};
  const std::vector<RowConstraint> rows{c};
  EXPECT_NEAR(pseudo_loglik(Eigen::MatrixXd::Identity(2, 2), rows), -0.5 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(pseudo_loglik(Eigen::MatrixXd::Identity(2, 2), rows), -0.9189, 1e-4);
}

TEST(PseudoLoglik, AdditiveOverRows) {
  const auto [masked, record] = dataset::apply_mask(bivariate(0.4, 100, 2), 0.1, 2);
  const auto g = fit_marginals(masked);
  auto rows = row_constraints(masked, g);
  const double single = pseudo_loglik(corr2(0.4), rows);
  const auto copy = rows;
  rows.insert(rows.end(), copy.begin(), copy.end());
  EXPECT_NEAR(pseudo_loglik(corr2(0.4), rows), 2 * single, 1e-9 * std::abs(single));
}

TEST(PseudoLoglik, NonDecreasingAlongEmTrace) {
  Eigen::MatrixXd s(3, 3);
  s << 1, 0.6, -0.3, 0.6, 1, 0.2, -0.3, 0.2, 1;
  const auto m = dataset::gen_copula_sample(
      s, {dataset::NormalMarginal{}, dataset::UniformMarginal{}, dataset::LogNormalMarginal{}}, 400, 12);
  const auto [masked, record] = dataset::apply_mask(m, 0.2, 13);
  const auto model = em_fit(masked);
  ASSERT_GE(model.em_trace.size(), 2u);
  for (std::size_t k = 1; k < model.em_trace.size(); ++k) {
    EXPECT_GE(model.em_trace[k].pseudo_loglik, model.em_trace[k - 1].pseudo_loglik - 1e-8);
  }
}

TEST(Impute, NoMissingCellsIsIdentity) {
  const auto m = bivariate(0.5, 50, 1);
  const auto out = impute(em_fit(m), m);
  EXPECT_EQ(out.completed.values, m.values);
  EXPECT_TRUE(out.flagged_rows.empty());
}

TEST(Impute, PreservesObservedCellsBitExactly) {
  const auto [masked, record] = dataset::apply_mask(bivariate(0.7, 300, 5), 0.2, 6);
  const auto out = impute(em_fit(masked), masked);
  EXPECT_TRUE(out.completed.mask.all());
  for (Eigen::Index i = 0; i < masked.rows(); ++i)
    for (Eigen::Index j = 0; j < masked.cols(); ++j)
      if (masked.mask(i, j)) EXPECT_EQ(out.completed.values(i, j), masked.values(i, j));
}

TEST(Impute, IdentitySigmaGivesMarginalMedians) {
  auto [masked, record] = dataset::apply_mask(bivariate(0.7, 101, 5), 0.1, 9);
  CopulaModel model;
  model.sigma = Eigen::MatrixXd::Identity(2, 2);
  model.marginals = fit_marginals(masked);
  const auto out = impute(model, masked);
  for (const auto& [i, j] : record.erased_cells) {
    std::vector<double> obs;
    for (Eigen::Index r = 0; r < masked.rows(); ++r)
      if (masked.mask(r, j)) obs.push_back(masked.values(r, j));
    std::sort(obs.begin(), obs.end());
    const std::size_t n = obs.size();
    const double median = n % 2 ? obs[n / 2] : 0.5 * (obs[n / 2 - 1] + obs[n / 2]);
    EXPECT_NEAR(out.completed.values(i, j), median, 1e-9);
  }
}

TEST(Impute, StrongCorrelationTracksPartnerQuantile) {
  auto m = bivariate(0.99, 200, 31);
  // Partner (column 1) value nearest its median.
  std::vector<std::pair<double, Eigen::Index>> partner;
  for (Eigen::Index i = 0; i < m.rows(); ++i) partner.emplace_back(m.values(i, 1), i);
  std::sort(partner.begin(), partner.end());
  const Eigen::Index row = partner[partner.size() / 2 + 3].second;
  m.mask(row, 0) = false;

  const auto model = em_fit(m);
  const double imputed = impute(model, m).completed.values(row, 0);
  const double p = normal::cdf(model.marginals[1].forward(m.values(row, 1)));
  std::vector<double> obs;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (m.mask(i, 0)) obs.push_back(m.values(i, 0));
  std::sort(obs.begin(), obs.end());
  // Empirical quantile bracket around the partner's rank, widened by 0.01.
  const auto order_stat = [&](double prob) {
    const double pos = std::clamp(prob * static_cast<double>(obs.size() + 1) - 1.0, 0.0,
                                  static_cast<double>(obs.size() - 1));
    return pos;
  };
  EXPECT_GE(imputed, obs[static_cast<std::size_t>(std::floor(order_stat(p - 0.01)))]);
  EXPECT_LE(imputed, obs[static_cast<std::size_t>(std::ceil(order_stat(p + 0.01)))]);
}

TEST(Impute, BeatsColumnMeanOnCorrelatedData) {
  const auto m = bivariate(0.8, 2000, 41);
  const auto [masked, record] = dataset::apply_mask(m, 0.1, 42);
  const auto out = impute(em_fit(masked), masked);
  double copula_err = 0, mean_err = 0;
  for (std::size_t k = 0; k < record.erased_cells.size(); ++k) {
    const auto [i, j] = record.erased_cells[k];
    double sum = 0;
    int n = 0;
    for (Eigen::Index r = 0; r < masked.rows(); ++r)
      if (masked.mask(r, j)) {
        sum += masked.values(r, j);
        ++n;
      }
    copula_err += std::abs(out.completed.values(i, j) - record.original_values[k]);
    mean_err += std::abs(sum / n - record.original_values[k]);
  }
  EXPECT_LE(copula_err, 0.8 * mean_err);
}

TEST(Impute, FullyMissingRowIsFlagged) {
  auto m = bivariate(0.5, 40, 3);
  m.mask(7, 0) = m.mask(7, 1) = false;
  const auto out = impute(em_fit(m), m);
  EXPECT_EQ(out.flagged_rows, std::vector<Eigen::Index>{7});
  EXPECT_TRUE(std::isfinite(out.completed.values(7, 0)));
}

TEST(CopulaJson, RoundTrip) {
  const auto [masked, record] = dataset::apply_mask(bivariate(0.5, 80, 3), 0.1, 3);
  const auto model = em_fit(masked);
  const auto j = to_json(model);
  EXPECT_EQ(j.at("sigma").size(), 4u);
  const auto back = copula_model_from_json(j);
  EXPECT_EQ(back.sigma, model.sigma);
  EXPECT_EQ(back.marginals.size(), model.marginals.size());
  EXPECT_EQ(to_json(back).dump(), j.dump());
}
