#include <gtest/gtest.h>

#include <cmath>

#include "extremodep/angular.hpp"
#include "stat_helpers.hpp"

using namespace extremodep;

namespace {

const ParametricAngularModel kHr2{Family::HR, 2, {0.7}};
const ParametricAngularModel kTd2{Family::TD, 2, {1.5, 3.0}};
const ParametricAngularModel kPb3{Family::PB, 3, {2.0, 2.0, 3.0, 1.5}};
const ParametricAngularModel kTd3{Family::TD, 3, {1.5, 2.0, 3.0}};
const ParametricAngularModel kHr3{Family::HR, 3, {0.65, 0.90, 0.98}};

// Integral of g(w) h(w) over the simplex.
double simplex_integral(const ParametricAngularModel& m, const std::function<double(const Vec&)>& g) {
  if (m.dim == 2)
    return integrate([&](double u) { Vec w{u, 1 - u}; return g(w) * angular_density(m, w); }, 0.0, 1.0, 256);
  // w1 = u, w2 = (1-u) v, Jacobian (1-u)
  return integrate(
      [&](double u) {
        return (1 - u) * integrate(
                             [&](double v) {
                               Vec w{u, (1 - u) * v, (1 - u) * (1 - v)};
                               return g(w) * angular_density(m, w);
                             },
                             0.0, 1.0, 200);
      },
      0.0, 1.0, 200);
}

}  // namespace

TEST(PseudoPolar, Examples) {
  auto s = pseudo_polar({{2.0, 2.0}, {3.0, 1.0, 1e-12}});
  EXPECT_DOUBLE_EQ(s[0].radius, 4.0);
  EXPECT_DOUBLE_EQ(s[0].w[0], 0.5);
  EXPECT_NEAR(s[1].radius, 4.0, 1e-11);
  EXPECT_NEAR(s[1].w[0], 0.75, 1e-12);
  EXPECT_NEAR(s[1].w[2], 0.0, 1e-12);
  EXPECT_THROW(pseudo_polar({{1.0, 0.0}}), std::invalid_argument);
}

TEST(PseudoPolar, ReconstructionIsIdentity) {
  Rng rng(5);
  Matrix y(500, Vec(3));
  for (auto& r : y)
    for (auto& v : r) v = 1.0 / rng.uniform();
  const auto s = pseudo_polar(y);
  for (std::size_t i = 0; i < y.size(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(s[i].radius * s[i].w[j], y[i][j], 1e-12 * y[i][j]);
      sum += s[i].w[j];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Exceedances, CountsAndOrder) {
  Rng rng(2);
  Matrix y(100, Vec(2));
  for (auto& r : y)
    for (auto& v : r) v = 1.0 / rng.uniform();
  const auto s = pseudo_polar(y);
  const auto e = select_exceedances(s, 0.9);
  EXPECT_EQ(e.size(), 10u);
  EXPECT_EQ(select_exceedances(s, 0.0).size(), 100u);
  double min_kept = 1e300;
  for (const auto& x : e) min_kept = std::min(min_kept, x.radius);
  int above = 0;
  for (const auto& x : s) above += x.radius >= min_kept;
  EXPECT_EQ(above, 10);
}

TEST(AngularDensity, SymmetricParametersGiveSymmetricDensity) {
  const ParametricAngularModel td{Family::TD, 2, {2.5, 2.5}};
  for (double w = 0.01; w < 1.0; w += 0.07) {
    EXPECT_NEAR(angular_density(kHr2, {w, 1 - w}), angular_density(kHr2, {1 - w, w}), 1e-12);
    EXPECT_NEAR(angular_density(td, {w, 1 - w}), angular_density(td, {1 - w, w}), 1e-12);
  }
  const ParametricAngularModel pb{Family::PB, 3, {1.5, 2.0, 2.0, 2.0}};
  EXPECT_NEAR(angular_density(pb, {0.2, 0.3, 0.5}), angular_density(pb, {0.5, 0.2, 0.3}), 1e-12);
}

TEST(AngularDensity, IntegratesToOne) {
  for (const auto& m : {kHr2, kTd2, kPb3, kTd3, kHr3})
    EXPECT_NEAR(simplex_integral(m, [](const Vec&) { return 1.0; }), 1.0, 1e-4) << family_name(m.family) << m.dim;
}

TEST(AngularDensity, ComponentMeansAreOneOverD) {
  for (const auto& m : {kHr2, kTd2, kPb3, kTd3, kHr3})
    for (int j = 0; j < m.dim; ++j)
      EXPECT_NEAR(simplex_integral(m, [j](const Vec& w) { return w[j]; }), 1.0 / m.dim, 1e-3)
          << family_name(m.family) << m.dim << " component " << j;
}

TEST(AngularDensity, RejectsBoundaryAndBadParameters) {
  EXPECT_THROW(angular_density(kHr2, {0.0, 1.0}), std::domain_error);
  EXPECT_THROW(angular_density({Family::PB, 2, {1.0, 1.0}}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(angular_density({Family::TD, 2, {1.0, -1.0}}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(angular_density({Family::HR, 3, {1.0, 1.0}}, {0.2, 0.3, 0.5}), std::invalid_argument);
}

TEST(AngularSampler, ComponentMeans) {
  for (const auto& m : {kHr2, kTd3, kPb3}) {
    const Matrix w = angular_sample_parametric(m, 100000, 17);
    for (int j = 0; j < m.dim; ++j) {
      double s = 0.0;
      for (const auto& r : w) s += r[j];
      EXPECT_NEAR(s / w.size(), 1.0 / m.dim, 0.01);
    }
  }
}

TEST(AngularSampler, SymmetricUnderPermutation) {
  const ParametricAngularModel m{Family::HR, 3, {0.8, 0.8, 0.8}};
  const Matrix a = angular_sample_parametric(m, 20000, 1);
  const Matrix b = angular_sample_parametric(m, 20000, 2);
  std::vector<double> x, y;
  for (const auto& r : a) x.push_back(r[0]);
  for (const auto& r : b) y.push_back(r[2]);
  EXPECT_GT(testing_stats::ks_two_sample_p(x, y), 0.01);
}

TEST(AngularSampler, HistogramMatchesDensity) {
  for (const auto& m : {kHr2, kTd2}) {
    const int n = 100000, bins = 50;
    const Matrix w = angular_sample_parametric(m, n, 99);
    std::vector<double> obs(bins, 0.0), expv(bins);
    for (const auto& r : w) obs[std::min(bins - 1, static_cast<int>(r[0] * bins))] += 1.0;
    for (int b = 0; b < bins; ++b)
      expv[b] = n * integrate([&](double u) { return angular_density(m, {u, 1 - u}); },
                              static_cast<double>(b) / bins, static_cast<double>(b + 1) / bins, 64);
    EXPECT_GT(testing_stats::chi_square_p(obs, expv, bins - 1), 0.01) << family_name(m.family);
  }
}

TEST(PppFit, RecoversHuslerReiss) {
  const Matrix w = angular_sample_parametric(kHr2, 2000, 4);
  const PppFit f = ppp_fit_mle(w, Family::HR, {1.0});
  EXPECT_LT(std::abs(f.params[0] - 0.7), 3 * f.se[0]);
  EXPECT_GT(f.params[0], 0.0);
  EXPECT_NEAR(f.aic, -2 * f.loglik + 2, 1e-9);
}

TEST(PppFit, StartAtTruthNotWorse) {
  const Matrix w = angular_sample_parametric(kTd3, 800, 8);
  const PppFit f = ppp_fit_mle(w, Family::TD, kTd3.params);
  double ll_truth = 0.0;
  for (const auto& r : w) ll_truth += std::log(angular_density(kTd3, r));
  EXPECT_GE(f.loglik, ll_truth - 1e-6);
  // well-specified: TIC close to AIC
  EXPECT_NEAR(f.tic, f.aic, 3.0);
}

TEST(PppFit, TicRanksGeneratingFamily) {
  const std::vector<ParametricAngularModel> gen{
      {Family::PB, 3, {0.6, 6.0, 0.8, 3.0}}, {Family::TD, 3, {0.8, 2.5, 6.0}}, {Family::HR, 3, {0.4, 0.8, 0.7}}};
  const std::vector<Vec> starts{{1.0, 1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
  const Family fams[3] = {Family::PB, Family::TD, Family::HR};
  for (int g = 0; g < 3; ++g) {
    int wins = 0;
    for (int s = 0; s < 50; ++s) {
      const Matrix w = angular_sample_parametric(gen[g], 500, 500 + 50 * g + s);
      double best = 1e300;
      int arg = -1;
      for (int k = 0; k < 3; ++k) {
        const double tic = ppp_fit_mle(w, fams[k], starts[k]).tic;
        if (tic < best) {
          best = tic;
          arg = k;
        }
      }
      wins += arg == g;
    }
    EXPECT_GE(wins, 45) << family_name(fams[g]);
  }
}

TEST(PppBayes, HuslerReissTrivariate) {
  const Matrix w = angular_sample_parametric(kHr3, 300, 21);
  const PppChain c = ppp_fit_bayes(w, Family::HR, default_prior(Family::HR, 3), 0.35, 20000, 10000, 5);
  ASSERT_EQ(c.natural.size(), 20000u);
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(c.post_mean[i] - kHr3.params[i]), 3 * c.post_sd[i]);
}

TEST(PppBayes, TinyStepAcceptsAlmostEverything) {
  const Matrix w = angular_sample_parametric(kHr2, 200, 3);
  const PppChain c = ppp_fit_bayes(w, Family::HR, default_prior(Family::HR, 2), 1e-12, 500, 100, 1, {0.7});
  EXPECT_GT(c.acceptance_rate, 0.99);
}

TEST(PppBayes, Deterministic) {
  const Matrix w = angular_sample_parametric(kHr2, 200, 3);
  const auto a = ppp_fit_bayes(w, Family::HR, default_prior(Family::HR, 2), 0.35, 2000, 500, 77);
  const auto b = ppp_fit_bayes(w, Family::HR, default_prior(Family::HR, 2), 0.35, 2000, 500, 77);
  EXPECT_EQ(a.natural, b.natural);
  EXPECT_EQ(a.accepted, b.accepted);
}

TEST(PppBayes, ZeroDensityStartRejected) {
  const Matrix w = angular_sample_parametric(kHr2, 50, 3);
  EXPECT_THROW(ppp_fit_bayes(w, Family::HR, default_prior(Family::HR, 2), 0.35, 100, 10, 1, {-1.0}),
               std::runtime_error);
}
