#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <set>

#include "extremodep/maxstable.hpp"
#include "extremodep/rng.hpp"
#include "stat_helpers.hpp"

using namespace extremodep;

namespace {

SiteSet line_sites(int d, double spacing) {
  SiteSet s;
  for (int i = 0; i < d; ++i) s.coords.push_back({i * spacing, 0.0});
  return s;
}

Vec column(const Matrix& m, std::size_t j) {
  Vec v;
  for (const auto& r : m) v.push_back(r[j]);
  return v;
}

// E[max(Y1, Y2)] / E[Y1] with Y = max(0, W)^nu and (W1, W2) standard bivariate
// normal with correlation rho.
double extremal_coeff_mc(double nu, double rho, int n, std::uint64_t seed) {
  Rng rng(seed);
  const double s = std::sqrt(1 - rho * rho);
  double sum_max = 0, sum_one = 0;
  for (int i = 0; i < n; ++i) {
    const double w1 = rng.normal(), w2 = rho * w1 + s * rng.normal();
    const double y1 = w1 > 0 ? std::pow(w1, nu) : 0.0, y2 = w2 > 0 ? std::pow(w2, nu) : 0.0;
    sum_max += std::max(y1, y2);
    sum_one += 0.5 * (y1 + y2);
  }
  return sum_max / sum_one;
}

void expect_consecutive_labels(const MaxStableField& f) {
  for (const auto& row : f.hits) {
    int top = 0;
    for (int h : row) {
      EXPECT_GE(h, 1);
      EXPECT_LE(h, top + 1);  // first appearance in site order gets the next label
      top = std::max(top, h);
    }
  }
}

}  // namespace

TEST(PowExpCorr, Examples) {
  EXPECT_DOUBLE_EQ(powexp_corr(0.0, {3, 1.5}), 1.0);
  EXPECT_NEAR(powexp_corr(2.0, {2.0, 1.0}), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(powexp_corr(1.785, {9.275, 1.262}), 0.88, 0.005);
  EXPECT_THROW(powexp_corr(-1.0, {1, 1}), std::invalid_argument);
  double prev = 1.0;
  for (double h = 0.1; h < 10; h += 0.1) {
    const double r = powexp_corr(h, {3, 1.5});
    EXPECT_LE(r, prev);
    EXPECT_GT(r, 0.0);
    prev = r;
  }
}

TEST(ExtremalT, MomentMatchesMonteCarlo) {
  EXPECT_NEAR(extremal_t_moment(1.0), 1 / std::sqrt(2 * M_PI), 1e-15);
  EXPECT_NEAR(extremal_t_moment(2.0), 0.5, 1e-15);
  Rng rng(5);
  const int n = 1000000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double w = rng.normal(), y = w > 0 ? std::pow(w, 3.0) : 0.0;
    s += y;
    s2 += y * y;
  }
  const double m = s / n, se = std::sqrt((s2 / n - m * m) / n);
  EXPECT_NEAR(extremal_t_moment(3.0), m, 3 * se);
}

TEST(SimExtremalT, SingleSiteHitsAreOne) {
  const MaxStableField f = sim_extremal_t(line_sites(1, 1), 1, {3, 1.5}, 200, 1000, 1);
  for (const auto& row : f.hits) EXPECT_EQ(row, std::vector<int>{1});
  for (const auto& row : f.vals) EXPECT_GT(row[0], 0.0);
}

TEST(SimExtremalT, ArgumentChecks) {
  EXPECT_THROW(sim_extremal_t(line_sites(2, 1), 0.5, {3, 1.5}, 10, 1000, 1), std::invalid_argument);
  EXPECT_THROW(sim_extremal_t(line_sites(2, 1), 1, {3, 2.5}, 10, 1000, 1), std::invalid_argument);
  EXPECT_THROW(sim_extremal_t(line_sites(2, 1), 1, {3, 1.5}, 10, 999, 1), std::invalid_argument);
  SiteSet bad = line_sites(2, 1);
  bad.coords[1][0] = NAN;
  EXPECT_THROW(sim_extremal_t(bad, 1, {3, 1.5}, 10, 1000, 1), std::invalid_argument);
}

TEST(SimExtremalT, UnitFrechetMargins) {
  const SiteSet sites = line_sites(10, 0.5);
  for (double nu : {1.0, 3.0}) {
    const MaxStableField f = sim_extremal_t(sites, nu, {3, 1.5}, 10000, 1000, 7 + static_cast<int>(nu));
    double below = 0, n = 0;
    for (const auto& row : f.vals)
      for (double v : row) {
        below += v <= 1.0;
        ++n;
      }
    const double p = std::exp(-1.0), se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(below / n, p, 3 * se) << nu;
    expect_consecutive_labels(f);
  }
}

TEST(SimExtremalT, PairwiseCoefficientMatchesMonteCarloOracle) {
  for (double nu : {1.0, 2.0}) {
    for (double h : {0.5, 2.0, 5.0}) {
      const PowExpCorr corr{3, 1.5};
      const double rho = powexp_corr(h, corr);
      const double oracle = extremal_coeff_mc(nu, rho, 10000000, 17);
      // closed form of the bivariate extremal-t coefficient as a cross-check on the oracle
      const boost::math::students_t t(nu + 1);
      EXPECT_NEAR(oracle, 2 * boost::math::cdf(t, std::sqrt((nu + 1) * (1 - rho) / (1 + rho))), 0.005);
      SiteSet sites;
      sites.coords = {{0, 0}, {h, 0}};
      const MaxStableField f = sim_extremal_t(sites, nu, corr, 2000, 10000, 100 + static_cast<int>(10 * h + nu));
      const auto e = extcoeff_vs_distance(f, sites);
      ASSERT_EQ(e.size(), 1u);
      EXPECT_NEAR(e[0].distance, h, 1e-12);
      EXPECT_NEAR(e[0].eta, oracle, 0.05) << "nu " << nu << " h " << h;
    }
  }
}

TEST(SimExtremalT, MaxStability) {
  const SiteSet sites = line_sites(3, 1.0);
  const int n = 10000, m = 5;
  const MaxStableField one = sim_extremal_t(sites, 1, {3, 1.5}, n, 1000, 21);
  const MaxStableField many = sim_extremal_t(sites, 1, {3, 1.5}, n * m, 1000, 22);
  for (std::size_t s = 0; s < 3; ++s) {
    Vec pooled(n, 0.0);
    for (int t = 0; t < n * m; ++t) pooled[t / m] = std::max(pooled[t / m], many.vals[t][s]);
    for (double& v : pooled) v /= m;
    EXPECT_GT(testing_stats::ks_two_sample_p(pooled, column(one.vals, s)), 0.01) << s;
  }
}

TEST(SimExtremalT, DeterministicAcrossThreads) {
  const SiteSet sites = line_sites(6, 0.7);
  const MaxStableField a = sim_extremal_t(sites, 2, {2, 1}, 300, 1000, 9, 1);
  const MaxStableField b = sim_extremal_t(sites, 2, {2, 1}, 300, 1000, 9, 3);
  EXPECT_EQ(a.vals, b.vals);
  EXPECT_EQ(a.hits, b.hits);
  const MaxStableField c = sim_extremal_t(sites, 2, {2, 1}, 300, 1000, 10, 1);
  EXPECT_NE(a.vals, c.vals);
}

TEST(SimExtremalT, TruncationCheck) {
  EXPECT_LT(truncation_check(line_sites(5, 1.0), 1, {3, 1.5}, 2000, 10000, 3), 0.01);
}

TEST(ConditionalSim, AllEventsAcceptsEverything) {
  const SiteSet sites = line_sites(5, 1.0);
  const MaxStableField f = conditional_sim(sites, 1, {3, 1.5}, 100, 5, 4, 100, 1000);
  EXPECT_DOUBLE_EQ(f.acceptance, 1.0);
  EXPECT_EQ(f.tries, 100u);
  // same streams as the unconditional simulator
  EXPECT_EQ(f.vals, sim_extremal_t(sites, 1, {3, 1.5}, 100, 1000, 4).vals);
}

TEST(ConditionalSim, SingleEvent) {
  const SiteSet sites = line_sites(5, 1.0);
  const MaxStableField f = conditional_sim(sites, 1, {3, 1.5}, 100, 1, 5, 1000000, 1000);
  for (const auto& row : f.hits) EXPECT_EQ(std::set<int>(row.begin(), row.end()), std::set<int>{1});
  EXPECT_LT(f.acceptance, 1.0);
  EXPECT_GT(f.acceptance, 0.0);
  EXPECT_EQ(f.vals.size(), 100u);
  EXPECT_THROW(conditional_sim(sites, 1, {0.1, 1.5}, 100, 1, 5, 50, 1000), std::runtime_error);
  EXPECT_THROW(conditional_sim(sites, 1, {3, 1.5}, 10, 0, 5, 50, 1000), std::invalid_argument);
}

TEST(ConditionalSim, AcceptanceGrowsWithDependence) {
  const SiteSet sites = line_sites(5, 1.0);
  const MaxStableField strong = conditional_sim(sites, 1, {10, 1.5}, 100, 2, 6, 1000, 1000);
  const MaxStableField weak = conditional_sim(sites, 1, {0.5, 1.5}, 20, 2, 6, 1000, 1000);
  EXPECT_GT(strong.acceptance, weak.acceptance);
}

TEST(ExtcoeffVsDistance, DuplicateSiteLengthAndTrend) {
  SiteSet sites = line_sites(8, 0.6);
  sites.coords.push_back(sites.coords[0]);
  const int d = static_cast<int>(sites.coords.size());
  const MaxStableField f = sim_extremal_t(sites, 1, {2, 1.5}, 1000, 1000, 31);
  EXPECT_EQ(f.warnings.size(), 1u);
  const auto e = extcoeff_vs_distance(f, sites);
  ASSERT_EQ(e.size(), static_cast<std::size_t>(d * (d - 1) / 2));
  Vec dist, eta;
  for (const auto& p : e) {
    EXPECT_GE(p.eta, 1.0);
    EXPECT_LE(p.eta, 2.0);
    if (p.distance == 0.0) EXPECT_NEAR(p.eta, 1.0, 0.05);
    dist.push_back(p.distance);
    eta.push_back(p.eta);
  }
  EXPECT_GT(testing_stats::spearman(dist, eta), 0.8);
  MaxStableField few = f;
  few.vals.resize(49);
  EXPECT_THROW(extcoeff_vs_distance(few, sites), std::invalid_argument);
}

TEST(ExtcoeffVsDistance, IndependenceRegimeUpperValue) {
  // r -> 0: every pair at positive distance has rho ~ 0, so the coefficient
  // sits at 2 T_{nu+1}(sqrt(nu+1)) whatever the distance
  const double upper = 2 * boost::math::cdf(boost::math::students_t(2), std::sqrt(2.0));
  const SiteSet sites = line_sites(6, 1.0);
  const MaxStableField f = sim_extremal_t(sites, 1, {0.01, 1.5}, 2000, 1000, 41);
  for (const auto& p : extcoeff_vs_distance(f, sites)) EXPECT_NEAR(p.eta, upper, 0.06);
}
