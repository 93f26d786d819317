#include <gtest/gtest.h>

#include <boost/math/distributions/beta.hpp>
#include <cmath>
#include <sstream>

#include "extremodep/bayes_np.hpp"
#include "extremodep/synthetic.hpp"
#include "stat_helpers.hpp"

using namespace extremodep;

namespace {

double logistic_A(double t, double alpha) {
  return std::pow(std::pow(t, 1 / alpha) + std::pow(1 - t, 1 / alpha), alpha);
}

// 2 int max(x1 w, x2 (1-w)) dH with exact atoms and a split at the kink.
double L_quadrature(double x1, double x2, const BernsteinAngular& m) {
  const double kink = x2 / (x1 + x2);
  auto f = [&](double w) { return std::max(x1 * w, x2 * (1 - w)) * h_density(w, m); };
  return 2.0 * (m.p0() * x2 + m.p1() * x1 + integrate(f, 0.0, kink, 256) + integrate(f, kink, 1.0, 256));
}

// Draw from H as a Beta mixture plus atoms, written independently of the library.
double draw_H(const BernsteinAngular& m, Rng& rng) {
  double u = rng.uniform();
  if (u < m.p0()) return 0.0;
  u -= m.p0();
  const int k = m.kappa;
  for (int j = 0; j + 2 <= k; ++j) {
    const double wgt = m.eta[j + 1] - m.eta[j];
    if (u < wgt) return rng.beta(j + 1.0, k - 1.0 - j);
    u -= wgt;
  }
  return 1.0;
}

Matrix logistic_gev_data(int n, double alpha, const GevParams& g1, const GevParams& g2, std::uint64_t seed) {
  Rng rng(seed);
  Matrix z = sample_logistic(n, 2, alpha, rng);
  for (auto& r : z) {
    r[0] = from_frechet(r[0], g1);
    r[1] = from_frechet(r[1], g2);
  }
  return z;
}

const GevParams kM1{10.0, 2.0, 0.1};
const GevParams kM2{0.0, 0.5, -0.1};

}  // namespace

TEST(BernsteinAngular, CdfEndpointsAndMonotone) {
  Rng rng(1);
  NpPriors pr;
  for (int rep = 0; rep < 30; ++rep) {
    const BernsteinAngular m = draw_eta_prior(3 + rep % 8, pr, rng);
    EXPECT_NO_THROW(validate(m));
    EXPECT_DOUBLE_EQ(H_cdf(0.0, m), m.p0());
    EXPECT_EQ(H_cdf(1.0, m), 1.0);
    double prev = -1.0;
    for (int i = 0; i < 1000; ++i) {
      const double v = H_cdf(i / 1000.0, m);
      EXPECT_GE(v, prev - 1e-15);
      prev = v;
    }
  }
  EXPECT_THROW(H_cdf(1.5, draw_eta_prior(4, pr, rng)), std::domain_error);
}

TEST(BernsteinAngular, DensityExamples) {
  // equally spaced eta: linear cdf
  const int k = 6;
  const double p0 = 0.1, p1 = 0.1;
  BernsteinAngular m{k, Vec(k)};
  for (int j = 0; j < k; ++j) m.eta[j] = p0 + (1 - p1 - p0) * j / (k - 1.0);
  EXPECT_NO_THROW(validate(m));
  for (double w : {0.05, 0.3, 0.77}) EXPECT_NEAR(h_density(w, m), 1 - p0 - p1, 1e-12);

  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const BernsteinAngular r = draw_eta_prior(3 + rep % 10, NpPriors{}, rng);
    for (double w : {0.1, 0.45, 0.9}) {
      const double h = 1e-5;
      EXPECT_NEAR((H_cdf(w + h, r) - H_cdf(w - h, r)) / (2 * h), h_density(w, r), 1e-6);
    }
    EXPECT_NEAR(integrate([&](double w) { return h_density(w, r); }, 0.0, 1.0, 256), 1 - r.p0() - r.p1(), 1e-10);
    EXPECT_GE(h_density(0.5, r), 0.0);
  }
}

TEST(BernsteinAngular, ValidateRejects) {
  EXPECT_THROW(validate(BernsteinAngular{3, {0.2, 0.1, 0.9}}), std::invalid_argument);
  EXPECT_THROW(validate(BernsteinAngular{3, {0.0, 0.5, 0.6}}), std::invalid_argument);
  EXPECT_THROW(validate(BernsteinAngular{2, {0.5, 0.5}}), std::invalid_argument);
}

TEST(PickandsFromEta, Independence) {
  for (int k : {3, 5, 9}) {
    const BernsteinAngular m{k, Vec(k, 0.5)};
    const BernsteinPickands A = pickands_from_eta(m);
    for (double t = 0; t <= 1.0; t += 0.05) EXPECT_NEAR(A.at(t), 1.0, 1e-12);
  }
}

TEST(PickandsFromEta, StepAtMidpointApproachesCompleteDependence) {
  const int k = 4000;
  BernsteinAngular m{k, Vec(k, 0.0)};
  for (int j = k / 2; j < k; ++j) m.eta[j] = 1.0;
  EXPECT_NO_THROW(validate(m));
  EXPECT_NEAR(pickands_from_eta(m).at(0.5), 0.5, 1e-2);
}

TEST(PickandsFromEta, MatchesQuadratureOfH) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const BernsteinAngular m = draw_eta_prior(3 + rep % 12, NpPriors{}, rng);
    const BernsteinPickands A = pickands_from_eta(m);
    for (int i = 0; i < 100; ++i) {
      const double t = i / 99.0;
      EXPECT_NEAR(A.at(t), L_quadrature(1 - t, t, m), 1e-6);
    }
    EXPECT_LE(pickands_violation(A, make_simplex_grid(2, 1000)), 1e-12);
  }
}

TEST(Likelihood, DensityIsMixedDerivativeOfCdf) {
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const BernsteinAngular m = draw_eta_prior(3 + rep, NpPriors{}, rng);
    const BernsteinPickands A = pickands_from_eta(m);
    // G = exp(-V), V from the angular measure directly
    auto G = [&](double z1, double z2) { return std::exp(-L_quadrature(1 / z1, 1 / z2, m)); };
    for (auto [z1, z2] : {std::pair{0.7, 1.3}, std::pair{2.0, 0.5}, std::pair{5.0, 4.0}}) {
      const double h = 1e-4 * std::min(z1, z2);
      const double fd = (G(z1 + h, z2 + h) - G(z1 + h, z2 - h) - G(z1 - h, z2 + h) + G(z1 - h, z2 - h)) / (4 * h * h);
      EXPECT_NEAR(std::exp(log_density_frechet(z1, z2, A)), fd, 1e-5 * std::max(1.0, fd)) << rep;
    }
  }
}

TEST(Likelihood, GevScaleAddsJacobians) {
  Rng rng(5);
  const Matrix y = logistic_gev_data(50, 0.5, kM1, kM2, 6);
  const BernsteinAngular m = draw_eta_prior(6, NpPriors{}, rng);
  const BernsteinPickands A = pickands_from_eta(m);
  double oracle = 0.0;
  for (const auto& r : y) {
    const double z1 = to_frechet(r[0], kM1), z2 = to_frechet(r[1], kM2);
    // log dz/dy = log f_gev(y) - log f_frechet(z)
    auto lj = [](double y1, double z, const GevParams& p) { return gev_logpdf(y1, p) + 2 * std::log(z) + 1 / z; };
    oracle += log_density_frechet(z1, z2, A) + lj(r[0], z1, kM1) + lj(r[1], z2, kM2);
  }
  EXPECT_NEAR(bivariate_gev_loglik(y, kM1, kM2, A), oracle, 1e-8 * std::abs(oracle));
  EXPECT_EQ(bivariate_gev_loglik(y, {10.0, 2.0, 5.0}, kM2, A), -std::numeric_limits<double>::infinity());
}

TEST(Priors, KappaPriorMoments) {
  NpPriors pr;
  double s = 0, m1 = 0, m2 = 0;
  for (int k = 3; k < 400; ++k) {
    const double p = std::exp(log_kappa_prior(k, pr));
    s += p;
    m1 += p * (k - 3);
    m2 += p * (k - 3) * (k - 3);
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_NEAR(m1, 3.2, 1e-9);
  EXPECT_NEAR(m2 - m1 * m1, 4.48, 1e-9);
  pr.prior_k = KappaPrior::pois;
  EXPECT_NEAR(std::exp(log_kappa_prior(3, pr)), std::exp(-3.2), 1e-14);
}

TEST(Priors, EtaDrawsRespectBounds) {
  Rng rng(7);
  NpPriors pr;
  for (int rep = 0; rep < 2000; ++rep) {
    const int k = 3 + rep % 15;
    const BernsteinAngular m = draw_eta_prior(k, pr, rng);
    ASSERT_NO_THROW(validate(m, 1e-8));
    const double p0 = m.p0();
    EXPECT_GE(p0, 0.0);
    EXPECT_LE(p0, 0.5);
    const double a = std::max(0.0, (k - 1) * p0 - k / 2.0 + 1), b = (p0 + k / 2.0 - 1) / (k - 1);
    EXPECT_GE(m.p1(), a - 1e-12);
    EXPECT_LE(m.p1(), b + 1e-12);
  }
}

TEST(Adaptive, StepConstantAndRegimeSwitch) {
  // z0 with Phi(-z0) = 0.117, by bisection on erfc
  double lo = 0, hi = 5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(mid / std::sqrt(2.0)) > 0.117 ? lo : hi) = mid;
  }
  const double z0 = 0.5 * (lo + hi);
  EXPECT_NEAR(AdaptiveState::step_constant(), std::sqrt(2 * std::acos(-1.0)) * std::exp(z0 * z0 / 2) / (2 * z0), 1e-10);
  EXPECT_GT(AdaptiveState::step_constant(), 0.0);

  AdaptiveState ad(0.8);
  Rng rng(8);
  std::vector<std::array<double, 3>> trace;
  for (int s = 1; s <= 300; ++s) {
    const std::array<double, 3> th{100 + 0.01 * rng.normal(), 2 + rng.normal(), 0.1 * rng.normal()};
    trace.push_back(th);
    const double tau = ad.tau();
    ad.push(th);
    Eigen::Matrix3d expect;
    if (s <= 100) {
      expect = (1 + tau * tau / s) * Eigen::Matrix3d::Identity();
    } else {
      Eigen::Vector3d mu = Eigen::Vector3d::Zero();
      for (const auto& t : trace) mu += Eigen::Vector3d(t[0], t[1], t[2]);
      mu /= s;
      Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
      for (const auto& t : trace) {
        const Eigen::Vector3d d = Eigen::Vector3d(t[0], t[1], t[2]) - mu;
        S += d * d.transpose();
      }
      expect = S / (s - 1.0) + (tau * tau / s) * Eigen::Matrix3d::Identity();
    }
    ASSERT_LT((ad.sigma() - expect).cwiseAbs().maxCoeff(), 1e-10) << "s=" << s;
    ad.update_tau(rng.uniform());
    EXPECT_GT(ad.tau(), 0.0);
  }
}

TEST(JointMcmc, DeterministicAndValidRecords) {
  const Matrix y = logistic_gev_data(100, 0.6, kM1, kM2, 9);
  McmcConfig cfg;
  cfg.nsim = 1500;
  cfg.seed = 42;
  const PosteriorChain a = joint_mcmc(y, cfg);
  const PosteriorChain b = joint_mcmc(y, cfg);
  ASSERT_EQ(a.records.size(), 1500u);
  std::ostringstream sa, sb;
  write_chain_csv(sa, a);
  write_chain_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  const SimplexGrid fine = make_simplex_grid(2, 1000);
  for (std::size_t i = 0; i < a.records.size(); i += 7) {
    const auto& r = a.records[i];
    ASSERT_GE(r.kappa, 3);
    ASSERT_NO_THROW(validate(angular_of(r), 1e-8));
    const BernsteinPickands A = pickands_from_eta(angular_of(r));
    EXPECT_NEAR(A.at(0.0), 1.0, 1e-12);
    EXPECT_NEAR(A.at(1.0), 1.0, 1e-12);
    for (std::size_t u = 1; u + 1 < fine.size(); u += 10) {
      const double t = fine.points[u][0], h = 1e-3;
      EXPECT_GE(A.at(t - h) - 2 * A.at(t) + A.at(t + h), -1e-8);
    }
  }
  EXPECT_THROW(joint_mcmc({{1.0, 2.0}}, cfg), std::invalid_argument);
}

TEST(JointMcmc, ChainCsvRoundTrip) {
  const Matrix y = logistic_gev_data(60, 0.6, kM1, kM2, 10);
  McmcConfig cfg;
  cfg.nsim = 1000;
  cfg.seed = 3;
  const PosteriorChain a = joint_mcmc(y, cfg);
  std::ostringstream os;
  write_chain_csv(os, a);
  std::istringstream is(os.str());
  const PosteriorChain b = read_chain_csv(is);
  ASSERT_EQ(b.records.size(), a.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].mar1, b.records[i].mar1);
    EXPECT_EQ(a.records[i].eta, b.records[i].eta);
    EXPECT_EQ(a.records[i].tau2, b.records[i].tau2);
    EXPECT_EQ(a.records[i].acc3, b.records[i].acc3);
  }
  std::ostringstream again;
  write_chain_csv(again, b);
  EXPECT_EQ(again.str(), os.str());
  std::istringstream bad("not-a-chain\n");
  EXPECT_THROW(read_chain_csv(bad), std::runtime_error);
  // subnormal acceptance probabilities survive the round trip
  PosteriorChain tiny = b;
  tiny.records[0].pi1 = 4.3355092758793548e-309;
  std::ostringstream ts;
  write_chain_csv(ts, tiny);
  std::istringstream tis(ts.str());
  EXPECT_EQ(read_chain_csv(tis).records[0].pi1, tiny.records[0].pi1);
}

TEST(JointMcmc, PriorRecoveryOfKappa) {
  const Matrix y = logistic_gev_data(50, 0.6, kM1, kM2, 11);
  McmcConfig cfg;
  cfg.nsim = 100000;
  cfg.seed = 5;
  cfg.prior_only = true;
  cfg.mar_prelim = false;
  const PosteriorChain c = joint_mcmc(y, cfg);
  // thin so that the chi-square independence assumption is reasonable
  const int thin = 50, maxbin = 10;
  std::vector<double> obs(maxbin + 1, 0.0), expv(maxbin + 1, 0.0);
  int n = 0;
  for (std::size_t i = 1000; i < c.records.size(); i += thin, ++n) obs[std::min(c.records[i].kappa - 3, maxbin)] += 1;
  double tail = 1.0;
  for (int b = 0; b < maxbin; ++b) {
    expv[b] = n * std::exp(log_kappa_prior(b + 3, cfg.priors));
    tail -= std::exp(log_kappa_prior(b + 3, cfg.priors));
  }
  expv[maxbin] = n * tail;
  EXPECT_GT(testing_stats::chi_square_p(obs, expv, maxbin), 0.01);
}

class LogisticPosterior : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new Matrix(logistic_gev_data(500, 0.6, kM1, kM2, 12));
    McmcConfig cfg;
    cfg.nsim = 50000;
    cfg.seed = 2024;
    chain_ = new PosteriorChain(joint_mcmc(*data_, cfg));
  }
  static void TearDownTestSuite() {
    delete chain_;
    delete data_;
  }
  static Matrix* data_;
  static PosteriorChain* chain_;
  static constexpr int kBurn = 30000;
};
Matrix* LogisticPosterior::data_ = nullptr;
PosteriorChain* LogisticPosterior::chain_ = nullptr;

TEST_F(LogisticPosterior, RecoversPickandsAndMargins) {
  const ChainSummary s = chain_summary(*chain_, kBurn);
  double err = 0.0;
  int covered = 0;
  for (std::size_t i = 0; i < s.grid_A.size(); ++i) {
    const double truth = logistic_A(s.grid_A[i], 0.6);
    err = std::max(err, std::abs(s.A.mean[i] - truth));
    covered += s.A.lower[i] - 1e-12 <= truth && truth <= s.A.upper[i] + 1e-12;
  }
  EXPECT_LT(err, 0.03);
  EXPECT_GE(covered, 90);
  // posterior sd from the post-burn draws
  auto check = [&](int comp, int q, double truth) {
    Vec v;
    for (std::size_t r = kBurn; r < chain_->records.size(); ++r)
      v.push_back(comp == 1 ? chain_->records[r].mar1[q] : chain_->records[r].mar2[q]);
    EXPECT_LT(std::abs(mean(v) - truth), 3 * std::sqrt(variance(v))) << "margin " << comp << " param " << q;
  };
  check(1, 0, kM1.mu);
  check(1, 1, kM1.sigma);
  check(1, 2, kM1.gamma);
  check(2, 0, kM2.mu);
  check(2, 1, kM2.sigma);
  check(2, 2, kM2.gamma);
}

TEST_F(LogisticPosterior, AcceptanceSettlesAtTarget) {
  const auto d = diagnostics(*chain_);
  ASSERT_EQ(d.size(), chain_->records.size());
  EXPECT_NEAR(d.back().acc1, 0.234, 0.05);
  EXPECT_NEAR(d.back().acc2, 0.234, 0.05);
  for (const auto& r : d) {
    ASSERT_GT(r.tau1, 0.0);
    ASSERT_GT(r.tau2, 0.0);
  }
  // post-burn kappa trace agrees with the summary
  double m = 0;
  for (std::size_t i = kBurn; i < d.size(); ++i) m += d[i].kappa;
  m /= static_cast<double>(d.size() - kBurn);
  EXPECT_NEAR(chain_summary(*chain_, kBurn).kappa.mean, m, 1e-9);
}

TEST_F(LogisticPosterior, SummaryBands) {
  const ChainSummary s = chain_summary(*chain_, kBurn, 0.95);
  for (std::size_t i = 0; i < s.grid_A.size(); ++i) {
    EXPECT_LE(s.A.lower[i], s.A.mean[i] + 1e-12);
    EXPECT_GE(s.A.upper[i], s.A.mean[i] - 1e-12);
    EXPECT_LE(s.h.lower[i], s.h.mean[i] + 1e-12);
    EXPECT_GE(s.h.upper[i], s.h.mean[i] - 1e-12);
  }
  const ChainSummary z = chain_summary(*chain_, kBurn, 0.0);
  for (std::size_t i = 0; i < z.grid_A.size(); ++i) EXPECT_EQ(z.A.lower[i], z.A.upper[i]);
  Vec k;
  for (std::size_t r = kBurn; r < chain_->records.size(); ++r) k.push_back(chain_->records[r].kappa);
  EXPECT_EQ(z.kappa.lower, quantile(k, 0.5));
  EXPECT_THROW(chain_summary(*chain_, 50000), std::invalid_argument);
}

TEST_F(LogisticPosterior, PredictiveExceedance) {
  const double big = 1e12;
  EXPECT_NEAR(predictive_exceedance(*chain_, kBurn, {big, big}), 0.0, 1e-6);
  const std::array<double, 2> ys{from_frechet(20.0, kM1), from_frechet(20.0, kM2)};
  const double p = predictive_exceedance(*chain_, kBurn, ys);
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
  // monotone in each coordinate
  EXPECT_LE(predictive_exceedance(*chain_, kBurn, {ys[0] + 1.0, ys[1]}), p);
  EXPECT_LE(predictive_exceedance(*chain_, kBurn, {ys[0], ys[1] + 0.3}), p);

  // Monte Carlo oracle over the same posterior draws
  Rng rng(99);
  const int N = 1000000;
  const std::size_t M = chain_->records.size() - kBurn;
  double s = 0, s2 = 0;
  for (int i = 0; i < N; ++i) {
    const auto& rec = chain_->records[kBurn + rng.below(M)];
    const double z1 = to_frechet(ys[0], margin_of(rec.mar1)), z2 = to_frechet(ys[1], margin_of(rec.mar2));
    const double w = draw_H(angular_of(rec), rng);
    const double v = std::min({1.0, 2 * w / z1, 2 * (1 - w) / z2});
    s += v;
    s2 += v * v;
  }
  const double mc = s / N, se = std::sqrt((s2 / N - mc * mc) / N);
  EXPECT_NEAR(p, mc, 2 * se);
}

TEST_F(LogisticPosterior, ConditionalProbabilityRecipe) {
  const ChainSummary s = chain_summary(*chain_, kBurn);
  const GevParams g1{s.mar1[0].mean, s.mar1[1].mean, s.mar1[2].mean};
  const GevParams g2{s.mar2[0].mean, s.mar2[1].mean, s.mar2[2].mean};
  const std::array<double, 2> ys{gev_quantile(0.95, g1), gev_quantile(0.95, g2)};
  const double joint = predictive_exceedance(*chain_, kBurn, ys);
  const double c1 = joint / (1 - gev_cdf(ys[1], g2));
  const double c2 = joint / (1 - gev_cdf(ys[0], g1));
  for (double v : {joint, c1, c2}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_GE(c1, joint);
  EXPECT_GE(c2, joint);
}

TEST(BernsteinExceedance, MatchesRaoBlackwellMonteCarlo) {
  Rng rng(13);
  const BernsteinAngular m = draw_eta_prior(7, NpPriors{}, rng);
  const double z1 = 15.0, z2 = 9.0;
  const double exact = bernstein_exceedance(m, z1, z2);
  // interior tail copula by quadrature
  auto f = [&](double w) { return std::min(w / z1, (1 - w) / z2) * h_density(w, m); };
  const double kink = z1 / (z1 + z2);
  EXPECT_NEAR(exact, 2 * (integrate(f, 0, kink, 256) + integrate(f, kink, 1, 256)), 1e-12);
}
