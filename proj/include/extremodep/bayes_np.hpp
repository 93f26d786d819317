#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "extremodep/bernstein.hpp"
#include "extremodep/gev.hpp"
#include "extremodep/numerics.hpp"
#include "extremodep/rng.hpp"

namespace extremodep {

// Bivariate angular distribution H(w) = sum_j eta_j b_j(w; kappa-1) on [0,1),
// H(1) = 1. w is the angle of the first component.
struct BernsteinAngular {
  int kappa = 3;
  Vec eta;  // eta_0 .. eta_{kappa-1}
  double p0() const { return eta.front(); }
  double p1() const { return 1.0 - eta.back(); }
};

// Throws std::invalid_argument unless eta is a nondecreasing sequence in [0,1]
// with (1/kappa) sum eta = 1/2 (to tol).
void validate(const BernsteinAngular& m, double tol = 1e-8);

double H_cdf(double w, const BernsteinAngular& m);
// Density of the continuous part, (kappa-1) sum (eta_{j+1}-eta_j) b_j(w; kappa-2).
double h_density(double w, const BernsteinAngular& m);
// A(t) = 1 - t + 2 int_0^t H, so beta_i = 1 - i/kappa + (2/kappa) sum_{j<i} eta_j.
BernsteinPickands pickands_from_eta(const BernsteinAngular& m);

// log density of a bivariate max-stable law with unit-Frechet margins and
// Pickands function A (t = z1/(z1+z2)).
double log_density_frechet(double z1, double z2, const BernsteinPickands& A);
// Bivariate GEV log-likelihood of the rows of y; -inf outside the support.
double bivariate_gev_loglik(const Matrix& y, const GevParams& m1, const GevParams& m2, const BernsteinPickands& A);

enum class KappaPrior { nbinom, pois };

struct NpPriors {
  KappaPrior prior_k = KappaPrior::nbinom;
  double k_mean = 3.2;  // of kappa - 3
  double k_var = 4.48;  // nbinom only
  double p0_max = 0.5;  // p0 ~ U[0, p0_max]
};

// log prior mass of kappa (kappa >= 3).
double log_kappa_prior(int kappa, const NpPriors& pr);
// Draw from Pi(eta | kappa): p0, p1 uniform, interior sorted uniforms moved
// affinely to satisfy the mean constraint.
BernsteinAngular draw_eta_prior(int kappa, const NpPriors& pr, Rng& rng);

// Adaptive random-walk proposal for one margin.
class AdaptiveState {
 public:
  static constexpr double kTarget = 0.234;
  explicit AdaptiveState(double tau0 = 1.0);
  // Robbins-Monro step constant c = sqrt(2 pi) exp(z0^2/2) / (2 z0), z0 = -Phi^{-1}(target/2).
  static double step_constant();
  // Records theta^(s) and sets Sigma^(s+1) from tau^(s).
  void push(const std::array<double, 3>& theta);
  void update_tau(double accept_prob);
  double tau() const { return tau_; }
  int s() const { return s_; }
  const Eigen::Matrix3d& sigma() const { return sigma_; }
  const Eigen::Vector3d& mean() const { return mean_; }

 private:
  double tau_;
  int s_ = 0;
  Eigen::Vector3d mean_ = Eigen::Vector3d::Zero();
  Eigen::Matrix3d m2_ = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d sigma_ = Eigen::Matrix3d::Identity();
};

struct McmcConfig {
  NpPriors priors;
  int nsim = 50000;
  std::uint64_t seed = 1;
  bool mar_prelim = true;
  int prelim_iter = 2000;
  int kappa0 = 3;
  double tau0 = 1.0;
  // Likelihood treated as 1 and margins held fixed: the dependence moves then
  // target the prior.
  bool prior_only = false;
};

struct ChainRecord {
  std::array<double, 3> mar1{};
  std::array<double, 3> mar2{};
  int kappa = 3;
  Vec eta;
  double pi1 = 0, pi2 = 0, pi3 = 0;
  bool acc1 = false, acc2 = false, acc3 = false;
  bool reject1 = false, reject2 = false;  // proposal outside the parameter space
  double tau1 = 0, tau2 = 0;
};

struct PosteriorChain {
  McmcConfig config;
  int n_data = 0;
  std::vector<ChainRecord> records;
  std::vector<std::string> warnings;
};

PosteriorChain joint_mcmc(const Matrix& data, const McmcConfig& cfg);

struct Band {
  Vec mean, lower, upper;
};

struct ParamSummary {
  double mean = 0, lower = 0, upper = 0;
};

struct ChainSummary {
  int burn = 0;
  double cred = 0.95;
  Vec grid_A;  // 100 points on [0,1]
  Band A;
  Vec grid_h;  // 100 interior points
  Band h;
  ParamSummary p0, p1, kappa;
  std::array<ParamSummary, 3> mar1, mar2;
};

ChainSummary chain_summary(const PosteriorChain& c, int burn, double cred = 0.95);

struct DiagnosticRow {
  int iteration = 0;
  double tau1 = 0, tau2 = 0;
  int kappa = 0;
  double acc1 = 0, acc2 = 0, acc3 = 0;  // running means of the acceptance probabilities
  double target = AdaptiveState::kTarget;
};

std::vector<DiagnosticRow> diagnostics(const PosteriorChain& c);

// Posterior predictive P(Y1 > y1, Y2 > y2) by averaging the Beta-cdf formula
// over post-burn iterations, each with its own marginal transform.
double predictive_exceedance(const PosteriorChain& c, int burn, const std::array<double, 2>& y_star);
// One posterior draw's contribution, on the unit-Frechet scale.
double bernstein_exceedance(const BernsteinAngular& m, double z1, double z2);

BernsteinAngular angular_of(const ChainRecord& r);
GevParams margin_of(const std::array<double, 3>& m);

void write_chain_csv(std::ostream& os, const PosteriorChain& c);
PosteriorChain read_chain_csv(std::istream& is);

}  // namespace extremodep
