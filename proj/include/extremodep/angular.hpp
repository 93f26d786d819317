#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "extremodep/numerics.hpp"
#include "extremodep/rng.hpp"

namespace extremodep {

struct AngularSample {
  double radius = 0.0;
  Vec w;
};

// Pseudo-polar coordinates r = sum(y), w = y / r of unit-Frechet rows.
std::vector<AngularSample> pseudo_polar(const Matrix& y);
// Keeps the ceil((1-quantile) n) samples with the largest radii.
std::vector<AngularSample> select_exceedances(const std::vector<AngularSample>& samples, double quantile);
Matrix angles_of(const std::vector<AngularSample>& samples);

// Pairwise beta, tilted Dirichlet, Husler-Reiss.
enum class Family { PB, TD, HR };

Family parse_family(const std::string& name);
std::string family_name(Family f);

// Pair parameters are ordered (1,2), (1,3), ..., (1,d), (2,3), ..., (d-1,d).
//   PB: (alpha, beta_12, beta_13, ...), d >= 3
//   TD: (alpha_1, ..., alpha_d)
//   HR: (lambda_12, lambda_13, ...); the variogram is Gamma_ij = 4 lambda_ij^2,
//       so the bivariate extremal coefficient is 2 Phi(lambda).
struct ParametricAngularModel {
  Family family = Family::HR;
  int dim = 2;
  Vec params;
};

int param_count(Family f, int d);
// Throws std::invalid_argument on a wrong count, dimension or sign.
void validate(const ParametricAngularModel& m);

// Angular density on the interior of the simplex; w holds all d coordinates.
// Normalized so that H is a probability measure with component means 1/d.
double angular_density(const ParametricAngularModel& m, const Vec& w);
// Log density; -inf for invalid parameters instead of throwing.
double log_angular_density(Family f, int d, const Vec& params, const Vec& w);

// n draws (n x d) by rejection from a symmetric Dirichlet envelope.
Matrix angular_sample_parametric(const ParametricAngularModel& m, int n, std::uint64_t seed);

struct PppFit {
  Family family = Family::HR;
  int dim = 2;
  Vec params;
  Vec se;  // sandwich standard errors
  Matrix cov;
  double loglik = 0.0;
  double tic = 0.0;
  double aic = 0.0;
  std::string trace;
};

// Maximizes sum_i log h(w_i | phi); angles are rows of `w` (n x d).
PppFit ppp_fit_mle(const Matrix& w, Family f, const Vec& start);

enum class Transform { log, logit, atanh, identity };

struct PriorComponent {
  Transform transform = Transform::log;
  double mean = 0.0;
  double sd = 3.0;
};

struct PriorSpec {
  std::vector<PriorComponent> comps;
};

PriorSpec default_prior(Family f, int d);
double transform_to(Transform t, double x);
double transform_from(Transform t, double y);

struct PppChain {
  Family family = Family::HR;
  int dim = 2;
  int nsim = 0;
  int nburn = 0;
  double mcpar = 0.0;
  std::uint64_t seed = 0;
  Matrix natural;      // nsim x p
  Matrix transformed;  // nsim x p
  std::vector<int> accepted;  // accepted component moves per sweep
  double acceptance_rate = 0.0;
  Vec post_mean;
  Vec post_sd;
  double bic = 0.0;
  std::vector<std::string> warnings;
};

// Componentwise Gaussian random walk on the transformed scale with variance mcpar.
PppChain ppp_fit_bayes(const Matrix& w, Family f, const PriorSpec& prior, double mcpar, int nsim,
                       int nburn, std::uint64_t seed, const Vec& start = {});

}  // namespace extremodep
