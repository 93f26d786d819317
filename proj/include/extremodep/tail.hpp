#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "extremodep/angular.hpp"
#include "extremodep/bayes_np.hpp"
#include "extremodep/bernstein.hpp"
#include "extremodep/gev.hpp"

namespace extremodep {

// Bivariate angular measure given by atoms at w = 0, 1 and a density on (0,1).
struct AngularDensity1d {
  double p0 = 0.0, p1 = 0.0;
  std::function<double(double)> h;
};

// L(x) = d int max_j(x_j w_j) dH and R(x) = d int min_j(x_j w_j) dH.
// Bivariate angular measures are integrated with 512 Gauss-Legendre nodes on
// each side of the kink, atoms exactly. Pickands objects use L(x) = |x| A(x/|x|)
// and inclusion-exclusion for R.
double stable_tail_L(const Vec& x, const BernsteinAngular& m);
double stable_tail_L(const Vec& x, const ParametricAngularModel& m);  // d = 2
double stable_tail_L(const Vec& x, const BernsteinPickands& A);
double stable_tail_L(const Vec& x, const AngularDensity1d& m);
double tail_copula_R(const Vec& x, const BernsteinAngular& m);
double tail_copula_R(const Vec& x, const ParametricAngularModel& m);
double tail_copula_R(const Vec& x, const BernsteinPickands& A);
double tail_copula_R(const Vec& x, const AngularDensity1d& m);

enum class TailKind { or_, and_ };
enum class FailureKind { or_, and_, both };

// "or": P(some component above its own quantile) ~ L(q).
// "and": P(all components above) ~ R(q). Warns when some q_j > 0.1.
double joint_tail_probability(const Vec& q, const BernsteinAngular& m, TailKind kind,
                              std::vector<std::string>* warnings = nullptr);
double joint_tail_probability(const Vec& q, const ParametricAngularModel& m, TailKind kind,
                              std::vector<std::string>* warnings = nullptr);
double joint_tail_probability(const Vec& q, const BernsteinPickands& A, TailKind kind,
                              std::vector<std::string>* warnings = nullptr);
double joint_tail_probability(const Vec& q, const AngularDensity1d& m, TailKind kind,
                              std::vector<std::string>* warnings = nullptr);

struct ReturnLevelCurve {
  int free_index = 0;
  Vec p;
  Vec mean, lower, upper;
  std::vector<int> unsolved;  // per p, posterior draws with no solution
  std::vector<std::string> warnings;
};

// Solves P(Y_free > y, Y_fixed > x_fixed) = p per posterior draw for each p.
// Exactly one entry of `fixed` must be empty.
ReturnLevelCurve joint_return_level(const PosteriorChain& c, int burn, const Vec& p_grid,
                                    const std::array<std::optional<double>, 2>& fixed, double cred = 0.95);
// sup{z : R(z) >= p} for R nonincreasing in the free unit-Frechet level z.
// Empty when p is not attainable.
std::optional<double> solve_return_level(const std::function<double(double)>& R_of_z, double p);
// Same with R(1/z, 1/z_fixed) from m, the free component in position free_index.
std::optional<double> solve_return_level(const BernsteinAngular& m, double z_fixed, double p, int free_index);

// n draws from H: atoms at 0 and 1, interior from the Beta mixture.
Vec sample_angular(const BernsteinAngular& m, int n, std::uint64_t seed);

enum class SampleKind { maxima, exceed };

struct BivariateSampleOptions {
  SampleKind kind = SampleKind::maxima;
  TailKind exceed_type = TailKind::or_;
  std::optional<std::array<double, 2>> threshold;  // data units if margins are set, else unit-Frechet
  std::optional<std::array<GevParams, 2>> margins;
  std::uint64_t max_tries = 10000000;
};

struct BivariateSample {
  Matrix values;  // n x 2
  std::uint64_t tries = 0;
  double acceptance = 1.0;
};

// exceed: z = 2(rw, r(1-w)) with r unit Pareto, kept when inside the failure region.
// maxima: Z1 unit Frechet, Z2 by inverting the conditional cdf given Z1.
BivariateSample sample_bivariate(const BernsteinAngular& m, int n, std::uint64_t seed,
                                 const BivariateSampleOptions& opt);
// P(Z2 <= z2 | Z1 = z1) for the bivariate max-stable law with unit-Frechet margins.
double conditional_cdf(const BernsteinAngular& m, double z1, double z2);

struct FailureCell {
  double u1 = 0, u2 = 0;
  double p_or = 0, se_or = 0, p_and = 0, se_and = 0;  // NaN when not requested
};

struct FailureGrid {
  Vec u1, u2;
  std::vector<FailureCell> cells;  // u1 varies slowest
  int n = 0;
};

FailureGrid failure_probability(const BernsteinAngular& m, const std::array<GevParams, 2>& margins, const Vec& u1_grid,
                                const Vec& u2_grid, FailureKind kind, int N, std::uint64_t seed, int threads = 1);
// Same estimator with each simulated point tied to a random post-burn posterior
// draw, for both the angle and the threshold transform.
FailureGrid failure_probability_posterior(const PosteriorChain& c, int burn, const Vec& u1_grid, const Vec& u2_grid,
                                          FailureKind kind, int N, std::uint64_t seed, int threads = 1);

}  // namespace extremodep
