#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace extremodep {

using Vec = std::vector<double>;
using Matrix = std::vector<Vec>;  // row-major: rows are observations
using Objective = std::function<double(const Vec&)>;

// Gauss-Legendre rule mapped to (a,b). Rules are cached per node count.
struct QuadratureRule {
  Vec nodes;
  Vec weights;
};
const QuadratureRule& gauss_legendre_01(int n);
double integrate(const std::function<double(double)>& f, double a, double b, int n);

struct OptimOptions {
  int max_simplex_iter = 4000;
  int max_bfgs_iter = 400;
  double simplex_tol = 1e-7;
  double grad_tol = 1e-8;  // scaled by 1 + |f|
};

struct OptimResult {
  Vec x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string trace;
};

// Minimizes f from x0: Nelder-Mead simplex, then BFGS on central-difference
// gradients. Non-finite objective values are treated as +infinity.
OptimResult minimize(const Objective& f, const Vec& x0, const Vec& step,
                     const OptimOptions& opt = {});

Vec numeric_gradient(const Objective& f, const Vec& x, const Vec& h);
// Central-difference Hessian with per-coordinate steps h.
std::vector<Vec> numeric_hessian(const Objective& f, const Vec& x, const Vec& h);

// Inverse of a small symmetric positive definite matrix; throws if singular.
std::vector<Vec> invert_spd(const std::vector<Vec>& m);

double mean(const Vec& x);
double variance(const Vec& x);  // divisor n-1
// Linear-interpolation sample quantile (type 7). Sorts a copy.
double quantile(Vec x, double q);

// Runs body(i) for i in [0,n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);
// Thread count from EXTREMODEP_THREADS if set, else `requested` (0 means hardware).
int resolve_threads(int requested);

}  // namespace extremodep
