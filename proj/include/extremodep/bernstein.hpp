#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "extremodep/numerics.hpp"

namespace extremodep {

// Points t of R = {t in [0,1]^(d-1) : sum t <= 1}.
struct SimplexGrid {
  int dim = 2;
  int subdivisions = 0;  // lattice step is 1/subdivisions
  std::vector<Vec> points;
  std::size_t size() const { return points.size(); }
};

// Regular lattice {i/m : sum <= 1}. m = 0 picks the default: 100 for d = 2,
// otherwise the multiple of d whose lattice size is closest to 500. m must be a
// multiple of d so that the barycenter is a lattice point.
SimplexGrid make_simplex_grid(int d, int subdivisions = 0);

// Full weight vector (1 - sum t, t_1, ..., t_{d-1}); throws if t is outside R.
Vec full_weights(const Vec& t);
// Lower bound of (C3): max of the full weights.
double pickands_lower_bound(const Vec& t);

using MultiIndex = std::vector<int>;
// Gamma_kappa: all alpha in N^d with sum kappa, alpha_1 varying slowest.
// For d = 2 the j-th index is (j, kappa - j).
std::vector<MultiIndex> multi_indices(int d, int kappa);
// kappa!/prod(alpha!) prod_{j<d} t_j^alpha_j (1 - sum t)^alpha_d
double bernstein_basis(const Vec& t, const MultiIndex& alpha, int kappa);

class BernsteinPickands {
 public:
  BernsteinPickands(int dim, int kappa, Vec beta);
  int dim() const { return dim_; }
  int kappa() const { return kappa_; }
  const Vec& beta() const { return beta_; }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  double operator()(const Vec& t) const;
  // Bivariate helpers.
  double at(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;

 private:
  int dim_;
  int kappa_;
  Vec beta_;
  std::vector<MultiIndex> indices_;
};

// Largest violation of max(tau) <= A <= 1 over the grid, and for d = 2 of
// beta_0 = beta_kappa = 1 and nonnegative second differences. 0 when valid.
double pickands_violation(const BernsteinPickands& A, const SimplexGrid& grid);

// Madogram estimate of A at each grid point, using empirical margins rank/(k+1).
Vec madogram_pickands(const Matrix& data, const SimplexGrid& grid);

// (1/U) sum_u (A(t_u) - Ahat_u)^2
double beed_objective(const Vec& beta, const Vec& Ahat, const SimplexGrid& grid, int kappa);
double beed_objective(const BernsteinPickands& A, const Vec& Ahat, const SimplexGrid& grid);

// Constrained least-squares Bernstein projection of a pilot estimate.
BernsteinPickands beed_project(const Vec& Ahat, const SimplexGrid& grid, int kappa);

// d * A(1/d, ..., 1/d)
double extremal_coefficient(const BernsteinPickands& A);
double extremal_coefficient(const std::function<double(const Vec&)>& A, int d);

enum class CoordKind { lonlat, euclidean };
// Haversine distance in km on a sphere of radius 6371 km.
double great_circle_km(double lon1, double lat1, double lon2, double lat2);

struct PairCoefficient {
  int i = 0;
  int j = 0;
  double distance = 0.0;
  double eta_raw = 0.0;   // 2 Ahat(1/2) from the madogram
  double eta_proj = 0.0;  // 2 Atilde(1/2) after projection
  bool duplicate_coords = false;
};

struct PairwiseResult {
  std::vector<PairCoefficient> pairs;
  std::vector<std::string> warnings;
};

// Rows with a missing value in either column are dropped pair by pair.
PairwiseResult pairwise_extremal_coeffs(const Matrix& data, const std::vector<std::array<double, 2>>& coords,
                                        CoordKind kind, int kappa = 10, int threads = 1);

// nu_ij = (1/(2k)) sum |F_i - F_j|, the F-madogram of columns i and j.
Matrix madogram_dissimilarity(const Matrix& data, int threads = 1);

struct PamResult {
  std::vector<int> labels;   // 0..K-1, in the order of `medoids`
  std::vector<int> medoids;  // column indices, ascending
  double cost = 0.0;
  Vec cost_history;  // after BUILD, then after each accepted swap
};

PamResult pam_cluster(const Matrix& dissimilarity, int K, std::uint64_t seed);
PamResult pam_cluster_madogram(const Matrix& data, int K, std::uint64_t seed, int threads = 1);

}  // namespace extremodep
