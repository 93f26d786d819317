#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "extremodep/bayes_np.hpp"
#include "extremodep/gev.hpp"

namespace extremodep {

using Density = std::function<double(double)>;

// (2 w^(1-g1) (1-w)^(1-g2) h(w) / (g1 g2))^(-1/(1+g1+g2)); +inf where h(w) = 0.
double q_star(double w, const std::array<double, 2>& gamma, const Density& h);
// xi(S) = 2 int q_star h over (0,1), 512 Gauss-Legendre nodes. Throws
// std::domain_error when the value is not finite.
double xi_S(const std::array<double, 2>& gamma, const Density& h);
// Continuous part of a Bernstein angular measure; warns when p0 + p1 > 0.1.
double xi_S(const std::array<double, 2>& gamma, const BernsteinAngular& m, std::vector<std::string>* warnings = nullptr);

// w in {0.005, 0.015, ..., 0.995}
Vec region_w_grid();

// S = {x : r >= 1/q_star(w)}; boundary points (w, 1-w) / q_star(w).
struct BasicSet {
  Vec w;
  Vec q;         // q_star on the grid
  Matrix boundary;  // 100 x 2
  double xi = 0.0;
};

BasicSet basic_set(const std::array<double, 2>& gamma, const Density& h);

struct QuantileRegion {
  double p = 0.0;
  std::array<Matrix, 3> boundary;  // lower, mean, upper; 100 x 2 in data units
  // Plug-in region used by contains(): posterior-mean margins and mean boundary
  // radius on the unit-Frechet scale of those margins.
  std::array<GevParams, 2> margins{};
  Vec radius;
  bool contains(const std::array<double, 2>& y) const;
};

struct QuantileRegionSet {
  Vec w;
  double cred = 0.9;
  int k = 0, N = 0;
  std::array<Vec, 3> ghat;          // q_star: lower, mean, upper
  std::array<Matrix, 3> shat;       // basic set boundary
  std::array<double, 3> nu_shat{};  // xi(S)
  std::vector<QuantileRegion> regions;
  int used = 0, skipped = 0;
  std::vector<std::string> warnings;
};

// Per post-burn draw: q_star, S and xi(S), then
// y_j = mu_j + sigma_j ((k xi x_j / (N p))^gamma_j - 1) / gamma_j with the
// draw's GEV parameters. Draws with a nonpositive gamma are skipped.
QuantileRegionSet quantile_regions(const PosteriorChain& c, int burn, const Vec& p, int k, int N, double cred = 0.9);

}  // namespace extremodep
