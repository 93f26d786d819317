#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "extremodep/bernstein.hpp"
#include "extremodep/numerics.hpp"

namespace extremodep {

struct SiteSet {
  std::vector<std::array<double, 2>> coords;  // planar units
  bool center = false;                         // subtract the coordinate mean on use (distances unchanged)
};

// Throws std::invalid_argument on non-finite coordinates; returns one warning
// per pair of duplicated sites.
std::vector<std::string> validate(const SiteSet& s);

struct PowExpCorr {
  double range = 1.0;   // r > 0
  double smooth = 1.0;  // eta in (0, 2]
};

// exp(-(h/r)^eta)
double powexp_corr(double h, const PowExpCorr& c);

struct MaxStableField {
  Matrix vals;                         // Ny x d, unit-Frechet margins
  std::vector<std::vector<int>> hits;  // Ny x d, labels 1, 2, ... per replicate
  std::uint64_t tries = 0;             // replicates simulated
  double acceptance = 1.0;
  std::vector<std::string> warnings;
};

// E[max(0, W)^nu] for W ~ N(0,1): 2^(nu/2 - 1) Gamma((nu+1)/2) / sqrt(pi).
double extremal_t_moment(double nu);

// Truncated spectral construction: vals(s) = max_{i <= M} zeta_i max(0, W_i(s))^nu / c_nu
// with zeta_i = 1 / (E_1 + ... + E_i) and W_i Gaussian fields with correlation corr.
// hits(s) is the index of the maximizing term, relabeled 1, 2, ... in site order.
MaxStableField sim_extremal_t(const SiteSet& sites, double nu, const PowExpCorr& corr, int Ny, int M,
                              std::uint64_t seed, int threads = 1);

// Keeps replicates whose hits use at most max_events distinct labels.
MaxStableField conditional_sim(const SiteSet& sites, double nu, const PowExpCorr& corr, int Ny, int max_events,
                               std::uint64_t seed, std::uint64_t max_tries, int M = 10000, int threads = 1);

// Largest relative change of the per-site 0.9-quantile between truncations M and 2M
// (same seed).
double truncation_check(const SiteSet& sites, double nu, const PowExpCorr& corr, int Ny, int M, std::uint64_t seed,
                        int threads = 1);

struct DistanceCoefficient {
  int i = 0, j = 0;
  double distance = 0.0;
  double eta = 0.0;       // madogram estimate clipped to [1, 2]
  double eta_proj = 0.0;  // after the Bernstein projection
};

std::vector<DistanceCoefficient> extcoeff_vs_distance(const MaxStableField& field, const SiteSet& sites,
                                                      int threads = 1);

}  // namespace extremodep
