#pragma once

#include <array>
#include <string>
#include <vector>

#include "extremodep/numerics.hpp"

namespace extremodep {

struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double gamma = 0.0;
};

// |gamma| below this uses the Gumbel forms.
inline constexpr double kGumbelEps = 1e-8;

void validate(const GevParams& p);

double gev_cdf(double x, const GevParams& p);
double gev_logpdf(double x, const GevParams& p);  // -inf outside the support
double gev_quantile(double q, const GevParams& p);
double gev_sample(double u, const GevParams& p);  // quantile at uniform u
double gev_loglik(const Vec& x, const GevParams& p);

// Unit-Frechet value (1 + gamma (x - mu)/sigma)^(1/gamma); throws outside support.
double to_frechet(double x, const GevParams& p);
// Inverse of to_frechet.
double from_frechet(double z, const GevParams& p);
// Like to_frechet but returns 0 below the lower endpoint and +inf above the upper.
double to_frechet_clamped(double x, const GevParams& p);

struct GevFit {
  GevParams params;
  std::array<double, 3> se{};  // mu, sigma, gamma
  double loglik = 0.0;
  std::string trace;
};

GevFit gev_fit_mle(const Vec& x);

enum class FrechetMode { empirical, parametric };

// Columnwise transform to the unit-Frechet scale.
Matrix to_unit_frechet(const Matrix& data, FrechetMode mode,
                       const std::vector<GevParams>* params = nullptr);
// Empirical cdf values rank/(n+1) of one column (ties share the highest rank).
Vec empirical_cdf(const Vec& x);

Vec block_maxima(const Vec& series, int block_size);

struct BlockMaximaSeries {
  Matrix values;  // k x d
  int block_size = 0;
  int source_length = 0;
  std::vector<int> dropped_blocks;  // blocks with an all-missing component
};

// Missing raw values are NaN; a block whose column is entirely missing is dropped.
BlockMaximaSeries block_maxima(const Matrix& series, int block_size);

}  // namespace extremodep
