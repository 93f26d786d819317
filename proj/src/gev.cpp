#include "extremodep/gev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace extremodep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void validate(const GevParams& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.mu) || !std::isfinite(p.gamma))
    throw std::invalid_argument("GEV parameters must be finite with sigma > 0");
}

double gev_cdf(double x, const GevParams& p) {
  validate(p);
  if (std::isnan(x)) throw std::invalid_argument("gev_cdf: x is NaN");
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  const double s = (x - p.mu) / p.sigma;
  if (std::abs(p.gamma) < kGumbelEps) return std::exp(-std::exp(-s));
  const double z = 1.0 + p.gamma * s;
  if (z <= 0.0) return p.gamma > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::pow(z, -1.0 / p.gamma));
}

double gev_logpdf(double x, const GevParams& p) {
  const double s = (x - p.mu) / p.sigma;
  if (std::abs(p.gamma) < kGumbelEps) return -std::log(p.sigma) - s - std::exp(-s);
  const double z = 1.0 + p.gamma * s;
  if (z <= 0.0) return -kInf;
  const double lz = std::log(z);
  return -std::log(p.sigma) - (1.0 / p.gamma + 1.0) * lz - std::exp(-lz / p.gamma);
}

double gev_quantile(double q, const GevParams& p) {
  validate(p);
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("gev_quantile: q must lie in (0,1)");
  const double y = -std::log(q);
  if (std::abs(p.gamma) < kGumbelEps) return p.mu - p.sigma * std::log(y);
  return p.mu + p.sigma * (std::pow(y, -p.gamma) - 1.0) / p.gamma;
}

double gev_sample(double u, const GevParams& p) { return gev_quantile(u, p); }

double gev_loglik(const Vec& x, const GevParams& p) {
  if (!(p.sigma > 0.0)) return -kInf;
  double s = 0.0;
  for (double v : x) {
    const double l = gev_logpdf(v, p);
    if (!std::isfinite(l)) return -kInf;
    s += l;
  }
  return s;
}

double to_frechet(double x, const GevParams& p) {
  const double s = (x - p.mu) / p.sigma;
  if (std::abs(p.gamma) < kGumbelEps) return std::exp(s);
  const double z = 1.0 + p.gamma * s;
  if (z <= 0.0) throw std::domain_error("value outside the GEV support");
  return std::pow(z, 1.0 / p.gamma);
}

double to_frechet_clamped(double x, const GevParams& p) {
  const double s = (x - p.mu) / p.sigma;
  if (std::abs(p.gamma) < kGumbelEps) return std::exp(s);
  const double z = 1.0 + p.gamma * s;
  if (z <= 0.0) return p.gamma > 0.0 ? 0.0 : kInf;
  return std::pow(z, 1.0 / p.gamma);
}

double from_frechet(double z, const GevParams& p) {
  if (!(z > 0.0)) throw std::domain_error("from_frechet: z must be positive");
  if (std::abs(p.gamma) < kGumbelEps) return p.mu + p.sigma * std::log(z);
  return p.mu + p.sigma * (std::pow(z, p.gamma) - 1.0) / p.gamma;
}

GevFit gev_fit_mle(const Vec& x) {
  if (x.size() < 20) throw std::invalid_argument("gev_fit_mle: need at least 20 observations");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("gev_fit_mle: non-finite data");
  const double m = mean(x);
  const double sd = std::sqrt(variance(x));
  if (!(sd > 1e-12 * (1.0 + std::abs(m)))) throw std::invalid_argument("gev_fit_mle: degenerate (constant) data");

  auto negll = [&](const Vec& th) {
    const GevParams p{th[0], std::exp(th[1]), th[2]};
    return -gev_loglik(x, p);
  };

  // Gumbel moment start; shape chosen among a few values with finite likelihood.
  const double s0 = std::sqrt(6.0) * sd / M_PI;
  const double m0 = m - 0.5772156649 * s0;
  Vec best_start;
  double best_val = kInf;
  for (double g0 : {0.1, 0.0, -0.1}) {
    const Vec th{m0, std::log(s0), g0};
    const double v = negll(th);
    if (std::isfinite(v) && v < best_val) {
      best_val = v;
      best_start = th;
    }
  }
  if (best_start.empty()) throw std::runtime_error("gev_fit_mle: no finite starting value");

  const OptimResult r = minimize(negll, best_start, {0.5 * s0, 0.3, 0.1});
  if (!r.converged) throw std::runtime_error("gev_fit_mle: optimizer did not converge\n" + r.trace);

  GevFit fit;
  fit.params = {r.x[0], std::exp(r.x[1]), r.x[2]};
  fit.loglik = -r.value;
  fit.trace = r.trace;

  // observed information on the natural scale
  const Vec nat{fit.params.mu, fit.params.sigma, fit.params.gamma};
  auto negll_nat = [&](const Vec& th) { return -gev_loglik(x, {th[0], th[1], th[2]}); };
  const Vec h{1e-4 * fit.params.sigma, 1e-4 * fit.params.sigma, 1e-4};
  const auto info = numeric_hessian(negll_nat, nat, h);
  const auto cov = invert_spd(info);
  for (int i = 0; i < 3; ++i) fit.se[i] = std::sqrt(cov[i][i]);
  return fit;
}

Vec empirical_cdf(const Vec& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  Vec F(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double f = static_cast<double>(j + 1) / static_cast<double>(n + 1);
    for (std::size_t k = i; k <= j; ++k) F[idx[k]] = f;
    i = j + 1;
  }
  return F;
}

Matrix to_unit_frechet(const Matrix& data, FrechetMode mode, const std::vector<GevParams>* params) {
  if (data.empty()) return {};
  const std::size_t n = data.size();
  const std::size_t d = data.front().size();
  for (const auto& row : data)
    if (row.size() != d) throw std::invalid_argument("to_unit_frechet: ragged matrix");
  if (mode == FrechetMode::parametric && (params == nullptr || params->size() != d))
    throw std::invalid_argument("to_unit_frechet: parametric mode needs one GevParams per column");
  Matrix out(n, Vec(d));
  for (std::size_t j = 0; j < d; ++j) {
    if (mode == FrechetMode::empirical) {
      Vec col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = data[i][j];
      const Vec F = empirical_cdf(col);
      for (std::size_t i = 0; i < n; ++i) out[i][j] = 1.0 / (1.0 - F[i]);
    } else {
      const GevParams& p = (*params)[j];
      validate(p);
      for (std::size_t i = 0; i < n; ++i) out[i][j] = to_frechet(data[i][j], p);
    }
  }
  return out;
}

Vec block_maxima(const Vec& series, int block_size) {
  if (block_size < 1) throw std::invalid_argument("block_maxima: block_size must be >= 1");
  if (static_cast<std::size_t>(block_size) > series.size())
    throw std::invalid_argument("block_maxima: block_size exceeds series length");
  const std::size_t k = series.size() / static_cast<std::size_t>(block_size);
  Vec out(k);
  for (std::size_t b = 0; b < k; ++b) {
    const auto first = series.begin() + static_cast<std::ptrdiff_t>(b * block_size);
    out[b] = *std::max_element(first, first + block_size);
  }
  return out;
}

BlockMaximaSeries block_maxima(const Matrix& series, int block_size) {
  if (block_size < 1) throw std::invalid_argument("block_maxima: block_size must be >= 1");
  if (static_cast<std::size_t>(block_size) > series.size())
    throw std::invalid_argument("block_maxima: block_size exceeds series length");
  const std::size_t d = series.front().size();
  const std::size_t k = series.size() / static_cast<std::size_t>(block_size);
  BlockMaximaSeries out;
  out.block_size = block_size;
  out.source_length = static_cast<int>(k) * block_size;
  for (std::size_t b = 0; b < k; ++b) {
    Vec mx(d, -kInf);
    std::vector<bool> seen(d, false);
    for (int i = 0; i < block_size; ++i) {
      const Vec& row = series[b * block_size + i];
      if (row.size() != d) throw std::invalid_argument("block_maxima: ragged matrix");
      for (std::size_t j = 0; j < d; ++j) {
        if (std::isnan(row[j])) continue;
        seen[j] = true;
        mx[j] = std::max(mx[j], row[j]);
      }
    }
    if (std::all_of(seen.begin(), seen.end(), [](bool s) { return s; }))
      out.values.push_back(mx);
    else
      out.dropped_blocks.push_back(static_cast<int>(b));
  }
  if (out.values.empty()) throw std::invalid_argument("block_maxima: every block has missing components");
  return out;
}

}  // namespace extremodep
