#include "extremodep/tail.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "extremodep/rng.hpp"

namespace extremodep {

namespace {

constexpr int kNodes = 512;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_x(const Vec& x, std::size_t d, const char* who) {
  if (x.size() != d) throw std::invalid_argument(std::string(who) + ": wrong dimension");
  for (double v : x)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": x must be finite and nonnegative");
}

// 2 int op(x1 w, x2 (1-w)) h(w) dw over (0,1), split at the kink. Bernstein
// densities are polynomials, so Gauss-Legendre is exact; other densities use
// tanh-sinh, which copes with heavy endpoint behaviour.
double bivariate_integral(double x1, double x2, const std::function<double(double)>& h, bool use_max,
                          bool polynomial) {
  const double s = x1 + x2;
  if (s == 0.0) return 0.0;
  const double kink = x2 / s;
  auto f = [&](double w) {
    if (!polynomial && (w < 1e-15 || w > 1.0 - 1e-15)) return 0.0;
    const double a = x1 * w, b = x2 * (1.0 - w);
    return (use_max ? std::max(a, b) : std::min(a, b)) * h(w);
  };
  auto piece = [&](double a, double b) {
    if (polynomial) return integrate(f, a, b, kNodes);
    thread_local boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate(f, a, b, 1e-12);
  };
  double v = 0.0;
  if (kink > 0.0) v += piece(0.0, kink);
  if (kink < 1.0) v += piece(kink, 1.0);
  return 2.0 * v;
}

std::function<double(double)> parametric_h(const ParametricAngularModel& m) {
  if (m.dim != 2) throw std::invalid_argument("tail functions: parametric models are supported for d = 2 only");
  validate(m);
  return [m](double w) { return angular_density(m, {w, 1.0 - w}); };
}

// Cumulative weights of the mixture 0 | 1 | Beta(j+1, kappa-1-j).
struct AngularSampler {
  BernsteinAngular m;
  Vec cum;  // p0, p0+p1, then one entry per Beta component

  explicit AngularSampler(const BernsteinAngular& mm) : m(mm) {
    validate(m);
    cum.push_back(m.p0());
    cum.push_back(m.p0() + m.p1());
    for (int j = 0; j + 2 <= m.kappa; ++j) cum.push_back(cum.back() + (m.eta[j + 1] - m.eta[j]));
  }

  double draw(Rng& rng) const {
    const double u = rng.uniform() * cum.back();
    const std::size_t c = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (c == 0) return 0.0;
    if (c == 1) return 1.0;
    const std::size_t j = std::min(c - 2, cum.size() - 3);
    return rng.beta(j + 1.0, m.kappa - 1.0 - static_cast<double>(j));
  }
};

double frechet_to_data(double z, const GevParams& p) {
  if (z > 0.0) return from_frechet(z, p);
  if (p.gamma > kGumbelEps) return p.mu - p.sigma / p.gamma;
  return -std::numeric_limits<double>::infinity();
}

// int_t^1 w h(w) dw
double upper_first_moment(const BernsteinAngular& m, double t) {
  const int k = m.kappa;
  double s = 0.0;
  for (int j = 0; j + 2 <= k; ++j) {
    const double d = m.eta[j + 1] - m.eta[j];
    if (d == 0.0) continue;
    s += d * (j + 1.0) / k * boost::math::ibetac(j + 2.0, k - 1.0 - j, t);
  }
  return s;
}

double conditional_cdf_with(const BernsteinAngular& m, const BernsteinPickands& A, double z1, double z2) {
  if (z2 <= 0.0) return 0.0;
  if (std::isinf(z2)) return 1.0;
  const double t = z1 / (z1 + z2);
  const double V = (1.0 / z1 + 1.0 / z2) * A.at(t);
  const double c = std::exp(-V + 1.0 / z1) * 2.0 * (upper_first_moment(m, t) + m.p1());
  return std::clamp(c, 0.0, 1.0);
}

void check_threshold_grid(const Vec& g, const char* name) {
  if (g.empty()) throw std::invalid_argument(std::string("failure_probability: empty ") + name + " grid");
  for (double v : g)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string("failure_probability: non-finite ") + name);
}

double frechet_threshold(double u, const GevParams& p) {
  try {
    return to_frechet(u, p);
  } catch (const std::domain_error&) {
    throw std::invalid_argument("failure_probability: threshold outside the GEV support");
  }
}

void fill_cell(FailureCell& cell, FailureKind kind, double n_or, double n_and, int N) {
  const double n = N;
  auto se = [n](double p) { return std::sqrt(p * (1.0 - p) / n); };
  cell.p_or = cell.se_or = cell.p_and = cell.se_and = kNaN;
  if (kind != FailureKind::and_) {
    cell.p_or = n_or / n;
    cell.se_or = se(cell.p_or);
  }
  if (kind != FailureKind::or_) {
    cell.p_and = n_and / n;
    cell.se_and = se(cell.p_and);
  }
}

template <class Dep>
double joint_tail_impl(const Vec& q, const Dep& dep, TailKind kind, std::vector<std::string>* warnings) {
  for (double v : q)
    if (v > 0.1 && warnings) {
      warnings->push_back("joint_tail_probability: marginal probability above 0.1, the tail approximation may be poor");
      break;
    }
  return kind == TailKind::or_ ? stable_tail_L(q, dep) : tail_copula_R(q, dep);
}

}  // namespace

double stable_tail_L(const Vec& x, const BernsteinAngular& m) {
  check_x(x, 2, "stable_tail_L");
  validate(m);
  const double cont = bivariate_integral(x[0], x[1], [&](double w) { return h_density(w, m); }, true, true);
  return cont + 2.0 * (m.p0() * x[1] + m.p1() * x[0]);
}

double stable_tail_L(const Vec& x, const ParametricAngularModel& m) {
  check_x(x, 2, "stable_tail_L");
  return bivariate_integral(x[0], x[1], parametric_h(m), true, false);
}

double stable_tail_L(const Vec& x, const BernsteinPickands& A) {
  check_x(x, static_cast<std::size_t>(A.dim()), "stable_tail_L");
  double s = 0.0;
  for (double v : x) s += v;
  if (s == 0.0) return 0.0;
  Vec t(x.begin() + 1, x.end());
  for (double& v : t) v /= s;
  return s * A(t);
}

double stable_tail_L(const Vec& x, const AngularDensity1d& m) {
  check_x(x, 2, "stable_tail_L");
  return bivariate_integral(x[0], x[1], m.h, true, false) + 2.0 * (m.p0 * x[1] + m.p1 * x[0]);
}

double tail_copula_R(const Vec& x, const AngularDensity1d& m) {
  check_x(x, 2, "tail_copula_R");
  return bivariate_integral(x[0], x[1], m.h, false, false);
}

double tail_copula_R(const Vec& x, const BernsteinAngular& m) {
  check_x(x, 2, "tail_copula_R");
  validate(m);
  return bivariate_integral(x[0], x[1], [&](double w) { return h_density(w, m); }, false, true);
}

double tail_copula_R(const Vec& x, const ParametricAngularModel& m) {
  check_x(x, 2, "tail_copula_R");
  return bivariate_integral(x[0], x[1], parametric_h(m), false, false);
}

double tail_copula_R(const Vec& x, const BernsteinPickands& A) {
  const std::size_t d = static_cast<std::size_t>(A.dim());
  check_x(x, d, "tail_copula_R");
  if (d > 20) throw std::invalid_argument("tail_copula_R: dimension too large for inclusion-exclusion");
  double r = 0.0;
  for (unsigned mask = 1; mask < (1u << d); ++mask) {
    Vec xs(d, 0.0);
    int bits = 0;
    for (std::size_t j = 0; j < d; ++j)
      if (mask & (1u << j)) {
        xs[j] = x[j];
        ++bits;
      }
    r += (bits % 2 ? 1.0 : -1.0) * stable_tail_L(xs, A);
  }
  return std::max(0.0, r);
}

double joint_tail_probability(const Vec& q, const BernsteinAngular& m, TailKind kind, std::vector<std::string>* w) {
  return joint_tail_impl(q, m, kind, w);
}
double joint_tail_probability(const Vec& q, const ParametricAngularModel& m, TailKind kind,
                              std::vector<std::string>* w) {
  return joint_tail_impl(q, m, kind, w);
}
double joint_tail_probability(const Vec& q, const BernsteinPickands& A, TailKind kind, std::vector<std::string>* w) {
  return joint_tail_impl(q, A, kind, w);
}
double joint_tail_probability(const Vec& q, const AngularDensity1d& m, TailKind kind, std::vector<std::string>* w) {
  return joint_tail_impl(q, m, kind, w);
}

std::optional<double> solve_return_level(const std::function<double(double)>& R, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("solve_return_level: p must be in (0,1)");
  // R <= 1/z, so the answer is at most 1/p
  const double hi = 1.0 / p;
  if (R(hi) >= p) return hi;
  double lo = hi;
  int steps = 0;
  while (R(lo) < p) {
    lo *= 0.5;
    if (++steps > 1000) return std::nullopt;
  }
  double a = std::log(lo), b = std::log(hi);
  for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
    const double mid = 0.5 * (a + b);
    (R(std::exp(mid)) >= p ? a : b) = mid;
  }
  return std::exp(0.5 * (a + b));
}

std::optional<double> solve_return_level(const BernsteinAngular& m, double z_fixed, double p, int free_index) {
  if (free_index != 0 && free_index != 1) throw std::invalid_argument("solve_return_level: free_index must be 0 or 1");
  if (!(z_fixed > 0.0) || std::isinf(z_fixed)) return std::nullopt;
  return solve_return_level(
      [&](double z) { return free_index == 0 ? bernstein_exceedance(m, z, z_fixed) : bernstein_exceedance(m, z_fixed, z); },
      p);
}

ReturnLevelCurve joint_return_level(const PosteriorChain& c, int burn, const Vec& p_grid,
                                    const std::array<std::optional<double>, 2>& fixed, double cred) {
  if (fixed[0].has_value() == fixed[1].has_value())
    throw std::invalid_argument("joint_return_level: exactly one component must be free");
  if (burn < 0 || burn >= static_cast<int>(c.records.size()))
    throw std::invalid_argument("joint_return_level: burn must be below the chain length");
  if (!(cred >= 0.0 && cred < 1.0)) throw std::invalid_argument("joint_return_level: cred must be in [0,1)");
  ReturnLevelCurve out;
  out.free_index = fixed[0].has_value() ? 1 : 0;
  const int fi = 1 - out.free_index;
  const double x_fixed = *fixed[fi];
  out.p = p_grid;
  const double lo_q = (1.0 - cred) / 2.0;
  for (double p : p_grid) {
    Vec levels;
    int unsolved = 0;
    for (std::size_t r = burn; r < c.records.size(); ++r) {
      const auto& rec = c.records[r];
      const GevParams mf = margin_of(fi == 0 ? rec.mar1 : rec.mar2);
      const GevParams mv = margin_of(out.free_index == 0 ? rec.mar1 : rec.mar2);
      const auto z = solve_return_level(angular_of(rec), to_frechet_clamped(x_fixed, mf), p, out.free_index);
      if (!z) {
        ++unsolved;
        continue;
      }
      levels.push_back(from_frechet(*z, mv));
    }
    out.unsolved.push_back(unsolved);
    if (levels.empty()) {
      out.mean.push_back(kNaN);
      out.lower.push_back(kNaN);
      out.upper.push_back(kNaN);
      continue;
    }
    out.mean.push_back(mean(levels));
    out.lower.push_back(quantile(levels, lo_q));
    out.upper.push_back(quantile(levels, 1.0 - lo_q));
  }
  for (std::size_t i = 0; i < p_grid.size(); ++i)
    if (out.unsolved[i] > 0)
      out.warnings.push_back("joint_return_level: p = " + std::to_string(p_grid[i]) + " not attainable for " +
                             std::to_string(out.unsolved[i]) + " posterior draws");
  return out;
}

Vec sample_angular(const BernsteinAngular& m, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample_angular: n must be nonnegative");
  const AngularSampler s(m);
  Rng rng(seed);
  Vec out(n);
  for (double& w : out) w = s.draw(rng);
  return out;
}

double conditional_cdf(const BernsteinAngular& m, double z1, double z2) {
  validate(m);
  if (!(z1 > 0.0) || std::isinf(z1)) throw std::invalid_argument("conditional_cdf: z1 must be positive and finite");
  return conditional_cdf_with(m, pickands_from_eta(m), z1, z2);
}

BivariateSample sample_bivariate(const BernsteinAngular& m, int n, std::uint64_t seed,
                                 const BivariateSampleOptions& opt) {
  if (n < 0) throw std::invalid_argument("sample_bivariate: n must be nonnegative");
  const AngularSampler sampler(m);
  Rng rng(seed);
  BivariateSample out;
  out.values.reserve(n);
  auto emit = [&](double z1, double z2) {
    if (opt.margins)
      out.values.push_back({frechet_to_data(z1, (*opt.margins)[0]), frechet_to_data(z2, (*opt.margins)[1])});
    else
      out.values.push_back({z1, z2});
  };

  if (opt.kind == SampleKind::maxima) {
    const BernsteinPickands A = pickands_from_eta(m);
    for (int i = 0; i < n; ++i) {
      const double z1 = 1.0 / rng.exponential();
      const double u = rng.uniform();
      // bracket then bisect on log z2
      double lo = z1, hi = z1;
      while (conditional_cdf_with(m, A, z1, lo) >= u && lo > 1e-300) lo *= 0.5;
      while (conditional_cdf_with(m, A, z1, hi) < u && hi < 1e300) hi *= 2.0;
      double a = std::log(lo), b = std::log(hi);
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (a + b);
        (conditional_cdf_with(m, A, z1, std::exp(mid)) < u ? a : b) = mid;
      }
      emit(z1, std::exp(0.5 * (a + b)));
    }
    out.tries = static_cast<std::uint64_t>(n);
    return out;
  }

  if (!opt.threshold) throw std::invalid_argument("sample_bivariate: exceedances need a threshold");
  std::array<double, 2> us{};
  for (int j = 0; j < 2; ++j) {
    const double u = (*opt.threshold)[j];
    if (opt.margins) {
      const GevParams& g = (*opt.margins)[j];
      if (!(u > gev_quantile(0.5, g))) throw std::invalid_argument("sample_bivariate: threshold below the marginal median");
      us[j] = to_frechet(u, g);
    } else {
      if (!(u > 1.0 / std::log(2.0))) throw std::invalid_argument("sample_bivariate: threshold below the marginal median");
      us[j] = u;
    }
  }
  const bool want_or = opt.exceed_type == TailKind::or_;
  std::uint64_t tries = 0;
  while (static_cast<int>(out.values.size()) < n) {
    if (tries >= opt.max_tries) throw std::runtime_error("sample_bivariate: maximum number of tries reached");
    if (tries >= 1000000 && static_cast<double>(out.values.size()) < 1e-5 * static_cast<double>(tries))
      throw std::runtime_error("sample_bivariate: acceptance rate below 1e-5");
    ++tries;
    const double w = sampler.draw(rng);
    const double r = 1.0 / rng.uniform();
    const double z1 = 2.0 * r * w, z2 = 2.0 * r * (1.0 - w);
    const bool e1 = z1 > us[0], e2 = z2 > us[1];
    if (want_or ? (e1 || e2) : (e1 && e2)) emit(z1, z2);
  }
  out.tries = tries;
  out.acceptance = tries ? static_cast<double>(n) / static_cast<double>(tries) : 1.0;
  return out;
}

FailureGrid failure_probability(const BernsteinAngular& m, const std::array<GevParams, 2>& margins, const Vec& u1_grid,
                                const Vec& u2_grid, FailureKind kind, int N, std::uint64_t seed, int threads) {
  if (N < 1000) throw std::invalid_argument("failure_probability: N must be at least 1000");
  check_threshold_grid(u1_grid, "u1");
  check_threshold_grid(u2_grid, "u2");
  Vec s1, s2;
  for (double u : u1_grid) s1.push_back(frechet_threshold(u, margins[0]));
  for (double u : u2_grid) s2.push_back(frechet_threshold(u, margins[1]));

  const AngularSampler sampler(m);
  Rng rng(seed);
  Vec z1(N), z2(N);
  for (int i = 0; i < N; ++i) {
    const double w = sampler.draw(rng);
    const double r = 1.0 / rng.uniform();
    z1[i] = 2.0 * r * w;
    z2[i] = 2.0 * r * (1.0 - w);
  }

  FailureGrid g;
  g.u1 = u1_grid;
  g.u2 = u2_grid;
  g.n = N;
  g.cells.resize(u1_grid.size() * u2_grid.size());
  parallel_for(g.cells.size(), threads, [&](std::size_t c) {
    const std::size_t a = c / u2_grid.size(), b = c % u2_grid.size();
    double n_or = 0, n_and = 0;
    for (int i = 0; i < N; ++i) {
      const bool e1 = z1[i] > s1[a], e2 = z2[i] > s2[b];
      n_or += e1 || e2;
      n_and += e1 && e2;
    }
    g.cells[c].u1 = u1_grid[a];
    g.cells[c].u2 = u2_grid[b];
    fill_cell(g.cells[c], kind, n_or, n_and, N);
  });
  return g;
}

FailureGrid failure_probability_posterior(const PosteriorChain& c, int burn, const Vec& u1_grid, const Vec& u2_grid,
                                          FailureKind kind, int N, std::uint64_t seed, int threads) {
  if (N < 1000) throw std::invalid_argument("failure_probability: N must be at least 1000");
  if (burn < 0 || burn >= static_cast<int>(c.records.size()))
    throw std::invalid_argument("failure_probability: burn must be below the chain length");
  check_threshold_grid(u1_grid, "u1");
  check_threshold_grid(u2_grid, "u2");
  const std::size_t M = c.records.size() - burn;
  std::vector<AngularSampler> samplers;
  samplers.reserve(M);
  for (std::size_t r = 0; r < M; ++r) samplers.emplace_back(angular_of(c.records[burn + r]));
  // thresholds per draw; clamped so that support edges give 0 or +inf
  std::vector<Vec> s1(u1_grid.size(), Vec(M)), s2(u2_grid.size(), Vec(M));
  for (std::size_t r = 0; r < M; ++r) {
    const auto& rec = c.records[burn + r];
    for (std::size_t a = 0; a < u1_grid.size(); ++a) s1[a][r] = to_frechet_clamped(u1_grid[a], margin_of(rec.mar1));
    for (std::size_t b = 0; b < u2_grid.size(); ++b) s2[b][r] = to_frechet_clamped(u2_grid[b], margin_of(rec.mar2));
  }

  Rng rng(seed);
  std::vector<std::size_t> draw(N);
  Vec z1(N), z2(N);
  for (int i = 0; i < N; ++i) {
    draw[i] = rng.below(M);
    const double w = samplers[draw[i]].draw(rng);
    const double r = 1.0 / rng.uniform();
    z1[i] = 2.0 * r * w;
    z2[i] = 2.0 * r * (1.0 - w);
  }

  FailureGrid g;
  g.u1 = u1_grid;
  g.u2 = u2_grid;
  g.n = N;
  g.cells.resize(u1_grid.size() * u2_grid.size());
  parallel_for(g.cells.size(), threads, [&](std::size_t cidx) {
    const std::size_t a = cidx / u2_grid.size(), b = cidx % u2_grid.size();
    double n_or = 0, n_and = 0;
    for (int i = 0; i < N; ++i) {
      const bool e1 = z1[i] > s1[a][draw[i]], e2 = z2[i] > s2[b][draw[i]];
      n_or += e1 || e2;
      n_and += e1 && e2;
    }
    g.cells[cidx].u1 = u1_grid[a];
    g.cells[cidx].u2 = u2_grid[b];
    fill_cell(g.cells[cidx], kind, n_or, n_and, N);
  });
  return g;
}

}  // namespace extremodep
