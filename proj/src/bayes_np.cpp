#include "extremodep/bayes_np.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

namespace extremodep {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// Sum_j c_j x^j (1-x)^(n-j), binomials already folded into c. Horner in the
// ratio x/(1-x) or its inverse, whichever is at most one.
double bernstein_sum(const Vec& c, double x) {
  const int n = static_cast<int>(c.size()) - 1;
  if (n < 0) return 0.0;
  const double y = 1.0 - x;
  double s = 0.0;
  if (x <= 0.5) {
    const double q = x / y;
    for (int j = n; j >= 0; --j) s = s * q + c[j];
    return s * std::pow(y, n);
  }
  const double q = y / x;
  for (int j = 0; j <= n; ++j) s = s * q + c[j];
  return s * std::pow(x, n);
}

// Sum_j a_j C(n,j) x^j (1-x)^(n-j). Binomials are folded for small n and the
// terms are taken in log space otherwise.
double bernstein_poly(const Vec& a, double x) {
  const int n = static_cast<int>(a.size()) - 1;
  if (n < 0) return 0.0;
  if (n <= 60) {
    Vec c(n + 1);
    double b = 1.0;
    for (int j = 0; j <= n; ++j) {
      c[j] = a[j] * b;
      b = b * (n - j) / (j + 1);
    }
    return bernstein_sum(c, x);
  }
  if (x == 0.0) return a.front();
  if (x == 1.0) return a.back();
  const double lx = std::log(x), ly = std::log1p(-x), lg = std::lgamma(n + 1.0);
  double s = 0.0;
  for (int j = 0; j <= n; ++j) {
    if (a[j] == 0.0) continue;
    s += a[j] * std::exp(lg - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * lx + (n - j) * ly);
  }
  return s;
}

// A, A', A'' of a bivariate Bernstein Pickands function with folded binomials.
struct PickandsPoly {
  Vec c0, c1, c2;
  bool folded = true;
  explicit PickandsPoly(const Vec& beta) {
    const int k = static_cast<int>(beta.size()) - 1;
    folded = k <= 60;
    c0.resize(k + 1);
    c1.resize(k);
    c2.resize(k - 1);
    auto b = [&](int n, int j) { return folded ? binomial(n, j) : 1.0; };
    for (int j = 0; j <= k; ++j) c0[j] = beta[j] * b(k, j);
    for (int j = 0; j < k; ++j) c1[j] = k * (beta[j + 1] - beta[j]) * b(k - 1, j);
    for (int j = 0; j + 1 < k; ++j) c2[j] = k * (k - 1.0) * (beta[j + 2] - 2 * beta[j + 1] + beta[j]) * b(k - 2, j);
  }
  double eval(const Vec& c, double t) const { return folded ? bernstein_sum(c, t) : bernstein_poly(c, t); }
  double log_density(double z1, double z2) const {
    const double r = z1 + z2;
    const double t = z1 / r;
    const double A = eval(c0, t), A1 = eval(c1, t), A2 = eval(c2, t);
    const double V = (1.0 / z1 + 1.0 / z2) * A;
    // z1^2 z2^2 times the bracket; z1^2 z2^2 / r^3 = t^2 (1-t)^2 r
    const double br = (A - t * A1) * (A + (1 - t) * A1) + A2 * t * t * (1 - t) * (1 - t) * r;
    if (!(br > 0.0)) return kNegInf;
    return -V - 2.0 * std::log(z1) - 2.0 * std::log(z2) + std::log(br);
  }
};

// z and log dz/dy of one observation; false outside the support.
bool frechet_and_logjac(double y, const GevParams& p, double& z, double& lj) {
  const double x = (y - p.mu) / p.sigma;
  if (std::abs(p.gamma) < kGumbelEps) {
    z = std::exp(x);
    lj = -std::log(p.sigma) + x;
    return std::isfinite(z) && z > 0.0;
  }
  const double q = 1.0 + p.gamma * x;
  if (!(q > 0.0)) return false;
  const double lq = std::log(q);
  z = std::exp(lq / p.gamma);
  lj = -std::log(p.sigma) + (1.0 / p.gamma - 1.0) * lq;
  return std::isfinite(z) && z > 0.0;
}

double loglik_poly(const Matrix& y, const GevParams& m1, const GevParams& m2, const PickandsPoly& P) {
  if (!(m1.sigma > 0.0) || !(m2.sigma > 0.0)) return kNegInf;
  double s = 0.0;
  for (const auto& r : y) {
    double z1, z2, l1, l2;
    if (!frechet_and_logjac(r[0], m1, z1, l1) || !frechet_and_logjac(r[1], m2, z2, l2)) return kNegInf;
    const double ld = P.log_density(z1, z2);
    if (!std::isfinite(ld)) return kNegInf;
    s += ld + l1 + l2;
  }
  return s;
}

double marginal_loglik(const Vec& x, const GevParams& p) {
  if (!(p.sigma > 0.0)) return kNegInf;
  return gev_loglik(x, p);
}

GevParams to_params(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

std::array<double, 3> moment_start(const Vec& x) {
  const double sd = std::sqrt(variance(x));
  const double sigma = sd * std::sqrt(6.0) / std::numbers::pi;
  return {mean(x) - 0.5772156649015329 * sigma, sigma, 0.0};
}

// One adaptive random-walk step on a margin. Returns the acceptance probability.
double rw_step(std::array<double, 3>& theta, double& ll, AdaptiveState& ad, Rng& rng,
               const std::function<double(const std::array<double, 3>&)>& loglik, bool& accepted,
               bool& straight_reject) {
  const Eigen::Matrix3d cov = ad.tau() * ad.sigma();
  const Eigen::LLT<Eigen::Matrix3d> llt(cov);
  const Eigen::Vector3d zn(rng.normal(), rng.normal(), rng.normal());
  const Eigen::Vector3d step = llt.matrixL() * zn;
  std::array<double, 3> prop{theta[0] + step(0), theta[1] + step(1), theta[2] + step(2)};
  double pi = 0.0;
  accepted = false;
  straight_reject = !(prop[1] > 0.0);
  double llp = kNegInf;
  if (!straight_reject) {
    llp = loglik(prop);
    // prior 1/sigma
    const double lr = llp - ll + std::log(theta[1]) - std::log(prop[1]);
    pi = std::isfinite(lr) ? std::min(1.0, std::exp(lr)) : (lr > 0 ? 1.0 : 0.0);
  }
  const double u = rng.uniform();
  if (u < pi) {
    theta = prop;
    ll = llp;
    accepted = true;
  }
  ad.push(theta);
  ad.update_tau(pi);
  return pi;
}

std::string join_eta(const Vec& eta) {
  std::string s;
  char buf[40];
  for (std::size_t i = 0; i < eta.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", eta[i]);
    if (i) s += ';';
    s += buf;
  }
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate(const BernsteinAngular& m, double tol) {
  if (m.kappa < 3) throw std::invalid_argument("BernsteinAngular: kappa must be >= 3");
  if (static_cast<int>(m.eta.size()) != m.kappa) throw std::invalid_argument("BernsteinAngular: eta must have kappa entries");
  double s = 0.0;
  for (int j = 0; j < m.kappa; ++j) {
    if (!std::isfinite(m.eta[j])) throw std::invalid_argument("BernsteinAngular: non-finite eta");
    if (j > 0 && m.eta[j] < m.eta[j - 1] - tol) throw std::invalid_argument("BernsteinAngular: eta must be nondecreasing");
    s += m.eta[j];
  }
  if (m.eta.front() < -tol || m.eta.back() > 1.0 + tol) throw std::invalid_argument("BernsteinAngular: eta outside [0,1]");
  if (std::abs(s / m.kappa - 0.5) > tol) throw std::invalid_argument("BernsteinAngular: mean constraint violated");
}

double H_cdf(double w, const BernsteinAngular& m) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::domain_error("H_cdf: w outside [0,1]");
  if (w == 1.0) return 1.0;
  return bernstein_poly(m.eta, w);
}

double h_density(double w, const BernsteinAngular& m) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::domain_error("h_density: w outside [0,1]");
  Vec d(m.kappa - 1);
  for (int j = 0; j + 1 < m.kappa; ++j) d[j] = (m.kappa - 1) * (m.eta[j + 1] - m.eta[j]);
  return bernstein_poly(d, w);
}

BernsteinPickands pickands_from_eta(const BernsteinAngular& m) {
  const int k = m.kappa;
  Vec beta(k + 1);
  double cum = 0.0;
  for (int i = 0; i <= k; ++i) {
    beta[i] = 1.0 - static_cast<double>(i) / k + 2.0 * cum / k;
    if (i < k) cum += m.eta[i];
  }
  return BernsteinPickands(2, k, std::move(beta));
}

double log_density_frechet(double z1, double z2, const BernsteinPickands& A) {
  if (A.dim() != 2) throw std::invalid_argument("log_density_frechet: bivariate A required");
  if (!(z1 > 0.0 && z2 > 0.0)) return kNegInf;
  return PickandsPoly(A.beta()).log_density(z1, z2);
}

double bivariate_gev_loglik(const Matrix& y, const GevParams& m1, const GevParams& m2, const BernsteinPickands& A) {
  if (A.dim() != 2) throw std::invalid_argument("bivariate_gev_loglik: bivariate A required");
  return loglik_poly(y, m1, m2, PickandsPoly(A.beta()));
}

double log_kappa_prior(int kappa, const NpPriors& pr) {
  if (kappa < 3) return kNegInf;
  const double k = kappa - 3;
  if (pr.prior_k == KappaPrior::pois) return k * std::log(pr.k_mean) - pr.k_mean - std::lgamma(k + 1);
  if (!(pr.k_var > pr.k_mean)) throw std::invalid_argument("negative binomial prior needs variance > mean");
  const double p = pr.k_mean / pr.k_var;
  const double r = pr.k_mean * p / (1 - p);
  return std::lgamma(k + r) - std::lgamma(r) - std::lgamma(k + 1) + r * std::log(p) + k * std::log1p(-p);
}

BernsteinAngular draw_eta_prior(int kappa, const NpPriors& pr, Rng& rng) {
  if (kappa < 3) throw std::invalid_argument("draw_eta_prior: kappa must be >= 3");
  if (!(pr.p0_max >= 0.0 && pr.p0_max <= 0.5)) throw std::invalid_argument("draw_eta_prior: p0_max must lie in [0, 0.5]");
  const double k = kappa;
  const double p0 = rng.uniform(0.0, pr.p0_max);
  const double a = std::max(0.0, (k - 1) * p0 - k / 2 + 1);
  const double b = (p0 + k / 2 - 1) / (k - 1);
  const double p1 = b > a ? rng.uniform(a, b) : a;
  const double lo = p0, hi = 1.0 - p1;
  const double S = k / 2 - p0 - hi;
  BernsteinAngular m;
  m.kappa = kappa;
  m.eta.assign(kappa, 0.0);
  m.eta.front() = lo;
  m.eta.back() = hi;
  if (kappa == 3) {
    m.eta[1] = std::clamp(S, lo, hi);
    return m;
  }
  Vec x(kappa - 2);
  for (auto& v : x) v = rng.uniform(lo, hi);
  std::sort(x.begin(), x.end());
  double sum = 0.0, room_up = 0.0, room_down = 0.0;
  for (double v : x) {
    sum += v;
    room_up += hi - v;
    room_down += v - lo;
  }
  if (sum < S && room_up > 0) {
    const double lam = std::min(1.0, (S - sum) / room_up);
    for (auto& v : x) v += lam * (hi - v);
  } else if (sum > S && room_down > 0) {
    const double lam = std::min(1.0, (sum - S) / room_down);
    for (auto& v : x) v -= lam * (v - lo);
  }
  std::copy(x.begin(), x.end(), m.eta.begin() + 1);
  return m;
}

AdaptiveState::AdaptiveState(double tau0) : tau_(tau0) {
  if (!(tau0 > 0.0)) throw std::invalid_argument("AdaptiveState: tau0 must be positive");
}

double AdaptiveState::step_constant() {
  const double z0 = -boost::math::quantile(boost::math::normal(), kTarget / 2);
  return std::sqrt(2 * std::numbers::pi) * std::exp(z0 * z0 / 2) / (2 * z0);
}

void AdaptiveState::push(const std::array<double, 3>& theta) {
  ++s_;
  const Eigen::Vector3d x(theta[0], theta[1], theta[2]);
  const Eigen::Vector3d d0 = x - mean_;
  mean_ += d0 / s_;
  m2_ += d0 * (x - mean_).transpose();
  const double s = s_;
  if (s_ <= 100)
    sigma_ = (1.0 + tau_ * tau_ / s) * Eigen::Matrix3d::Identity();
  else
    sigma_ = m2_ / (s - 1.0) + (tau_ * tau_ / s) * Eigen::Matrix3d::Identity();
}

void AdaptiveState::update_tau(double accept_prob) {
  static const double c = step_constant();
  tau_ = std::exp(std::log(tau_) + c * (accept_prob - kTarget));
}

BernsteinAngular angular_of(const ChainRecord& r) { return {r.kappa, r.eta}; }

GevParams margin_of(const std::array<double, 3>& m) { return to_params(m); }

PosteriorChain joint_mcmc(const Matrix& data, const McmcConfig& cfg) {
  if (cfg.nsim < 1000) throw std::invalid_argument("joint_mcmc: nsim must be at least 1000");
  if (cfg.kappa0 < 3) throw std::invalid_argument("joint_mcmc: kappa0 must be >= 3");
  Matrix y;
  for (const auto& r : data) {
    if (r.size() != 2) throw std::invalid_argument("joint_mcmc: data must have two columns");
    if (std::isfinite(r[0]) && std::isfinite(r[1])) y.push_back(r);
  }
  if (y.size() < 2) throw std::invalid_argument("joint_mcmc: fewer than 2 finite rows");

  PosteriorChain chain;
  chain.config = cfg;
  chain.n_data = static_cast<int>(y.size());
  if (y.size() < 30) chain.warnings.push_back("fewer than 30 complete rows");

  Rng rng(cfg.seed);
  Vec x1(y.size()), x2(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    x1[i] = y[i][0];
    x2[i] = y[i][1];
  }

  std::array<double, 3> th1 = moment_start(x1), th2 = moment_start(x2);
  if (cfg.mar_prelim) {
    Rng prng = rng.split(1);
    auto prelim = [&](const Vec& x, std::array<double, 3>& th) {
      try {
        const GevFit f = gev_fit_mle(x);
        th = {f.params.mu, f.params.sigma, f.params.gamma};
      } catch (const std::exception& e) {
        chain.warnings.push_back(std::string("marginal MLE failed, using moment start: ") + e.what());
      }
      AdaptiveState ad(cfg.tau0);
      auto ll = [&](const std::array<double, 3>& t) { return marginal_loglik(x, to_params(t)); };
      double cur = ll(th);
      std::array<double, 3> acc{0, 0, 0};
      int n = 0;
      for (int it = 0; it < cfg.prelim_iter; ++it) {
        bool a, r;
        rw_step(th, cur, ad, prng, ll, a, r);
        if (it >= cfg.prelim_iter / 2) {
          for (int q = 0; q < 3; ++q) acc[q] += th[q];
          ++n;
        }
      }
      if (n > 0)
        for (int q = 0; q < 3; ++q) th[q] = acc[q] / n;
    };
    prelim(x1, th1);
    prelim(x2, th2);
  }

  BernsteinAngular dep = draw_eta_prior(cfg.kappa0, cfg.priors, rng);
  PickandsPoly poly(pickands_from_eta(dep).beta());
  auto full_ll = [&](const std::array<double, 3>& a, const std::array<double, 3>& b, const PickandsPoly& P) {
    return cfg.prior_only ? 0.0 : loglik_poly(y, to_params(a), to_params(b), P);
  };
  double ll = full_ll(th1, th2, poly);
  if (!std::isfinite(ll)) throw std::runtime_error("joint_mcmc: starting values have zero likelihood");

  AdaptiveState ad1(cfg.tau0), ad2(cfg.tau0);
  chain.records.reserve(cfg.nsim);
  int reject_run = 0;
  bool warned = false;

  for (int s = 0; s < cfg.nsim; ++s) {
    ChainRecord rec;
    if (!cfg.prior_only) {
      auto ll1 = [&](const std::array<double, 3>& t) { return full_ll(t, th2, poly); };
      rec.pi1 = rw_step(th1, ll, ad1, rng, ll1, rec.acc1, rec.reject1);
      auto ll2 = [&](const std::array<double, 3>& t) { return full_ll(th1, t, poly); };
      rec.pi2 = rw_step(th2, ll, ad2, rng, ll2, rec.acc2, rec.reject2);
    }

    const int k = dep.kappa;
    const int kp = (k == 3) ? 4 : (rng.uniform() < 0.5 ? k - 1 : k + 1);
    // q(k | k') / q(k' | k)
    double c = 1.0;
    if (k == 3) c = 0.5;
    if (k == 4 && kp == 3) c = 2.0;
    const BernsteinAngular prop = draw_eta_prior(kp, cfg.priors, rng);
    const PickandsPoly pp(pickands_from_eta(prop).beta());
    const double llp = full_ll(th1, th2, pp);
    const double lr = std::log(c) + log_kappa_prior(kp, cfg.priors) - log_kappa_prior(k, cfg.priors) + llp - ll;
    rec.pi3 = std::isfinite(lr) ? std::min(1.0, std::exp(lr)) : (lr > 0 ? 1.0 : 0.0);
    if (rng.uniform() < rec.pi3) {
      dep = prop;
      poly = pp;
      ll = llp;
      rec.acc3 = true;
      reject_run = 0;
    } else if (++reject_run >= 1000 && !warned) {
      chain.warnings.push_back("1000 consecutive dependence proposals rejected (iteration " + std::to_string(s + 1) + ")");
      warned = true;
    }

    rec.mar1 = th1;
    rec.mar2 = th2;
    rec.kappa = dep.kappa;
    rec.eta = dep.eta;
    rec.tau1 = ad1.tau();
    rec.tau2 = ad2.tau();
    chain.records.push_back(std::move(rec));
  }
  return chain;
}

ChainSummary chain_summary(const PosteriorChain& c, int burn, double cred) {
  if (burn < 0 || burn >= static_cast<int>(c.records.size()))
    throw std::invalid_argument("chain_summary: burn must be below the chain length");
  if (!(cred >= 0.0 && cred < 1.0)) throw std::invalid_argument("chain_summary: cred must lie in [0,1)");
  const std::size_t n = c.records.size() - burn;
  ChainSummary out;
  out.burn = burn;
  out.cred = cred;
  const int G = 100;
  for (int i = 0; i < G; ++i) {
    out.grid_A.push_back(static_cast<double>(i) / (G - 1));
    out.grid_h.push_back((i + 0.5) / G);
  }
  std::vector<Vec> av(G, Vec(n)), hv(G, Vec(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = c.records[burn + r];
    const BernsteinAngular m = angular_of(rec);
    const BernsteinPickands A = pickands_from_eta(m);
    for (int i = 0; i < G; ++i) {
      av[i][r] = A.at(out.grid_A[i]);
      hv[i][r] = h_density(out.grid_h[i], m);
    }
  }
  const double lo = (1.0 - cred) / 2, hi = 1.0 - lo;
  auto band = [&](const std::vector<Vec>& v, Band& b) {
    for (const auto& col : v) {
      b.mean.push_back(mean(col));
      b.lower.push_back(quantile(col, lo));
      b.upper.push_back(quantile(col, hi));
    }
  };
  band(av, out.A);
  band(hv, out.h);
  auto param = [&](const std::function<double(const ChainRecord&)>& f) {
    Vec v(n);
    for (std::size_t r = 0; r < n; ++r) v[r] = f(c.records[burn + r]);
    return ParamSummary{mean(v), quantile(v, lo), quantile(v, hi)};
  };
  out.p0 = param([](const ChainRecord& r) { return r.eta.front(); });
  out.p1 = param([](const ChainRecord& r) { return 1.0 - r.eta.back(); });
  out.kappa = param([](const ChainRecord& r) { return static_cast<double>(r.kappa); });
  for (int q = 0; q < 3; ++q) {
    out.mar1[q] = param([q](const ChainRecord& r) { return r.mar1[q]; });
    out.mar2[q] = param([q](const ChainRecord& r) { return r.mar2[q]; });
  }
  return out;
}

std::vector<DiagnosticRow> diagnostics(const PosteriorChain& c) {
  std::vector<DiagnosticRow> rows;
  rows.reserve(c.records.size());
  double s1 = 0, s2 = 0, s3 = 0;
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const auto& r = c.records[i];
    s1 += r.pi1;
    s2 += r.pi2;
    s3 += r.pi3;
    const double n = static_cast<double>(i + 1);
    rows.push_back({static_cast<int>(i + 1), r.tau1, r.tau2, r.kappa, s1 / n, s2 / n, s3 / n, AdaptiveState::kTarget});
  }
  return rows;
}

double bernstein_exceedance(const BernsteinAngular& m, double z1, double z2) {
  if (!(z1 > 0.0 && z2 > 0.0)) throw std::domain_error("bernstein_exceedance: z must be positive");
  if (std::isinf(z1) || std::isinf(z2)) return 0.0;
  const int k = m.kappa;
  const double v1 = z1 / (z1 + z2), v2 = z2 / (z1 + z2);
  double s = 0.0;
  for (int j = 0; j + 2 <= k; ++j) {
    const double d = m.eta[j + 1] - m.eta[j];
    if (d == 0.0) continue;
    const double b1 = boost::math::cdf(boost::math::beta_distribution<>(j + 2.0, k - j - 1.0), v1);
    const double b2 = boost::math::cdf(boost::math::beta_distribution<>(k - j - 0.0, j + 1.0), v2);
    s += d * ((j + 1) * b1 / z1 + (k - j - 1) * b2 / z2);
  }
  return 2.0 * s / k;
}

double predictive_exceedance(const PosteriorChain& c, int burn, const std::array<double, 2>& y_star) {
  if (burn < 0 || burn >= static_cast<int>(c.records.size()))
    throw std::invalid_argument("predictive_exceedance: burn must be below the chain length");
  double s = 0.0;
  std::size_t used = 0;
  for (std::size_t r = burn; r < c.records.size(); ++r) {
    const auto& rec = c.records[r];
    const double z1 = to_frechet_clamped(y_star[0], margin_of(rec.mar1));
    const double z2 = to_frechet_clamped(y_star[1], margin_of(rec.mar2));
    // below a lower endpoint the tail formula does not apply
    if (z1 == 0.0 || z2 == 0.0) continue;
    s += bernstein_exceedance(angular_of(rec), z1, z2);
    ++used;
  }
  if (used == 0) throw std::domain_error("predictive_exceedance: y_star is below the support of every posterior draw");
  return std::clamp(s / static_cast<double>(used), 0.0, 1.0);
}

void write_chain_csv(std::ostream& os, const PosteriorChain& c) {
  const auto& g = c.config;
  os << "extremodep-chain-v1\n";
  os << "# nsim=" << g.nsim << " seed=" << g.seed << " prior_k=" << (g.priors.prior_k == KappaPrior::nbinom ? "nbinom" : "pois")
     << " k_mean=" << fmt(g.priors.k_mean) << " k_var=" << fmt(g.priors.k_var) << " p0_max=" << fmt(g.priors.p0_max)
     << " mar_prelim=" << (g.mar_prelim ? 1 : 0) << " prelim_iter=" << g.prelim_iter << " kappa0=" << g.kappa0
     << " tau0=" << fmt(g.tau0) << " prior_only=" << (g.prior_only ? 1 : 0) << " n_data=" << c.n_data << "\n";
  os << "iter,mu1,sigma1,gamma1,mu2,sigma2,gamma2,kappa,eta,pi1,pi2,pi3,acc1,acc2,acc3,reject1,reject2,tau1,tau2\n";
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const auto& r = c.records[i];
    os << (i + 1);
    for (double v : r.mar1) os << ',' << fmt(v);
    for (double v : r.mar2) os << ',' << fmt(v);
    os << ',' << r.kappa << ',' << join_eta(r.eta) << ',' << fmt(r.pi1) << ',' << fmt(r.pi2) << ',' << fmt(r.pi3) << ','
       << r.acc1 << ',' << r.acc2 << ',' << r.acc3 << ',' << r.reject1 << ',' << r.reject2 << ',' << fmt(r.tau1) << ','
       << fmt(r.tau2) << '\n';
  }
}

namespace {

// std::stod throws on subnormal values, which the chain can legitimately hold.
double parse_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("read_chain_csv: bad number '" + s + "'");
  return v;
}

}  // namespace

PosteriorChain read_chain_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "extremodep-chain-v1")
    throw std::runtime_error("read_chain_csv: missing extremodep-chain-v1 header");
  PosteriorChain c;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw std::runtime_error("read_chain_csv: missing input echo");
  std::map<std::string, std::string> kv;
  {
    std::istringstream ss(line.substr(2));
    std::string tok;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  auto get = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::runtime_error(std::string("read_chain_csv: input echo lacks ") + k);
    return it->second;
  };
  auto& g = c.config;
  g.nsim = std::stoi(get("nsim"));
  g.seed = std::stoull(get("seed"));
  g.priors.prior_k = get("prior_k") == "pois" ? KappaPrior::pois : KappaPrior::nbinom;
  g.priors.k_mean = parse_real(get("k_mean"));
  g.priors.k_var = parse_real(get("k_var"));
  g.priors.p0_max = parse_real(get("p0_max"));
  g.mar_prelim = get("mar_prelim") == "1";
  g.prelim_iter = std::stoi(get("prelim_iter"));
  g.kappa0 = std::stoi(get("kappa0"));
  g.tau0 = parse_real(get("tau0"));
  g.prior_only = get("prior_only") == "1";
  c.n_data = std::stoi(get("n_data"));
  if (!std::getline(is, line) || line.rfind("iter,", 0) != 0) throw std::runtime_error("read_chain_csv: missing column header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 19) throw std::runtime_error("read_chain_csv: wrong number of fields on a record");
    ChainRecord r;
    for (int q = 0; q < 3; ++q) {
      r.mar1[q] = parse_real(f[1 + q]);
      r.mar2[q] = parse_real(f[4 + q]);
    }
    r.kappa = std::stoi(f[7]);
    std::stringstream es(f[8]);
    while (std::getline(es, cell, ';')) r.eta.push_back(parse_real(cell));
    if (static_cast<int>(r.eta.size()) != r.kappa) throw std::runtime_error("read_chain_csv: eta length differs from kappa");
    r.pi1 = parse_real(f[9]);
    r.pi2 = parse_real(f[10]);
    r.pi3 = parse_real(f[11]);
    r.acc1 = f[12] == "1";
    r.acc2 = f[13] == "1";
    r.acc3 = f[14] == "1";
    r.reject1 = f[15] == "1";
    r.reject2 = f[16] == "1";
    r.tau1 = parse_real(f[17]);
    r.tau2 = parse_real(f[18]);
    c.records.push_back(std::move(r));
  }
  if (static_cast<int>(c.records.size()) != g.nsim) throw std::runtime_error("read_chain_csv: record count differs from nsim");
  return c;
}

}  // namespace extremodep
