#include "extremodep/angular.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace extremodep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * M_PI);

int n_pairs(int d) { return d * (d - 1) / 2; }

// Evaluates log h for fixed parameters; the parameter-only work is done once.
class LogDensity {
 public:
  LogDensity(Family f, int d, const Vec& params) : f_(f), d_(d), p_(params) {
    valid_ = static_cast<int>(p_.size()) == param_count(f, d) && d >= 2;
    if (f == Family::PB && d < 3) valid_ = false;
    for (double v : p_)
      if (!(v > 0.0) || !std::isfinite(v)) valid_ = false;
    if (!valid_) return;
    if (f == Family::PB) {
      const double a = p_[0];
      const double dd = d;
      log_const_ = std::log(2.0) + std::lgamma(dd - 2.0) - std::log(dd * (dd - 1.0)) +
                   std::lgamma(a * dd + 1.0) - std::lgamma(2.0 * a + 1.0) - std::lgamma(a * (dd - 2.0));
    } else if (f == Family::TD) {
      const double sa = std::accumulate(p_.begin(), p_.end(), 0.0);
      log_const_ = std::lgamma(sa + 1.0) - std::log(static_cast<double>(d));
      for (double a : p_) log_const_ += std::log(a) - std::lgamma(a);
    } else {
      // variogram relative to component 0
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
      int k = 0;
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j, ++k) G(i, j) = G(j, i) = 4.0 * p_[k] * p_[k];
      Eigen::MatrixXd S(d - 1, d - 1);
      for (int i = 1; i < d; ++i)
        for (int j = 1; j < d; ++j) S(i - 1, j - 1) = 0.5 * (G(i, 0) + G(j, 0) - G(i, j));
      Eigen::LLT<Eigen::MatrixXd> llt(S);
      if (llt.info() != Eigen::Success) {
        valid_ = false;
        return;
      }
      L_ = llt.matrixL();
      half_g_.resize(d - 1);
      for (int i = 1; i < d; ++i) half_g_(i - 1) = 0.5 * G(i, 0);
      double logdet = 0.0;
      for (int i = 0; i < d - 1; ++i) logdet += 2.0 * std::log(L_(i, i));
      log_const_ = -0.5 * (d - 1) * kLog2Pi - 0.5 * logdet - std::log(static_cast<double>(d));
    }
  }

  bool valid() const { return valid_; }

  double operator()(const Vec& w) const {
    if (!valid_) return -kInf;
    switch (f_) {
      case Family::PB: return pb(w);
      case Family::TD: return td(w);
      case Family::HR: return hr(w);
    }
    return -kInf;
  }

 private:
  double pb(const Vec& w) const {
    const double a = p_[0];
    const double dd = d_;
    double acc = 0.0;
    int k = 1;
    for (int i = 0; i < d_; ++i)
      for (int j = i + 1; j < d_; ++j, ++k) {
        const double b = p_[k];
        const double s = w[i] + w[j];
        const double u = w[i] / s;
        const double lt = std::lgamma(2.0 * b) - 2.0 * std::lgamma(b) + (2.0 * a - 1.0) * std::log(s) +
                          (a * (dd - 2.0) - dd + 2.0) * std::log1p(-s) +
                          (b - 1.0) * (std::log(u) + std::log1p(-u));
        acc += std::exp(lt);
      }
    return log_const_ + std::log(acc);
  }

  double td(const Vec& w) const {
    double sw = 0.0;
    for (int j = 0; j < d_; ++j) sw += p_[j] * w[j];
    const double lsw = std::log(sw);
    double v = log_const_ - (d_ + 1.0) * lsw;
    for (int j = 0; j < d_; ++j) v += (p_[j] - 1.0) * (std::log(p_[j] * w[j]) - lsw);
    return v;
  }

  double hr(const Vec& w) const {
    Eigen::VectorXd y(d_ - 1);
    const double l0 = std::log(w[0]);
    double v = log_const_ - 2.0 * l0;
    for (int i = 1; i < d_; ++i) {
      const double li = std::log(w[i]);
      v -= li;
      y(i - 1) = li - l0 + half_g_(i - 1);
    }
    const Eigen::VectorXd z = L_.triangularView<Eigen::Lower>().solve(y);
    return v - 0.5 * z.squaredNorm();
  }

  Family f_;
  int d_;
  Vec p_;
  bool valid_ = true;
  double log_const_ = 0.0;
  Eigen::MatrixXd L_;
  Eigen::VectorXd half_g_;
};

double dirichlet_logpdf(const Vec& w, double a) {
  const double d = static_cast<double>(w.size());
  double v = std::lgamma(a * d) - d * std::lgamma(a);
  for (double x : w) v += (a - 1.0) * std::log(x);
  return v;
}

bool draw_dirichlet(Rng& rng, double a, Vec& w) {
  double s = 0.0;
  for (auto& x : w) {
    x = rng.gamma(a);
    s += x;
  }
  for (auto& x : w) x /= s;
  return std::all_of(w.begin(), w.end(), [](double x) { return x > 0.0; });
}

bool interior(const Vec& w) {
  for (double x : w)
    if (!(x > 0.0) || !(x < 1.0)) return false;
  return true;
}

}  // namespace

std::vector<AngularSample> pseudo_polar(const Matrix& y) {
  std::vector<AngularSample> out;
  out.reserve(y.size());
  for (const auto& row : y) {
    AngularSample s;
    for (double v : row) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("pseudo_polar: entries must be positive");
      s.radius += v;
    }
    s.w.resize(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) s.w[j] = row[j] / s.radius;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AngularSample> select_exceedances(const std::vector<AngularSample>& samples, double quantile) {
  if (!(quantile >= 0.0 && quantile < 1.0)) throw std::invalid_argument("select_exceedances: quantile must lie in [0,1)");
  const std::size_t n = samples.size();
  const auto keep = static_cast<std::size_t>(std::ceil((1.0 - quantile) * static_cast<double>(n) - 1e-9));
  if (keep == 0) throw std::runtime_error("select_exceedances: no exceedances");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].radius > samples[b].radius; });
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  std::vector<AngularSample> out;
  for (std::size_t i : idx) out.push_back(samples[i]);
  return out;
}

Matrix angles_of(const std::vector<AngularSample>& samples) {
  Matrix w;
  for (const auto& s : samples) w.push_back(s.w);
  return w;
}

Family parse_family(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "pb") return Family::PB;
  if (s == "td") return Family::TD;
  if (s == "hr") return Family::HR;
  throw std::invalid_argument("unknown angular family: " + name);
}

std::string family_name(Family f) {
  switch (f) {
    case Family::PB: return "PB";
    case Family::TD: return "TD";
    case Family::HR: return "HR";
  }
  return "?";
}

int param_count(Family f, int d) {
  switch (f) {
    case Family::PB: return 1 + n_pairs(d);
    case Family::TD: return d;
    case Family::HR: return n_pairs(d);
  }
  return 0;
}

void validate(const ParametricAngularModel& m) {
  if (m.dim < 2) throw std::invalid_argument("angular model: dimension must be >= 2");
  if (m.family == Family::PB && m.dim < 3)
    throw std::invalid_argument("angular model: pairwise beta needs d >= 3");
  if (static_cast<int>(m.params.size()) != param_count(m.family, m.dim))
    throw std::invalid_argument("angular model: wrong parameter count for " + family_name(m.family));
  for (double v : m.params)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("angular model: parameters must be positive");
  if (m.family == Family::HR && !LogDensity(m.family, m.dim, m.params).valid())
    throw std::invalid_argument("angular model: Husler-Reiss variogram is not conditionally negative definite");
}

double log_angular_density(Family f, int d, const Vec& params, const Vec& w) {
  return LogDensity(f, d, params)(w);
}

double angular_density(const ParametricAngularModel& m, const Vec& w) {
  validate(m);
  if (static_cast<int>(w.size()) != m.dim) throw std::invalid_argument("angular_density: wrong dimension");
  if (!interior(w)) throw std::domain_error("angular_density: w must lie in the interior of the simplex");
  return std::exp(LogDensity(m.family, m.dim, m.params)(w));
}

Matrix angular_sample_parametric(const ParametricAngularModel& m, int n, std::uint64_t seed) {
  validate(m);
  if (n < 1) throw std::invalid_argument("angular_sample_parametric: n must be >= 1");
  const LogDensity logh(m.family, m.dim, m.params);
  const int d = m.dim;
  Rng rng(seed);

  // Pick the envelope concentration with the smallest bound on h/g.
  double best_a = 1.0;
  double best_logM = kInf;
  Rng probe = rng.split(1);
  Vec w(d);
  for (double a : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    double logM = -kInf;
    for (int i = 0; i < 20000; ++i) {
      if (!draw_dirichlet(probe, a, w)) continue;
      logM = std::max(logM, logh(w) - dirichlet_logpdf(w, a));
    }
    // deterministic grid near the centre and edges
    const int g = d == 2 ? 2000 : 80;
    if (d == 2) {
      for (int i = 1; i < g; ++i) {
        w = {static_cast<double>(i) / g, 1.0 - static_cast<double>(i) / g};
        logM = std::max(logM, logh(w) - dirichlet_logpdf(w, a));
      }
    } else if (d == 3) {
      for (int i = 1; i < g; ++i)
        for (int j = 1; i + j < g; ++j) {
          w = {static_cast<double>(i) / g, static_cast<double>(j) / g, 1.0 - static_cast<double>(i + j) / g};
          logM = std::max(logM, logh(w) - dirichlet_logpdf(w, a));
        }
    }
    if (logM < best_logM) {
      best_logM = logM;
      best_a = a;
    }
  }
  double logM = best_logM + std::log(1.25);
  if (-logM < std::log(1e-4)) throw std::runtime_error("angular_sample_parametric: envelope acceptance rate below 1e-4");

  Matrix out;
  out.reserve(n);
  Rng draw = rng.split(2);
  long long tries = 0;
  while (static_cast<int>(out.size()) < n) {
    ++tries;
    if (!draw_dirichlet(draw, best_a, w)) continue;
    const double lr = logh(w) - dirichlet_logpdf(w, best_a);
    if (lr > logM) logM = lr + std::log(1.25);  // bound was too small; raise it
    if (std::log(draw.uniform()) < lr - logM) out.push_back(w);
    if (tries > 1000000 && static_cast<double>(out.size()) / static_cast<double>(tries) < 1e-4)
      throw std::runtime_error("angular_sample_parametric: envelope acceptance rate below 1e-4");
  }
  return out;
}

PppFit ppp_fit_mle(const Matrix& w, Family f, const Vec& start) {
  if (w.empty()) throw std::invalid_argument("ppp_fit_mle: no angles");
  const int d = static_cast<int>(w.front().size());
  const int p = param_count(f, d);
  if (static_cast<int>(w.size()) < d + 1) throw std::invalid_argument("ppp_fit_mle: need at least d+1 exceedances");
  for (const auto& row : w)
    if (static_cast<int>(row.size()) != d || !interior(row))
      throw std::invalid_argument("ppp_fit_mle: angles must be interior simplex points");
  validate(ParametricAngularModel{f, d, start});

  auto loglik = [&](const Vec& phi) {
    const LogDensity lh(f, d, phi);
    if (!lh.valid()) return -kInf;
    double s = 0.0;
    for (const auto& row : w) s += lh(row);
    return s;
  };
  auto obj = [&](const Vec& th) {
    Vec phi(th.size());
    for (std::size_t i = 0; i < th.size(); ++i) phi[i] = std::exp(th[i]);
    return -loglik(phi);
  };
  Vec th0(p);
  for (int i = 0; i < p; ++i) th0[i] = std::log(start[i]);
  const OptimResult r = minimize(obj, th0, Vec(p, 0.3));
  if (!r.converged) throw std::runtime_error("ppp_fit_mle: optimizer did not converge\n" + r.trace);

  PppFit fit;
  fit.family = f;
  fit.dim = d;
  fit.params.resize(p);
  for (int i = 0; i < p; ++i) fit.params[i] = std::exp(r.x[i]);
  fit.loglik = -r.value;
  fit.trace = r.trace;

  // sandwich on the natural scale
  Vec h(p);
  for (int i = 0; i < p; ++i) h[i] = 1e-5 * (1.0 + std::abs(fit.params[i]));
  Matrix J(p, Vec(p, 0.0));
  Vec phi = fit.params;
  for (const auto& row : w) {
    Vec s(p);
    for (int i = 0; i < p; ++i) {
      phi[i] = fit.params[i] + h[i];
      const double up = log_angular_density(f, d, phi, row);
      phi[i] = fit.params[i] - h[i];
      const double dn = log_angular_density(f, d, phi, row);
      phi[i] = fit.params[i];
      s[i] = (up - dn) / (2.0 * h[i]);
    }
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) J[i][j] += s[i] * s[j];
  }
  Matrix H = numeric_hessian([&](const Vec& x) { return -loglik(x); }, fit.params, h);
  Matrix Hinv;
  try {
    Hinv = invert_spd(H);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("ppp_fit_mle: singular information matrix");
  }
  fit.cov.assign(p, Vec(p, 0.0));
  double tr = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      double v = 0.0;
      for (int k = 0; k < p; ++k)
        for (int l = 0; l < p; ++l) v += Hinv[i][k] * J[k][l] * Hinv[l][j];
      fit.cov[i][j] = v;
      if (i == j)
        for (int k = 0; k < p; ++k) tr += J[i][k] * Hinv[k][i];
    }
  fit.se.resize(p);
  for (int i = 0; i < p; ++i) fit.se[i] = std::sqrt(fit.cov[i][i]);
  fit.tic = -2.0 * fit.loglik + 2.0 * tr;
  fit.aic = -2.0 * fit.loglik + 2.0 * p;
  return fit;
}

PriorSpec default_prior(Family f, int d) {
  PriorSpec s;
  s.comps.assign(param_count(f, d), PriorComponent{Transform::log, 0.0, 3.0});
  return s;
}

double transform_to(Transform t, double x) {
  switch (t) {
    case Transform::log: return std::log(x);
    case Transform::logit: return std::log(x / (1.0 - x));
    case Transform::atanh: return std::atanh(x);
    case Transform::identity: return x;
  }
  return x;
}

double transform_from(Transform t, double y) {
  switch (t) {
    case Transform::log: return std::exp(y);
    case Transform::logit: return 1.0 / (1.0 + std::exp(-y));
    case Transform::atanh: return std::tanh(y);
    case Transform::identity: return y;
  }
  return y;
}

PppChain ppp_fit_bayes(const Matrix& w, Family f, const PriorSpec& prior, double mcpar, int nsim, int nburn,
                       std::uint64_t seed, const Vec& start) {
  if (w.empty()) throw std::invalid_argument("ppp_fit_bayes: no angles");
  const int d = static_cast<int>(w.front().size());
  const int p = param_count(f, d);
  if (!(nburn >= 0 && nburn < nsim)) throw std::invalid_argument("ppp_fit_bayes: need 0 <= nburn < nsim");
  if (!(mcpar > 0.0)) throw std::invalid_argument("ppp_fit_bayes: mcpar must be positive");
  if (static_cast<int>(prior.comps.size()) != p) throw std::invalid_argument("ppp_fit_bayes: prior size mismatch");
  for (const auto& c : prior.comps)
    if (!(c.sd > 0.0)) throw std::invalid_argument("ppp_fit_bayes: prior sd must be positive");
  for (const auto& row : w)
    if (static_cast<int>(row.size()) != d || !interior(row))
      throw std::invalid_argument("ppp_fit_bayes: angles must be interior simplex points");

  auto loglik = [&](const Vec& phi) {
    const LogDensity lh(f, d, phi);
    if (!lh.valid()) return -kInf;
    double s = 0.0;
    for (const auto& row : w) s += lh(row);
    return s;
  };
  auto logprior = [&](const Vec& t) {
    double s = 0.0;
    for (int i = 0; i < p; ++i) {
      const double z = (t[i] - prior.comps[i].mean) / prior.comps[i].sd;
      s += -0.5 * z * z;
    }
    return s;
  };

  Vec phi = start.empty() ? Vec(p, 1.0) : start;
  if (static_cast<int>(phi.size()) != p) throw std::invalid_argument("ppp_fit_bayes: start has wrong length");
  Vec t(p);
  for (int i = 0; i < p; ++i) t[i] = transform_to(prior.comps[i].transform, phi[i]);
  double ll = loglik(phi);
  if (!std::isfinite(ll)) throw std::runtime_error("ppp_fit_bayes: zero density at the starting point");
  double lp = logprior(t);

  PppChain c;
  c.family = f;
  c.dim = d;
  c.nsim = nsim;
  c.nburn = nburn;
  c.mcpar = mcpar;
  c.seed = seed;
  c.natural.reserve(nsim);
  c.transformed.reserve(nsim);
  Rng rng(seed);
  const double step = std::sqrt(mcpar);
  long long acc_total = 0;
  for (int it = 0; it < nsim; ++it) {
    int acc = 0;
    for (int i = 0; i < p; ++i) {
      Vec t_new = t;
      t_new[i] += step * rng.normal();
      Vec phi_new = phi;
      phi_new[i] = transform_from(prior.comps[i].transform, t_new[i]);
      const double ll_new = loglik(phi_new);
      const double lp_new = logprior(t_new);
      const double u = rng.uniform();
      if (std::isfinite(ll_new) && std::log(u) < ll_new + lp_new - ll - lp) {
        t = t_new;
        phi = phi_new;
        ll = ll_new;
        lp = lp_new;
        ++acc;
      }
    }
    acc_total += acc;
    c.natural.push_back(phi);
    c.transformed.push_back(t);
    c.accepted.push_back(acc);
  }
  c.acceptance_rate = static_cast<double>(acc_total) / (static_cast<double>(nsim) * p);
  c.post_mean.assign(p, 0.0);
  c.post_sd.assign(p, 0.0);
  for (int i = 0; i < p; ++i) {
    Vec v;
    for (int it = nburn; it < nsim; ++it) v.push_back(c.natural[it][i]);
    c.post_mean[i] = mean(v);
    c.post_sd[i] = v.size() > 1 ? std::sqrt(variance(v)) : 0.0;
  }
  const double ll_mean = loglik(c.post_mean);
  c.bic = -2.0 * ll_mean + p * std::log(static_cast<double>(w.size()));
  if (c.acceptance_rate < 0.05 || c.acceptance_rate > 0.95) {
    std::ostringstream os;
    os << "acceptance rate " << c.acceptance_rate << " outside (0.05, 0.95); consider adjusting mcpar";
    c.warnings.push_back(os.str());
  }
  return c;
}

}  // namespace extremodep
