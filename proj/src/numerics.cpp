#include "extremodep/numerics.hpp"

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace extremodep {

const QuadratureRule& gauss_legendre_01(int n) {
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw std::invalid_argument("gauss_legendre_01: n must be positive");
  // boost returns the nonnegative zeros in increasing order
  const Vec zeros = boost::math::legendre_p_zeros<double>(n);
  std::vector<std::pair<double, double>> nw;
  for (double x : zeros) {
    const double dp = boost::math::legendre_p_prime(n, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nw.emplace_back(x, w);
    if (x != 0.0) nw.emplace_back(-x, w);
  }
  std::sort(nw.begin(), nw.end());
  QuadratureRule r;
  for (auto [x, w] : nw) {
    r.nodes.push_back(0.5 * (x + 1.0));
    r.weights.push_back(0.5 * w);
  }
  return cache.emplace(n, std::move(r)).first->second;
}

double integrate(const std::function<double(double)>& f, double a, double b, int n) {
  const auto& q = gauss_legendre_01(n);
  double s = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * f(a + (b - a) * q.nodes[i]);
  return s * (b - a);
}

namespace {

constexpr double kBig = 1e300;

struct GslCtx {
  const Objective* f;
};

double eval_finite(const Objective& f, const Vec& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : kBig;
}

Vec to_vec(const gsl_vector* v) {
  Vec x(v->size);
  for (std::size_t i = 0; i < v->size; ++i) x[i] = gsl_vector_get(v, i);
  return x;
}

double gsl_f(const gsl_vector* v, void* p) {
  auto* c = static_cast<GslCtx*>(p);
  return eval_finite(*c->f, to_vec(v));
}

void gsl_df(const gsl_vector* v, void* p, gsl_vector* g) {
  auto* c = static_cast<GslCtx*>(p);
  const Vec x = to_vec(v);
  Vec h(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) h[i] = 1e-6 * (1.0 + std::abs(x[i]));
  const Vec gr = numeric_gradient([&](const Vec& y) { return eval_finite(*c->f, y); }, x, h);
  for (std::size_t i = 0; i < gr.size(); ++i) gsl_vector_set(g, i, gr[i]);
}

void gsl_fdf(const gsl_vector* v, void* p, double* f, gsl_vector* g) {
  *f = gsl_f(v, p);
  gsl_df(v, p, g);
}

}  // namespace

OptimResult minimize(const Objective& f, const Vec& x0, const Vec& step, const OptimOptions& opt) {
  gsl_set_error_handler_off();
  const std::size_t n = x0.size();
  if (n == 0 || step.size() != n) throw std::invalid_argument("minimize: bad dimensions");
  GslCtx ctx{&f};
  std::ostringstream trace;
  OptimResult res;

  const double f0 = eval_finite(f, x0);
  if (f0 >= kBig) throw std::runtime_error("minimize: objective not finite at start");

  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0[i]);
    gsl_vector_set(ss, i, step[i]);
  }

  Vec best = x0;
  double best_f = f0;
  bool simplex_ok = false;
  int iter = 0;
  for (int restart = 0; restart < 3; ++restart) {
    gsl_multimin_function mf{&gsl_f, n, &ctx};
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, best[i]);
    gsl_multimin_fminimizer_set(s, &mf, x, ss);
    int status = GSL_CONTINUE;
    int it = 0;
    while (status == GSL_CONTINUE && it < opt.max_simplex_iter) {
      ++it;
      if (gsl_multimin_fminimizer_iterate(s)) break;
      status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt.simplex_tol);
    }
    iter += it;
    const double fv = s->fval;
    trace << "simplex[" << restart << "] iter=" << it << " f=" << fv
          << " size=" << gsl_multimin_fminimizer_size(s) << "\n";
    const bool improved = fv < best_f - 1e-10 * (1.0 + std::abs(best_f));
    if (fv <= best_f) {
      best = to_vec(s->x);
      best_f = fv;
    }
    gsl_multimin_fminimizer_free(s);
    if (status == GSL_SUCCESS) simplex_ok = true;
    if (!improved && restart > 0) break;
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(ss, i, 0.1 * step[i]);
  }

  // quasi-Newton refinement
  bool grad_ok = false;
  {
    gsl_multimin_function_fdf mf{&gsl_f, &gsl_df, &gsl_fdf, n, &ctx};
    gsl_multimin_fdfminimizer* s = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n);
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, best[i]);
    gsl_multimin_fdfminimizer_set(s, &mf, x, 0.01, 0.1);
    int it = 0;
    // gradient tolerance relative to the objective's magnitude
    const double gtol = opt.grad_tol * (1.0 + std::abs(best_f));
    int status = gsl_multimin_test_gradient(s->gradient, gtol);
    while (status == GSL_CONTINUE && it < opt.max_bfgs_iter) {
      ++it;
      if (gsl_multimin_fdfminimizer_iterate(s)) break;
      status = gsl_multimin_test_gradient(s->gradient, gtol);
    }
    iter += it;
    if (status == GSL_SUCCESS) grad_ok = true;
    trace << "bfgs iter=" << it << " f=" << s->f << " |g|=" << gsl_blas_dnrm2(s->gradient) << "\n";
    if (s->f <= best_f) {
      best = to_vec(s->x);
      best_f = s->f;
    }
    gsl_multimin_fdfminimizer_free(s);
  }
  gsl_vector_free(x);
  gsl_vector_free(ss);

  res.x = best;
  res.value = best_f;
  res.converged = (simplex_ok || grad_ok) && best_f < kBig;
  res.iterations = iter;
  res.trace = trace.str();
  return res;
}

Vec numeric_gradient(const Objective& f, const Vec& x, const Vec& h) {
  Vec g(x.size());
  Vec y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h[i];
    const double fp = f(y);
    y[i] = x[i] - h[i];
    const double fm = f(y);
    y[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h[i]);
  }
  return g;
}

std::vector<Vec> numeric_hessian(const Objective& f, const Vec& x, const Vec& h) {
  const std::size_t n = x.size();
  std::vector<Vec> H(n, Vec(n, 0.0));
  Vec y = x;
  const double f0 = f(x);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = x[i] + h[i];
    const double fp = f(y);
    y[i] = x[i] - h[i];
    const double fm = f(y);
    y[i] = x[i];
    H[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      double v[4];
      const int si[4] = {1, 1, -1, -1};
      const int sj[4] = {1, -1, 1, -1};
      for (int k = 0; k < 4; ++k) {
        y[i] = x[i] + si[k] * h[i];
        y[j] = x[j] + sj[k] * h[j];
        v[k] = f(y);
      }
      y[i] = x[i];
      y[j] = x[j];
      H[i][j] = H[j][i] = (v[0] - v[1] - v[2] + v[3]) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

std::vector<Vec> invert_spd(const std::vector<Vec>& m) {
  const Eigen::Index n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = m[i][j];
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw std::runtime_error("matrix is singular or not positive definite");
  const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  std::vector<Vec> out(n, Vec(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out[i][j] = inv(i, j);
  return out;
}

double mean(const Vec& x) {
  if (x.empty()) throw std::invalid_argument("mean of empty vector");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(const Vec& x) {
  if (x.size() < 2) throw std::invalid_argument("variance needs two values");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double quantile(Vec x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile of empty vector");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t t = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < t; ++k) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("EXTREMODEP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace extremodep
