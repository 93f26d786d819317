#include "extremodep/maxstable.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "extremodep/rng.hpp"

namespace extremodep {

namespace {

Eigen::MatrixXd cholesky_factor(const SiteSet& sites, const PowExpCorr& corr) {
  const int d = static_cast<int>(sites.coords.size());
  Eigen::MatrixXd C(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      const double h = std::hypot(sites.coords[a][0] - sites.coords[b][0], sites.coords[a][1] - sites.coords[b][1]);
      C(a, b) = powexp_corr(h, corr);
    }
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) {
    C.diagonal().array() += 1e-10;
    llt.compute(C);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("sim_extremal_t: correlation matrix is not positive definite after jitter");
  }
  return llt.matrixL();
}

struct Replicate {
  Vec vals;
  std::vector<int> hits;
  int events = 0;
};

// One replicate of the truncated construction. Rows of L have unit norm, so
// max_s W(s) <= |z| by Cauchy-Schwarz; terms with zeta |z|^nu / c below the current minimum
// cannot change vals and are skipped.
Replicate one_replicate(const Eigen::MatrixXd& L, double nu, double c, int M, Rng rng) {
  const int d = static_cast<int>(L.rows());
  Replicate r;
  r.vals.assign(d, 0.0);
  std::vector<int> idx(d, -1);
  Eigen::VectorXd z(d);
  const double row_norm = L.rowwise().norm().maxCoeff();  // 1 up to jitter
  double gamma_sum = 0.0, vmin = 0.0;
  for (int i = 0; i < M; ++i) {
    gamma_sum += rng.exponential();
    const double zeta = 1.0 / gamma_sum;
    // z = radius * direction with radius^2 ~ chi-square(d), so the bound needs no direction
    const double radius = std::sqrt(2.0 * rng.gamma(0.5 * d));
    if (vmin > 0.0 && zeta * std::pow(radius * row_norm, nu) / c <= vmin) continue;
    for (int s = 0; s < d; ++s) z[s] = rng.normal();
    z *= radius / z.norm();
    const Eigen::VectorXd w = L * z;
    for (int s = 0; s < d; ++s) {
      if (w[s] <= 0.0) continue;
      const double v = zeta * std::pow(w[s], nu) / c;
      if (v > r.vals[s]) {
        r.vals[s] = v;
        idx[s] = i;
      }
    }
    vmin = *std::min_element(r.vals.begin(), r.vals.end());
  }
  // relabel in site order
  r.hits.assign(d, 0);
  std::vector<std::pair<int, int>> seen;
  for (int s = 0; s < d; ++s) {
    auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == idx[s]; });
    if (it == seen.end()) {
      seen.emplace_back(idx[s], static_cast<int>(seen.size()) + 1);
      r.hits[s] = static_cast<int>(seen.size());
    } else {
      r.hits[s] = it->second;
    }
  }
  r.events = static_cast<int>(seen.size());
  return r;
}

void check_args(const SiteSet& sites, double nu, const PowExpCorr& corr, int Ny, int M) {
  validate(sites);
  if (sites.coords.empty()) throw std::invalid_argument("sim_extremal_t: no sites");
  if (!(nu >= 1.0)) throw std::invalid_argument("sim_extremal_t: nu must be >= 1");
  if (!(corr.range > 0.0) || !(corr.smooth > 0.0 && corr.smooth <= 2.0))
    throw std::invalid_argument("sim_extremal_t: need range > 0 and smooth in (0, 2]");
  if (Ny < 1) throw std::invalid_argument("sim_extremal_t: Ny must be positive");
  if (M < 1000) throw std::invalid_argument("sim_extremal_t: truncation M must be at least 1000");
}

}  // namespace

std::vector<std::string> validate(const SiteSet& s) {
  std::vector<std::string> warn;
  for (const auto& c : s.coords)
    if (!std::isfinite(c[0]) || !std::isfinite(c[1])) throw std::invalid_argument("SiteSet: non-finite coordinate");
  for (std::size_t a = 0; a < s.coords.size(); ++a)
    for (std::size_t b = a + 1; b < s.coords.size(); ++b)
      if (s.coords[a] == s.coords[b])
        warn.push_back("SiteSet: sites " + std::to_string(a + 1) + " and " + std::to_string(b + 1) +
                       " share coordinates");
  return warn;
}

double powexp_corr(double h, const PowExpCorr& c) {
  if (!(h >= 0.0)) throw std::invalid_argument("powexp_corr: distance must be nonnegative");
  return std::exp(-std::pow(h / c.range, c.smooth));
}

double extremal_t_moment(double nu) {
  return std::pow(2.0, nu / 2.0 - 1.0) * std::tgamma((nu + 1.0) / 2.0) / std::sqrt(M_PI);
}

MaxStableField sim_extremal_t(const SiteSet& sites, double nu, const PowExpCorr& corr, int Ny, int M,
                              std::uint64_t seed, int threads) {
  check_args(sites, nu, corr, Ny, M);
  const Eigen::MatrixXd L = cholesky_factor(sites, corr);
  const double c = extremal_t_moment(nu);
  const Rng root(seed);
  std::vector<Replicate> reps(Ny);
  parallel_for(Ny, threads, [&](std::size_t t) { reps[t] = one_replicate(L, nu, c, M, root.split(t)); });
  MaxStableField f;
  f.warnings = validate(sites);
  for (auto& r : reps) {
    f.vals.push_back(std::move(r.vals));
    f.hits.push_back(std::move(r.hits));
  }
  f.tries = Ny;
  return f;
}

MaxStableField conditional_sim(const SiteSet& sites, double nu, const PowExpCorr& corr, int Ny, int max_events,
                               std::uint64_t seed, std::uint64_t max_tries, int M, int threads) {
  check_args(sites, nu, corr, Ny, M);
  if (max_events < 1) throw std::invalid_argument("conditional_sim: max_events must be positive");
  const Eigen::MatrixXd L = cholesky_factor(sites, corr);
  const double c = extremal_t_moment(nu);
  const Rng root(seed);
  MaxStableField f;
  f.warnings = validate(sites);
  std::uint64_t t = 0;
  while (static_cast<int>(f.vals.size()) < Ny) {
    if (t >= max_tries)
      throw std::runtime_error("conditional_sim: " + std::to_string(max_tries) + " tries gave only " +
                               std::to_string(f.vals.size()) + " of " + std::to_string(Ny) + " replicates");
    // replicate t always uses stream t, so the batch size does not affect the result
    const std::uint64_t batch = std::min<std::uint64_t>(max_tries - t, std::max(64, 2 * (Ny - static_cast<int>(f.vals.size()))));
    std::vector<Replicate> reps(batch);
    parallel_for(batch, threads, [&](std::size_t b) { reps[b] = one_replicate(L, nu, c, M, root.split(t + b)); });
    for (auto& r : reps) {
      ++t;
      if (r.events <= max_events) {
        f.vals.push_back(std::move(r.vals));
        f.hits.push_back(std::move(r.hits));
        if (static_cast<int>(f.vals.size()) == Ny) break;
      }
    }
  }
  f.tries = t;
  f.acceptance = static_cast<double>(Ny) / static_cast<double>(t);
  return f;
}

double truncation_check(const SiteSet& sites, double nu, const PowExpCorr& corr, int Ny, int M, std::uint64_t seed,
                        int threads) {
  const MaxStableField a = sim_extremal_t(sites, nu, corr, Ny, M, seed, threads);
  const MaxStableField b = sim_extremal_t(sites, nu, corr, Ny, 2 * M, seed, threads);
  double worst = 0.0;
  for (std::size_t s = 0; s < sites.coords.size(); ++s) {
    Vec va, vb;
    for (int t = 0; t < Ny; ++t) {
      va.push_back(a.vals[t][s]);
      vb.push_back(b.vals[t][s]);
    }
    const double qa = quantile(va, 0.9), qb = quantile(vb, 0.9);
    worst = std::max(worst, std::abs(qb - qa) / qb);
  }
  return worst;
}

std::vector<DistanceCoefficient> extcoeff_vs_distance(const MaxStableField& field, const SiteSet& sites,
                                                      int threads) {
  if (field.vals.size() < 50) throw std::invalid_argument("extcoeff_vs_distance: need at least 50 replicates");
  const PairwiseResult pr = pairwise_extremal_coeffs(field.vals, sites.coords, CoordKind::euclidean, 10, threads);
  std::vector<DistanceCoefficient> out;
  for (const auto& p : pr.pairs)
    out.push_back({p.i, p.j, p.distance, std::clamp(p.eta_raw, 1.0, 2.0), p.eta_proj});
  return out;
}

}  // namespace extremodep
