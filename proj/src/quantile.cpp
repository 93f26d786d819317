#include "extremodep/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace extremodep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kGrid = 100;

void check_gamma(const std::array<double, 2>& g) {
  if (!(g[0] > 0.0 && g[1] > 0.0)) throw std::invalid_argument("quantile regions need positive shape parameters");
}

std::array<double, 3> band(Vec v, double cred) {
  const double lo = (1.0 - cred) / 2.0;
  const double m = mean(v);
  return {quantile(v, lo), m, quantile(std::move(v), 1.0 - lo)};
}

}  // namespace

double q_star(double w, const std::array<double, 2>& g, const Density& h) {
  check_gamma(g);
  if (!(w > 0.0 && w < 1.0)) throw std::domain_error("q_star: w must be in (0,1)");
  const double hw = h(w);
  if (hw < 0.0) throw std::domain_error("q_star: negative density");
  if (hw == 0.0) return kInf;
  const double base = 2.0 * std::pow(w, 1.0 - g[0]) * std::pow(1.0 - w, 1.0 - g[1]) * hw / (g[0] * g[1]);
  return std::pow(base, -1.0 / (1.0 + g[0] + g[1]));
}

double xi_S(const std::array<double, 2>& g, const Density& h) {
  check_gamma(g);
  const double v = 2.0 * integrate(
                             [&](double w) {
                               const double hw = h(w);
                               return hw == 0.0 ? 0.0 : q_star(w, g, h) * hw;
                             },
                             0.0, 1.0, 512);
  if (!std::isfinite(v) || v <= 0.0) throw std::domain_error("xi_S: integral is not finite and positive");
  return v;
}

double xi_S(const std::array<double, 2>& g, const BernsteinAngular& m, std::vector<std::string>* warnings) {
  validate(m);
  if (warnings && m.p0() + m.p1() > 0.1)
    warnings->push_back("xi_S: atoms of H carry more than 0.1 of the mass and are left out");
  return xi_S(g, [&](double w) { return h_density(w, m); });
}

Vec region_w_grid() {
  Vec w(kGrid);
  for (int i = 0; i < kGrid; ++i) w[i] = (i + 0.5) / kGrid;
  return w;
}

BasicSet basic_set(const std::array<double, 2>& g, const Density& h) {
  BasicSet s;
  s.w = region_w_grid();
  for (double w : s.w) {
    const double q = q_star(w, g, h);
    s.q.push_back(q);
    s.boundary.push_back({w / q, (1.0 - w) / q});
  }
  s.xi = xi_S(g, h);
  return s;
}

bool QuantileRegion::contains(const std::array<double, 2>& y) const {
  const double z1 = to_frechet_clamped(y[0], margins[0]);
  const double z2 = to_frechet_clamped(y[1], margins[1]);
  const double r = z1 + z2;
  if (!(r > 0.0)) return false;
  if (std::isinf(r)) return true;
  const double w = z1 / r;
  // linear interpolation in w, constant beyond the end rays
  const double pos = std::clamp(w * kGrid - 0.5, 0.0, kGrid - 1.0);
  const int i = std::min(static_cast<int>(pos), kGrid - 2);
  const double f = pos - i;
  return r >= (1.0 - f) * radius[i] + f * radius[i + 1];
}

QuantileRegionSet quantile_regions(const PosteriorChain& c, int burn, const Vec& p, int k, int N, double cred) {
  if (burn < 0 || burn >= static_cast<int>(c.records.size()))
    throw std::invalid_argument("quantile_regions: burn must be below the chain length");
  if (!(k >= 1 && k < N)) throw std::invalid_argument("quantile_regions: need 1 <= k < N");
  if (!(cred > 0.0 && cred < 1.0)) throw std::invalid_argument("quantile_regions: cred must be in (0,1)");
  if (p.empty()) throw std::invalid_argument("quantile_regions: no probabilities");
  for (double v : p)
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("quantile_regions: p must be in (0,1)");

  QuantileRegionSet out;
  out.w = region_w_grid();
  out.cred = cred;
  out.k = k;
  out.N = N;
  const std::size_t P = p.size();

  // per-draw values along each ray
  std::vector<Vec> q_draws(kGrid), s1(kGrid), s2(kGrid);
  std::vector<std::vector<Vec>> y1(P, std::vector<Vec>(kGrid)), y2(P, std::vector<Vec>(kGrid));
  std::vector<Vec> rad(P, Vec(kGrid, 0.0));
  Vec xis;
  std::array<double, 6> msum{};
  int atom_heavy = 0;

  for (std::size_t r = burn; r < c.records.size(); ++r) {
    const auto& rec = c.records[r];
    const GevParams g1 = margin_of(rec.mar1), g2 = margin_of(rec.mar2);
    if (!(g1.gamma > 0.0 && g2.gamma > 0.0)) {
      ++out.skipped;
      continue;
    }
    const BernsteinAngular m = angular_of(rec);
    const std::array<double, 2> g{g1.gamma, g2.gamma};
    const Density h = [&](double w) { return h_density(w, m); };
    double xi;
    try {
      xi = xi_S(g, h);
    } catch (const std::domain_error&) {
      ++out.skipped;
      continue;
    }
    if (m.p0() + m.p1() > 0.1) ++atom_heavy;
    xis.push_back(xi);
    for (int i = 0; i < kGrid; ++i) {
      const double w = out.w[i];
      const double q = q_star(w, g, h);
      q_draws[i].push_back(q);
      const double x1 = w / q, x2 = (1.0 - w) / q;
      s1[i].push_back(x1);
      s2[i].push_back(x2);
      for (std::size_t a = 0; a < P; ++a) {
        const double scale = k * xi / (N * p[a]);
        y1[a][i].push_back(x1 > 0.0 ? from_frechet(scale * x1, g1) : g1.mu - g1.sigma / g1.gamma);
        y2[a][i].push_back(x2 > 0.0 ? from_frechet(scale * x2, g2) : g2.mu - g2.sigma / g2.gamma);
        rad[a][i] += scale / q;
      }
    }
    msum[0] += g1.mu;
    msum[1] += g1.sigma;
    msum[2] += g1.gamma;
    msum[3] += g2.mu;
    msum[4] += g2.sigma;
    msum[5] += g2.gamma;
    ++out.used;
  }
  if (out.used == 0) throw std::runtime_error("quantile_regions: every posterior draw was skipped");
  const int total = out.used + out.skipped;
  if (out.skipped > 0.05 * total)
    out.warnings.push_back("quantile_regions: " + std::to_string(out.skipped) + " of " + std::to_string(total) +
                           " posterior draws skipped");
  if (atom_heavy > 0)
    out.warnings.push_back("quantile_regions: " + std::to_string(atom_heavy) +
                           " draws have atoms with mass above 0.1, left out of xi(S)");

  for (auto& v : out.ghat) v.resize(kGrid);
  for (auto& m : out.shat) m.assign(kGrid, Vec(2));
  for (int i = 0; i < kGrid; ++i) {
    const auto gq = band(q_draws[i], cred), b1 = band(s1[i], cred), b2 = band(s2[i], cred);
    for (int b = 0; b < 3; ++b) {
      out.ghat[b][i] = gq[b];
      out.shat[b][i] = {b1[b], b2[b]};
    }
  }
  out.nu_shat = band(xis, cred);

  const double u = out.used;
  for (std::size_t a = 0; a < P; ++a) {
    QuantileRegion reg;
    reg.p = p[a];
    for (auto& m : reg.boundary) m.assign(kGrid, Vec(2));
    for (int i = 0; i < kGrid; ++i) {
      const auto b1 = band(y1[a][i], cred), b2 = band(y2[a][i], cred);
      for (int b = 0; b < 3; ++b) reg.boundary[b][i] = {b1[b], b2[b]};
    }
    reg.margins = {GevParams{msum[0] / u, msum[1] / u, msum[2] / u}, GevParams{msum[3] / u, msum[4] / u, msum[5] / u}};
    reg.radius = rad[a];
    for (double& v : reg.radius) v /= u;
    out.regions.push_back(std::move(reg));
  }
  return out;
}

}  // namespace extremodep
