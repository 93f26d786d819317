#include "extremodep/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "extremodep/gev.hpp"
#include "extremodep/qp.hpp"
#include "extremodep/rng.hpp"

namespace extremodep {

namespace {

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// C(n,j) t^j (1-t)^(n-j); log scale once the binomial could overflow.
double binom_term(int n, int j, double t) {
  if (n <= 60) return binomial(n, j) * std::pow(t, j) * std::pow(1 - t, n - j);
  if (t <= 0.0) return j == 0 ? 1.0 : 0.0;
  if (t >= 1.0) return j == n ? 1.0 : 0.0;
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * std::log(t) +
                  (n - j) * std::log1p(-t));
}

void lattice(int d, int m, Vec& cur, int rem, std::vector<Vec>& out) {
  if (static_cast<int>(cur.size()) == d - 1) {
    out.push_back(cur);
    return;
  }
  for (int i = 0; i <= rem; ++i) {
    cur.push_back(static_cast<double>(i) / m);
    lattice(d, m, cur, rem - i, out);
    cur.pop_back();
  }
}

std::size_t lattice_size(int d, int m) {
  // C(m + d - 1, d - 1)
  return static_cast<std::size_t>(std::llround(binomial(m + d - 1, d - 1)));
}

void enumerate(int d, int rem, MultiIndex& cur, std::vector<MultiIndex>& out) {
  if (static_cast<int>(cur.size()) == d - 1) {
    cur.push_back(rem);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int a = 0; a <= rem; ++a) {
    cur.push_back(a);
    enumerate(d, rem - a, cur, out);
    cur.pop_back();
  }
}

bool is_vertex(const MultiIndex& a, int kappa) {
  return std::any_of(a.begin(), a.end(), [kappa](int v) { return v == kappa; });
}

bool is_vertex_point(const Vec& t) {
  const Vec w = full_weights(t);
  return std::any_of(w.begin(), w.end(), [](double v) { return v > 1.0 - 1e-12; });
}

Eigen::MatrixXd basis_matrix(const std::vector<Vec>& pts, const std::vector<MultiIndex>& idx, int kappa) {
  Eigen::MatrixXd B(pts.size(), idx.size());
  for (std::size_t u = 0; u < pts.size(); ++u)
    for (std::size_t a = 0; a < idx.size(); ++a) B(u, a) = bernstein_basis(pts[u], idx[a], kappa);
  return B;
}

void check_matrix(const Matrix& data, const char* who) {
  if (data.empty()) throw std::invalid_argument(std::string(who) + ": empty data");
  const std::size_t d = data.front().size();
  for (const auto& r : data) {
    if (r.size() != d) throw std::invalid_argument(std::string(who) + ": ragged matrix");
    for (double v : r)
      if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite value");
  }
}

// Complete rows of columns i and j.
Matrix pair_columns(const Matrix& data, int i, int j) {
  Matrix out;
  out.reserve(data.size());
  for (const auto& r : data)
    if (std::isfinite(r[i]) && std::isfinite(r[j])) out.push_back({r[i], r[j]});
  return out;
}

}  // namespace

SimplexGrid make_simplex_grid(int d, int subdivisions) {
  if (d < 2) throw std::invalid_argument("make_simplex_grid: d must be >= 2");
  int m = subdivisions;
  if (m == 0) {
    if (d == 2) {
      m = 100;
    } else {
      m = d;
      while (lattice_size(d, m) < 500) m += d;
      if (m > d && 500 - lattice_size(d, m - d) < lattice_size(d, m) - 500) m -= d;
    }
  }
  if (m < d || m % d != 0)
    throw std::invalid_argument("make_simplex_grid: subdivisions must be a positive multiple of d");
  SimplexGrid g;
  g.dim = d;
  g.subdivisions = m;
  Vec cur;
  lattice(d, m, cur, m, g.points);
  return g;
}

Vec full_weights(const Vec& t) {
  double s = 0.0;
  for (double v : t) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw std::invalid_argument("point outside the simplex region");
    s += v;
  }
  if (s > 1.0 + 1e-12) throw std::invalid_argument("point outside the simplex region");
  Vec w(t.size() + 1);
  w[0] = std::max(0.0, 1.0 - s);
  for (std::size_t j = 0; j < t.size(); ++j) w[j + 1] = std::clamp(t[j], 0.0, 1.0);
  return w;
}

double pickands_lower_bound(const Vec& t) {
  const Vec w = full_weights(t);
  return *std::max_element(w.begin(), w.end());
}

std::vector<MultiIndex> multi_indices(int d, int kappa) {
  if (d < 2 || kappa < 0) throw std::invalid_argument("multi_indices: bad arguments");
  std::vector<MultiIndex> out;
  MultiIndex cur;
  enumerate(d, kappa, cur, out);
  return out;
}

double bernstein_basis(const Vec& t, const MultiIndex& alpha, int kappa) {
  const int d = static_cast<int>(t.size()) + 1;
  if (static_cast<int>(alpha.size()) != d) throw std::invalid_argument("bernstein_basis: index dimension mismatch");
  int sum = 0;
  for (int a : alpha) {
    if (a < 0) throw std::invalid_argument("bernstein_basis: negative index");
    sum += a;
  }
  if (sum != kappa) throw std::invalid_argument("bernstein_basis: index does not sum to kappa");
  const Vec w = full_weights(t);
  // alpha_j pairs with t_j for j < d and alpha_d with 1 - sum t, which is w[0]
  double v = 1.0;
  int rem = kappa;
  for (int j = 0; j < d; ++j) {
    const int a = alpha[j];
    const double x = (j == d - 1) ? w[0] : w[j + 1];
    v *= binomial(rem, a) * std::pow(x, a);
    rem -= a;
  }
  return v;
}

BernsteinPickands::BernsteinPickands(int dim, int kappa, Vec beta)
    : dim_(dim), kappa_(kappa), beta_(std::move(beta)), indices_(multi_indices(dim, kappa)) {
  if (beta_.size() != indices_.size())
    throw std::invalid_argument("BernsteinPickands: beta has the wrong length for (d, kappa)");
}

double BernsteinPickands::operator()(const Vec& t) const {
  if (static_cast<int>(t.size()) != dim_ - 1) throw std::invalid_argument("BernsteinPickands: wrong point dimension");
  if (dim_ == 2) return at(t[0]);
  double s = 0.0;
  for (std::size_t a = 0; a < indices_.size(); ++a) s += beta_[a] * bernstein_basis(t, indices_[a], kappa_);
  return s;
}

double BernsteinPickands::at(double t) const {
  if (dim_ != 2) throw std::logic_error("BernsteinPickands::at is bivariate only");
  double s = 0.0;
  for (int j = 0; j <= kappa_; ++j) s += beta_[j] * binom_term(kappa_, j, t);
  return s;
}

double BernsteinPickands::derivative(double t) const {
  if (dim_ != 2) throw std::logic_error("BernsteinPickands::derivative is bivariate only");
  const int k = kappa_;
  double s = 0.0;
  for (int j = 0; j < k; ++j)
    s += (beta_[j + 1] - beta_[j]) * binom_term(k - 1, j, t);
  return k * s;
}

double BernsteinPickands::second_derivative(double t) const {
  if (dim_ != 2) throw std::logic_error("BernsteinPickands::second_derivative is bivariate only");
  const int k = kappa_;
  double s = 0.0;
  for (int j = 0; j + 1 < k; ++j)
    s += (beta_[j + 2] - 2 * beta_[j + 1] + beta_[j]) * binom_term(k - 2, j, t);
  return k * (k - 1) * s;
}

double pickands_violation(const BernsteinPickands& A, const SimplexGrid& grid) {
  if (grid.dim != A.dim()) throw std::invalid_argument("pickands_violation: dimension mismatch");
  double worst = 0.0;
  for (const auto& t : grid.points) {
    const double a = A(t);
    worst = std::max({worst, pickands_lower_bound(t) - a, a - 1.0});
  }
  if (A.dim() == 2) {
    const Vec& b = A.beta();
    const int k = A.kappa();
    worst = std::max({worst, std::abs(b[0] - 1.0), std::abs(b[k] - 1.0)});
    for (int j = 0; j + 2 <= k; ++j) worst = std::max(worst, -(b[j] - 2 * b[j + 1] + b[j + 2]));
  }
  return worst;
}

Vec madogram_pickands(const Matrix& data, const SimplexGrid& grid) {
  check_matrix(data, "madogram_pickands");
  const std::size_t k = data.size();
  const std::size_t d = data.front().size();
  if (k < 2) throw std::invalid_argument("madogram_pickands: need at least 2 rows");
  if (d < 2 || static_cast<int>(d) != grid.dim) throw std::invalid_argument("madogram_pickands: dimension mismatch");

  Matrix F(d);
  for (std::size_t j = 0; j < d; ++j) {
    Vec col(k);
    for (std::size_t i = 0; i < k; ++i) col[i] = data[i][j];
    F[j] = empirical_cdf(col);
  }

  Vec out(grid.size());
  for (std::size_t u = 0; u < grid.size(); ++u) {
    const Vec tau = full_weights(grid.points[u]);
    double c = 0.0;
    for (double x : tau) c += x / (1.0 + x);
    c /= static_cast<double>(d);
    double nu = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double mx = 0.0, sm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        // F < 1 always, so F^(1/0) is 0
        const double v = tau[j] > 0.0 ? std::pow(F[j][i], 1.0 / tau[j]) : 0.0;
        mx = std::max(mx, v);
        sm += v;
      }
      nu += mx - sm / static_cast<double>(d);
    }
    nu /= static_cast<double>(k);
    out[u] = (nu + c) / (1.0 - nu - c);
  }
  return out;
}

double beed_objective(const Vec& beta, const Vec& Ahat, const SimplexGrid& grid, int kappa) {
  return beed_objective(BernsteinPickands(grid.dim, kappa, beta), Ahat, grid);
}

double beed_objective(const BernsteinPickands& A, const Vec& Ahat, const SimplexGrid& grid) {
  if (Ahat.size() != grid.size()) throw std::invalid_argument("beed_objective: size mismatch");
  double s = 0.0;
  for (std::size_t u = 0; u < grid.size(); ++u) {
    const double r = A(grid.points[u]) - Ahat[u];
    s += r * r;
  }
  return s / static_cast<double>(grid.size());
}

BernsteinPickands beed_project(const Vec& Ahat, const SimplexGrid& grid, int kappa) {
  const int d = grid.dim;
  if (Ahat.size() != grid.size()) throw std::invalid_argument("beed_project: Ahat and grid sizes differ");
  for (double a : Ahat)
    if (!std::isfinite(a)) throw std::invalid_argument("beed_project: non-finite Ahat");
  if (kappa <= d) throw std::invalid_argument("beed_project: kappa must exceed d");
  const auto idx = multi_indices(d, kappa);
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  if (grid.size() < idx.size()) throw std::invalid_argument("beed_project: grid has fewer points than coefficients");

  const Eigen::MatrixXd B = basis_matrix(grid.points, idx, kappa);
  const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(Ahat.data(), static_cast<Eigen::Index>(Ahat.size()));
  const double U = static_cast<double>(grid.size());
  // objective (1/U)|B beta - a|^2 = 2 (0.5 beta'Q beta - c'beta) + const
  const Eigen::MatrixXd Q = B.transpose() * B / U;
  const Eigen::VectorXd c = B.transpose() * a / U;

  std::vector<Eigen::Index> vertices;
  for (Eigen::Index i = 0; i < n; ++i)
    if (is_vertex(idx[i], kappa)) vertices.push_back(i);
  Eigen::MatrixXd Aeq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vertices.size()), n);
  for (std::size_t r = 0; r < vertices.size(); ++r) Aeq(static_cast<Eigen::Index>(r), vertices[r]) = 1.0;
  const Eigen::VectorXd beq = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(vertices.size()));

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto add = [&](Eigen::VectorXd r, double b) {
    rows.push_back(std::move(r));
    rhs.push_back(b);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_vertex(idx[i], kappa)) continue;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    r(i) = 1.0;
    add(r, 0.0);
    add(-r, -1.0);
  }
  if (d == 2) {
    for (int j = 0; j + 2 <= kappa; ++j) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
      r(j) = 1.0;
      r(j + 1) = -2.0;
      r(j + 2) = 1.0;
      add(r, 0.0);
    }
    // end slopes: A'(0) >= -1 and A'(1) <= 1, so A stays above max(t, 1-t)
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    r(1) = 1.0;
    add(r, 1.0 - 1.0 / kappa);
    r.setZero();
    r(kappa - 1) = 1.0;
    add(r, 1.0 - 1.0 / kappa);
  } else {
    const SimplexGrid dense = make_simplex_grid(d, 2 * grid.subdivisions);
    for (const auto& t : dense.points) {
      if (is_vertex_point(t)) continue;
      Eigen::VectorXd r(n);
      for (Eigen::Index i = 0; i < n; ++i) r(i) = bernstein_basis(t, idx[i], kappa);
      add(r, pickands_lower_bound(t));
      add(-r, -1.0);
    }
  }
  Eigen::MatrixXd Ain(static_cast<Eigen::Index>(rows.size()), n);
  Eigen::VectorXd bin(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Ain.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    bin(static_cast<Eigen::Index>(r)) = rhs[r];
  }

  const QpResult qp = solve_qp_active_set(Q, c, Aeq, beq, Ain, bin, Eigen::VectorXd::Ones(n));
  Vec beta(qp.x.data(), qp.x.data() + n);
  for (Eigen::Index v : vertices) beta[v] = 1.0;
  return BernsteinPickands(d, kappa, std::move(beta));
}

double extremal_coefficient(const BernsteinPickands& A) {
  const int d = A.dim();
  return d * A(Vec(d - 1, 1.0 / d));
}

double extremal_coefficient(const std::function<double(const Vec&)>& A, int d) {
  if (d < 2) throw std::invalid_argument("extremal_coefficient: d must be >= 2");
  return d * A(Vec(d - 1, 1.0 / d));
}

double great_circle_km(double lon1, double lat1, double lon2, double lat2) {
  constexpr double R = 6371.0;
  const double rad = std::numbers::pi / 180.0;
  const double p1 = lat1 * rad, p2 = lat2 * rad;
  const double dp = p2 - p1, dl = (lon2 - lon1) * rad;
  const double h = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2 * R * std::asin(std::min(1.0, std::sqrt(h)));
}

PairwiseResult pairwise_extremal_coeffs(const Matrix& data, const std::vector<std::array<double, 2>>& coords,
                                        CoordKind kind, int kappa, int threads) {
  if (data.empty()) throw std::invalid_argument("pairwise_extremal_coeffs: empty data");
  const int S = static_cast<int>(data.front().size());
  for (const auto& r : data)
    if (static_cast<int>(r.size()) != S) throw std::invalid_argument("pairwise_extremal_coeffs: ragged matrix");
  if (S < 2) throw std::invalid_argument("pairwise_extremal_coeffs: need at least 2 sites");
  if (static_cast<int>(coords.size()) != S)
    throw std::invalid_argument("pairwise_extremal_coeffs: one coordinate pair per site is required");

  PairwiseResult res;
  for (int i = 0; i < S; ++i)
    for (int j = i + 1; j < S; ++j) {
      PairCoefficient p;
      p.i = i;
      p.j = j;
      p.duplicate_coords = coords[i] == coords[j];
      res.pairs.push_back(p);
    }
  const SimplexGrid grid = make_simplex_grid(2);
  const SimplexGrid half{2, 2, {{0.5}}};
  parallel_for(res.pairs.size(), threads, [&](std::size_t k) {
    PairCoefficient& p = res.pairs[k];
    const auto& a = coords[p.i];
    const auto& b = coords[p.j];
    p.distance = kind == CoordKind::lonlat ? great_circle_km(a[0], a[1], b[0], b[1]) : std::hypot(a[0] - b[0], a[1] - b[1]);
    const Matrix xy = pair_columns(data, p.i, p.j);
    if (xy.size() < 2) {
      p.eta_raw = p.eta_proj = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    p.eta_raw = 2.0 * madogram_pickands(xy, half)[0];
    p.eta_proj = extremal_coefficient(beed_project(madogram_pickands(xy, grid), grid, kappa));
  });
  for (const auto& p : res.pairs) {
    if (p.duplicate_coords)
      res.warnings.push_back("sites " + std::to_string(p.i) + " and " + std::to_string(p.j) + " share coordinates");
    if (std::isnan(p.eta_proj))
      res.warnings.push_back("sites " + std::to_string(p.i) + " and " + std::to_string(p.j) +
                             " have fewer than 2 complete rows");
  }
  return res;
}

Matrix madogram_dissimilarity(const Matrix& data, int threads) {
  if (data.empty()) throw std::invalid_argument("madogram_dissimilarity: empty data");
  const int S = static_cast<int>(data.front().size());
  Matrix D(S, Vec(S, 0.0));
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < S; ++i)
    for (int j = i + 1; j < S; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const Matrix xy = pair_columns(data, i, j);
    if (xy.size() < 2) throw std::invalid_argument("madogram_dissimilarity: fewer than 2 complete rows for a pair");
    Vec a(xy.size()), b(xy.size());
    for (std::size_t r = 0; r < xy.size(); ++r) {
      a[r] = xy[r][0];
      b[r] = xy[r][1];
    }
    const Vec Fa = empirical_cdf(a), Fb = empirical_cdf(b);
    double s = 0.0;
    for (std::size_t r = 0; r < xy.size(); ++r) s += std::abs(Fa[r] - Fb[r]);
    D[i][j] = D[j][i] = s / (2.0 * static_cast<double>(xy.size()));
  });
  return D;
}

PamResult pam_cluster(const Matrix& D, int K, std::uint64_t seed) {
  const int S = static_cast<int>(D.size());
  if (K < 2 || K > S) throw std::invalid_argument("pam_cluster: K must satisfy 2 <= K <= number of sites");

  // candidate order is a seeded permutation; the first best candidate wins ties
  std::vector<int> order(S);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = S - 1; i > 0; --i) std::swap(order[i], order[static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1))]);

  auto total_cost = [&](const std::vector<int>& med) {
    double c = 0.0;
    for (int x = 0; x < S; ++x) {
      double best = 1e300;
      for (int m : med) best = std::min(best, D[x][m]);
      c += best;
    }
    return c;
  };

  // BUILD
  std::vector<int> med;
  std::vector<char> is_med(S, 0);
  Vec nearest(S, 1e300);
  for (int step = 0; step < K; ++step) {
    int pick = -1;
    double best_gain = -1e300;
    for (int cand : order) {
      if (is_med[cand]) continue;
      double gain = 0.0;
      for (int x = 0; x < S; ++x) {
        if (step == 0)
          gain -= D[x][cand];
        else
          gain += std::max(nearest[x] - D[x][cand], 0.0);
      }
      if (gain > best_gain) {
        best_gain = gain;
        pick = cand;
      }
    }
    med.push_back(pick);
    is_med[pick] = 1;
    for (int x = 0; x < S; ++x) nearest[x] = std::min(nearest[x], D[x][pick]);
  }

  PamResult res;
  double cost = total_cost(med);
  res.cost_history.push_back(cost);

  // SWAP
  for (;;) {
    double best = cost;
    int best_pos = -1, best_cand = -1;
    for (std::size_t pos = 0; pos < med.size(); ++pos)
      for (int cand : order) {
        if (is_med[cand]) continue;
        std::vector<int> trial = med;
        trial[pos] = cand;
        const double c = total_cost(trial);
        if (c < best - 1e-12 * (1.0 + std::abs(best))) {
          best = c;
          best_pos = static_cast<int>(pos);
          best_cand = cand;
        }
      }
    if (best_pos < 0) break;
    is_med[med[best_pos]] = 0;
    is_med[best_cand] = 1;
    med[best_pos] = best_cand;
    cost = best;
    res.cost_history.push_back(cost);
  }

  std::sort(med.begin(), med.end());
  res.medoids = med;
  res.labels.assign(S, 0);
  for (int x = 0; x < S; ++x) {
    double bd = 1e300;
    for (int k = 0; k < K; ++k) {
      // a medoid always labels itself
      const double dx = (x == med[k]) ? -1.0 : D[x][med[k]];
      if (dx < bd) {
        bd = dx;
        res.labels[x] = k;
      }
    }
  }
  res.cost = cost;
  return res;
}

PamResult pam_cluster_madogram(const Matrix& data, int K, std::uint64_t seed, int threads) {
  if (data.empty()) throw std::invalid_argument("pam_cluster_madogram: empty data");
  const int S = static_cast<int>(data.front().size());
  if (K < 2 || K > S) throw std::invalid_argument("pam_cluster_madogram: K must satisfy 2 <= K <= number of sites");
  return pam_cluster(madogram_dissimilarity(data, threads), K, seed);
}

}  // namespace extremodep
