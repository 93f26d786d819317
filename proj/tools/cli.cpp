#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <unistd.h>

#include "extremodep/angular.hpp"
#include "extremodep/bayes_np.hpp"
#include "extremodep/bernstein.hpp"
#include "extremodep/gev.hpp"
#include "extremodep/maxstable.hpp"
#include "extremodep/quantile.hpp"
#include "extremodep/synthetic.hpp"
#include "extremodep/tail.hpp"

namespace extremodep::cli {

using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto r = std::from_chars(s.data(), end, v);
  return r.ec == std::errc() && r.ptr == end;
}

bool parse_cell(const std::string& raw, double& v) {
  const std::string s = trim(raw);
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan") {
    v = kNaN;
    return true;
  }
  return parse_double(s, v);
}

double parse_fraction(const std::string& s) {
  double v;
  const auto slash = s.find('/');
  if (slash == std::string::npos) {
    if (!parse_double(s, v)) throw UsageError("not a number: '" + s + "'");
    return v;
  }
  double a, b;
  if (!parse_double(trim(s.substr(0, slash)), a) || !parse_double(trim(s.substr(slash + 1)), b) || b == 0.0)
    throw UsageError("not a fraction: '" + s + "'");
  return a / b;
}

// "extremodep-<kind>-v<version>" plus an echo line "# key=value ...".
std::string file_header(const std::string& kind, const std::vector<std::pair<std::string, std::string>>& echo) {
  std::string h = "extremodep-" + kind + "-v1\n#";
  for (const auto& [k, v] : echo) h += " " + k + "=" + v;
  return h + "\n";
}

std::string cell(double v) { return std::isnan(v) ? "NA" : num(v); }

std::string matrix_csv(const std::vector<std::string>& columns, const Matrix& rows) {
  std::string s;
  for (std::size_t j = 0; j < columns.size(); ++j) s += (j ? "," : "") + columns[j];
  s += "\n";
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) s += (j ? "," : "") + cell(r[j]);
    s += "\n";
  }
  return s;
}

json matrix_json(const Matrix& m) {
  json a = json::array();
  for (const auto& r : m) a.push_back(r);
  return a;
}

PosteriorChain read_chain(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_chain_csv(is);
}

void check_burn(const PosteriorChain& c, int burn) {
  if (burn < 0 || burn >= static_cast<int>(c.records.size()))
    throw UsageError("--burn must be in [0, " + std::to_string(c.records.size()) + ")");
}

std::vector<std::array<double, 2>> coords_of(const Table& t) {
  if (t.columns.size() < 2) throw std::runtime_error("coordinate file needs two columns");
  std::vector<std::array<double, 2>> c;
  for (const auto& r : t.rows) c.push_back({r[0], r[1]});
  return c;
}

std::vector<std::string> param_names(Family f, int d) {
  std::vector<std::string> n;
  auto pairs = [&](const std::string& p) {
    for (int i = 1; i <= d; ++i)
      for (int j = i + 1; j <= d; ++j) n.push_back(p + "_" + std::to_string(i) + std::to_string(j));
  };
  switch (f) {
    case Family::HR:
      pairs("lambda");
      break;
    case Family::TD:
      for (int j = 1; j <= d; ++j) n.push_back("alpha_" + std::to_string(j));
      break;
    case Family::PB:
      n.push_back("alpha");
      pairs("beta");
      break;
  }
  return n;
}

json band_json(const Band& b) { return {{"mean", b.mean}, {"lower", b.lower}, {"upper", b.upper}}; }
json param_json(const ParamSummary& p) { return {{"mean", p.mean}, {"lower", p.lower}, {"upper", p.upper}}; }
json margin_json(const std::array<ParamSummary, 3>& m) {
  return {{"mu", param_json(m[0])}, {"sigma", param_json(m[1])}, {"gamma", param_json(m[2])}};
}

// Option values for every subcommand; unused fields keep their defaults.
struct Options {
  int threads = 0;
  std::uint64_t seed = 1;
  std::string data, coords, chain, sites, out, pairs, hits, diagnostics, extcoeff;
  // fit-angular
  std::string family = "hr";
  double quantile = 0.9;
  bool bayes = false, angles = false;
  int nsim = 50000, nburn = 30000;
  double mcpar = 0.35;
  // beed, cluster
  int kappa = 10, grid = 0, K = 2;
  std::string coord_kind = "lonlat";
  // bayes-np
  std::string prior_k = "nbinom";
  double k_mean = 3.2, k_var = 4.48, p0_max = 0.5;
  bool no_prelim = false;
  int prelim_iter = 2000, kappa0 = 3;
  // summary, predict, failure, qregion
  int burn = 0;
  double cred = 0.95, qcred = 0.9;
  std::string y, u1, u2, type = "both", p;
  int n = 50000, k = 0, N = 0;
  // sim-maxstab
  double nu = 1, range = 3, smooth = 1.5;
  int ny = 50, M = 10000, max_events = 0;
  std::uint64_t max_tries = 1000000;
  // gen
  std::string kind, gev, origin = "0,0";
  double alpha = 0.6, lambda = 0.7, spacing = 0.15;
  int dim = 2, rows = 9, cols = 10, gen_k = 500, gen_n = 2000;
  // fit-gev
  std::vector<int> columns;
};

struct Run {
  json result = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> warnings;
  OutputSet outputs;
  std::optional<std::uint64_t> seed;  // set when the seed comes from an input chain
};

void need(const std::string& v, const char* flag) {
  if (v.empty()) throw UsageError(std::string(flag) + " is required");
}

Table load(Run& run, const std::string& path, const std::string& kind) {
  run.inputs.push_back(path);
  return read_table_file(path, kind);
}

// ---- subcommands ----

void cmd_fit_gev(const Options& o, Run& run) {
  need(o.out, "--out");
  const Table t = load(run, o.data, "data");
  std::vector<int> cols = o.columns;
  if (cols.empty())
    for (std::size_t j = 0; j < t.columns.size(); ++j) cols.push_back(static_cast<int>(j) + 1);
  json fits = json::array();
  for (int c : cols) {
    if (c < 1 || c > static_cast<int>(t.columns.size())) throw UsageError("--column out of range");
    Vec x;
    for (const auto& r : t.rows)
      if (!std::isnan(r[c - 1])) x.push_back(r[c - 1]);
    const GevFit f = gev_fit_mle(x);
    fits.push_back({{"column", t.columns[c - 1]},
                    {"mu", f.params.mu},
                    {"sigma", f.params.sigma},
                    {"gamma", f.params.gamma},
                    {"se", f.se},
                    {"loglik", f.loglik},
                    {"n", x.size()}});
  }
  json j = {{"format", "extremodep-gev-v1"}, {"seed", o.seed}, {"fits", fits}};
  run.outputs.stage(o.out, j.dump(2) + "\n");
  run.result = fits;
}

void cmd_fit_angular(const Options& o, Run& run) {
  const Family f = parse_family(o.family);
  Matrix w;
  if (o.angles) {
    w = load(run, o.data, "angles").rows;
    for (const auto& r : w) {
      double s = 0;
      for (double v : r) s += v;
      if (!(std::abs(s - 1.0) < 1e-6)) throw std::runtime_error("angle rows must sum to 1");
    }
  } else {
    const Table t = load(run, o.data, "data");
    const auto exc = select_exceedances(pseudo_polar(to_unit_frechet(t.rows, FrechetMode::empirical)), o.quantile);
    w = angles_of(exc);
  }
  if (w.empty()) throw std::runtime_error("no angles to fit");
  const int d = static_cast<int>(w[0].size());
  const auto names = param_names(f, d);
  if (!o.bayes) {
    need(o.out, "--out");
    const PppFit fit = ppp_fit_mle(w, f, Vec(param_count(f, d), 1.0));
    json j = {{"format", "extremodep-ppp-fit-v1"},
              {"seed", o.seed},
              {"family", family_name(f)},
              {"dim", d},
              {"n_angles", w.size()},
              {"names", names},
              {"params", fit.params},
              {"se", fit.se},
              {"loglik", fit.loglik},
              {"aic", fit.aic},
              {"tic", fit.tic}};
    run.outputs.stage(o.out, j.dump(2) + "\n");
    run.result = {{"params", fit.params}, {"se", fit.se}};
    return;
  }
  need(o.out, "--out");
  const PppChain c = ppp_fit_bayes(w, f, default_prior(f, d), o.mcpar, o.nsim, o.nburn, o.seed);
  std::vector<std::string> cols{"iter"};
  for (const auto& n : names) cols.push_back("t_" + n);
  for (const auto& n : names) cols.push_back(n);
  cols.push_back("accepted");
  Matrix rows;
  for (int i = 0; i < c.nsim; ++i) {
    Vec r{static_cast<double>(i + 1)};
    r.insert(r.end(), c.transformed[i].begin(), c.transformed[i].end());
    r.insert(r.end(), c.natural[i].begin(), c.natural[i].end());
    r.push_back(c.accepted[i]);
    rows.push_back(std::move(r));
  }
  const std::string head = file_header("ppp-chain", {{"seed", std::to_string(o.seed)},
                                                     {"family", family_name(f)},
                                                     {"dim", std::to_string(d)},
                                                     {"nsim", std::to_string(o.nsim)},
                                                     {"nburn", std::to_string(o.nburn)},
                                                     {"mcpar", num(o.mcpar)},
                                                     {"n_angles", std::to_string(w.size())}});
  run.outputs.stage(o.out, head + matrix_csv(cols, rows));
  run.warnings.insert(run.warnings.end(), c.warnings.begin(), c.warnings.end());
  run.result = {{"names", names},
                {"post_mean", c.post_mean},
                {"post_sd", c.post_sd},
                {"acceptance_rate", c.acceptance_rate},
                {"bic", c.bic}};
}

void cmd_beed(const Options& o, Run& run) {
  need(o.out, "--out");
  const Table t = load(run, o.data, "data");
  const int d = static_cast<int>(t.columns.size());
  const SimplexGrid grid = make_simplex_grid(d, o.grid);
  const Vec Ahat = madogram_pickands(t.rows, grid);
  const BernsteinPickands A = beed_project(Ahat, grid, o.kappa);
  Vec Aproj;
  for (const auto& pt : grid.points) Aproj.push_back(A(pt));
  json j = {{"format", "extremodep-pickands-v1"},
            {"seed", o.seed},
            {"dim", d},
            {"kappa", o.kappa},
            {"beta", A.beta()},
            {"eta", extremal_coefficient(A)},
            {"violation", pickands_violation(A, grid)},
            {"grid", matrix_json(grid.points)},
            {"A_madogram", Ahat},
            {"A_projected", Aproj}};
  run.outputs.stage(o.out, j.dump(2) + "\n");
  run.result = {{"kappa", o.kappa}, {"eta", extremal_coefficient(A)}};
}

void cmd_cluster(const Options& o, Run& run) {
  need(o.out, "--out");
  const Table t = load(run, o.data, "data");
  const auto coords = coords_of(load(run, o.coords, "sites"));
  if (coords.size() != t.columns.size()) throw std::runtime_error("coordinate rows differ from data columns");
  const CoordKind kind = o.coord_kind == "euclidean" ? CoordKind::euclidean : CoordKind::lonlat;
  const PamResult pam = pam_cluster_madogram(t.rows, o.K, o.seed, o.threads);
  std::string s = file_header("clusters", {{"seed", std::to_string(o.seed)}, {"k", std::to_string(o.K)}});
  s += "site,cluster,medoid\n";
  for (std::size_t i = 0; i < pam.labels.size(); ++i) {
    const bool med = std::find(pam.medoids.begin(), pam.medoids.end(), static_cast<int>(i)) != pam.medoids.end();
    s += std::to_string(i + 1) + "," + std::to_string(pam.labels[i] + 1) + "," + (med ? "1" : "0") + "\n";
  }
  run.outputs.stage(o.out, s);
  if (!o.pairs.empty()) {
    const PairwiseResult pr = pairwise_extremal_coeffs(t.rows, coords, kind, o.kappa, o.threads);
    std::string p = file_header("pairs", {{"seed", std::to_string(o.seed)},
                                          {"kappa", std::to_string(o.kappa)},
                                          {"coords", o.coord_kind}});
    p += std::string("pair,") + (kind == CoordKind::lonlat ? "distance_km" : "distance") + ",eta_raw,eta_proj\n";
    for (const auto& c : pr.pairs)
      p += std::to_string(c.i + 1) + "-" + std::to_string(c.j + 1) + "," + num(c.distance) + "," + num(c.eta_raw) +
           "," + num(c.eta_proj) + "\n";
    run.outputs.stage(o.pairs, p);
    run.warnings.insert(run.warnings.end(), pr.warnings.begin(), pr.warnings.end());
  }
  std::vector<int> medoids;
  for (int m : pam.medoids) medoids.push_back(m + 1);
  run.result = {{"medoids", medoids}, {"cost", pam.cost}};
}

void cmd_bayes_np(const Options& o, Run& run) {
  need(o.out, "--out");
  const Table t = load(run, o.data, "data");
  if (t.columns.size() != 2) throw std::runtime_error("bayes-np needs two data columns");
  McmcConfig cfg;
  cfg.nsim = o.nsim;
  cfg.seed = o.seed;
  cfg.priors.prior_k = o.prior_k == "pois" ? KappaPrior::pois : KappaPrior::nbinom;
  cfg.priors.k_mean = o.k_mean;
  cfg.priors.k_var = o.k_var;
  cfg.priors.p0_max = o.p0_max;
  cfg.mar_prelim = !o.no_prelim;
  cfg.prelim_iter = o.prelim_iter;
  cfg.kappa0 = o.kappa0;
  const PosteriorChain c = joint_mcmc(t.rows, cfg);
  std::ostringstream os;
  write_chain_csv(os, c);
  run.outputs.stage(o.out, os.str());
  run.warnings.insert(run.warnings.end(), c.warnings.begin(), c.warnings.end());
  run.result = {{"iterations", c.records.size()}, {"n_data", c.n_data}};
}

void cmd_summary(const Options& o, Run& run) {
  need(o.out, "--out");
  run.inputs.push_back(o.chain);
  const PosteriorChain c = read_chain(o.chain);
  check_burn(c, o.burn);
  run.seed = c.config.seed;
  const ChainSummary s = chain_summary(c, o.burn, o.cred);
  json j = {{"format", "extremodep-summary-v1"},
            {"seed", c.config.seed},
            {"burn", s.burn},
            {"cred", s.cred},
            {"grid_A", s.grid_A},
            {"A", band_json(s.A)},
            {"grid_h", s.grid_h},
            {"h", band_json(s.h)},
            {"p0", param_json(s.p0)},
            {"p1", param_json(s.p1)},
            {"kappa", param_json(s.kappa)},
            {"margin1", margin_json(s.mar1)},
            {"margin2", margin_json(s.mar2)}};
  run.outputs.stage(o.out, j.dump(2) + "\n");
  if (!o.diagnostics.empty()) {
    Matrix rows;
    for (const auto& r : diagnostics(c))
      rows.push_back({static_cast<double>(r.iteration), r.tau1, r.tau2, static_cast<double>(r.kappa), r.acc1, r.acc2,
                      r.acc3, r.target});
    run.outputs.stage(o.diagnostics, file_header("diagnostics", {{"seed", std::to_string(c.config.seed)}}) +
                                         matrix_csv({"iteration", "tau1", "tau2", "kappa", "acc1", "acc2", "acc3", "target"}, rows));
  }
  run.result = {{"kappa_mean", s.kappa.mean}, {"p0_mean", s.p0.mean}, {"p1_mean", s.p1.mean}};
}

void cmd_predict(const Options& o, Run& run) {
  run.inputs.push_back(o.chain);
  const PosteriorChain c = read_chain(o.chain);
  check_burn(c, o.burn);
  run.seed = c.config.seed;
  const Vec y = parse_list(o.y);
  if (y.size() != 2) throw UsageError("--y needs two values");
  const double p = predictive_exceedance(c, o.burn, {y[0], y[1]});
  run.result = {{"y", y}, {"exceedance", p}};
  if (!o.out.empty()) {
    json j = {{"format", "extremodep-predict-v1"}, {"seed", c.config.seed}, {"burn", o.burn}, {"y", y}, {"exceedance", p}};
    run.outputs.stage(o.out, j.dump(2) + "\n");
  }
}

void cmd_failure(const Options& o, Run& run) {
  need(o.out, "--out");
  run.inputs.push_back(o.chain);
  const PosteriorChain c = read_chain(o.chain);
  check_burn(c, o.burn);
  const Vec u1 = parse_range(o.u1), u2 = parse_range(o.u2);
  FailureKind kind;
  if (o.type == "or")
    kind = FailureKind::or_;
  else if (o.type == "and")
    kind = FailureKind::and_;
  else if (o.type == "both")
    kind = FailureKind::both;
  else
    throw UsageError("--type must be or, and or both");
  const FailureGrid g = failure_probability_posterior(c, o.burn, u1, u2, kind, o.n, o.seed, o.threads);
  Matrix rows;
  for (const auto& cl : g.cells) rows.push_back({cl.u1, cl.u2, cl.p_or, cl.se_or, cl.p_and, cl.se_and});
  run.outputs.stage(o.out, file_header("failure", {{"seed", std::to_string(o.seed)},
                                                   {"burn", std::to_string(o.burn)},
                                                   {"n", std::to_string(g.n)},
                                                   {"type", o.type}}) +
                               matrix_csv({"u1", "u2", "p_or", "se_or", "p_and", "se_and"}, rows));
  run.result = {{"cells", g.cells.size()}, {"n", g.n}};
}

void cmd_qregion(const Options& o, Run& run) {
  need(o.out, "--out");
  run.inputs.push_back(o.chain);
  const PosteriorChain c = read_chain(o.chain);
  check_burn(c, o.burn);
  run.seed = c.config.seed;
  if (o.k < 1 || o.N <= o.k) throw UsageError("--k and --N must satisfy 1 <= k < N");
  const Vec p = parse_list(o.p);
  const QuantileRegionSet q = quantile_regions(c, o.burn, p, o.k, o.N, o.qcred);
  json j = {{"format", "extremodep-qregion-v1"},
            {"seed", c.config.seed},
            {"burn", o.burn},
            {"k", o.k},
            {"N", o.N},
            {"cred", o.qcred},
            {"p", p},
            {"w", q.w},
            {"ghat", {q.ghat[0], q.ghat[1], q.ghat[2]}},
            {"Shat", {matrix_json(q.shat[0]), matrix_json(q.shat[1]), matrix_json(q.shat[2])}},
            {"nuShat", q.nu_shat}};
  for (std::size_t a = 0; a < q.regions.size(); ++a) {
    const auto& b = q.regions[a].boundary;
    j["Qset_P" + std::to_string(a + 1)] = {matrix_json(b[0]), matrix_json(b[1]), matrix_json(b[2])};
  }
  j["used"] = q.used;
  j["skipped"] = q.skipped;
  run.outputs.stage(o.out, j.dump(2) + "\n");
  run.warnings.insert(run.warnings.end(), q.warnings.begin(), q.warnings.end());
  run.result = {{"used", q.used}, {"skipped", q.skipped}, {"nuShat", q.nu_shat}};
}

void cmd_sim_maxstab(const Options& o, Run& run) {
  need(o.out, "--out");
  SiteSet sites;
  sites.coords = coords_of(load(run, o.sites, "sites"));
  const PowExpCorr corr{o.range, o.smooth};
  const MaxStableField f = o.max_events > 0
                               ? conditional_sim(sites, o.nu, corr, o.ny, o.max_events, o.seed, o.max_tries, o.M, o.threads)
                               : sim_extremal_t(sites, o.nu, corr, o.ny, o.M, o.seed, o.threads);
  const std::size_t d = sites.coords.size();
  std::vector<std::string> cols;
  for (std::size_t s = 1; s <= d; ++s) cols.push_back("s" + std::to_string(s));
  const std::vector<std::pair<std::string, std::string>> echo{{"seed", std::to_string(o.seed)},
                                                              {"nu", num(o.nu)},
                                                              {"range", num(o.range)},
                                                              {"smooth", num(o.smooth)},
                                                              {"ny", std::to_string(o.ny)},
                                                              {"M", std::to_string(o.M)},
                                                              {"max_events", std::to_string(o.max_events)}};
  run.outputs.stage(o.out, file_header("field", echo) + matrix_csv(cols, f.vals));
  if (!o.hits.empty()) {
    std::string s = file_header("hits", echo);
    for (std::size_t j = 0; j < d; ++j) s += (j ? "," : "") + cols[j];
    s += "\n";
    for (const auto& r : f.hits) {
      for (std::size_t j = 0; j < d; ++j) s += (j ? "," : "") + std::to_string(r[j]);
      s += "\n";
    }
    run.outputs.stage(o.hits, s);
  }
  if (!o.extcoeff.empty()) {
    Matrix rows;
    for (const auto& e : extcoeff_vs_distance(f, sites, o.threads))
      rows.push_back({static_cast<double>(e.i + 1), static_cast<double>(e.j + 1), e.distance, e.eta, e.eta_proj});
    run.outputs.stage(o.extcoeff, file_header("extcoeff", echo) + matrix_csv({"i", "j", "distance", "eta", "eta_proj"}, rows));
  }
  run.warnings.insert(run.warnings.end(), f.warnings.begin(), f.warnings.end());
  run.result = {{"replicates", f.vals.size()}, {"tries", f.tries}, {"acceptance", f.acceptance}};
}

void cmd_gen(const Options& o, Run& run) {
  need(o.out, "--out");
  if (o.kind == "logistic-maxima") {
    if (o.gen_k < 1 || o.dim < 2) throw UsageError("logistic-maxima needs --k >= 1 and --dim >= 2");
    Rng rng(o.seed);
    Matrix z = sample_logistic(o.gen_k, o.dim, o.alpha, rng);
    std::vector<std::pair<std::string, std::string>> echo{
        {"seed", std::to_string(o.seed)}, {"kind", o.kind}, {"alpha", num(o.alpha)}, {"k", std::to_string(o.gen_k)}};
    if (!o.gev.empty()) {
      const Vec g = parse_list(o.gev);
      if (g.size() != 3) throw UsageError("--gev needs mu,sigma,gamma");
      const GevParams gp{g[0], g[1], g[2]};
      validate(gp);
      for (auto& r : z)
        for (double& v : r) v = from_frechet(v, gp);
      echo.emplace_back("gev", o.gev);
    }
    std::vector<std::string> cols;
    for (int j = 1; j <= o.dim; ++j) cols.push_back("y" + std::to_string(j));
    run.outputs.stage(o.out, file_header("data", echo) + matrix_csv(cols, z));
  } else if (o.kind == "hr-angles") {
    const Matrix w = angular_sample_parametric({Family::HR, 2, {o.lambda}}, o.gen_n, o.seed);
    run.outputs.stage(o.out, file_header("angles", {{"seed", std::to_string(o.seed)},
                                                    {"kind", o.kind},
                                                    {"lambda", num(o.lambda)},
                                                    {"n", std::to_string(o.gen_n)}}) +
                                 matrix_csv({"w1", "w2"}, w));
  } else if (o.kind == "maxstab-sites") {
    if (o.rows < 1 || o.cols < 1 || !(o.spacing > 0)) throw UsageError("maxstab-sites needs positive --rows, --cols, --spacing");
    const Vec orig = parse_list(o.origin);
    if (orig.size() != 2) throw UsageError("--origin needs x,y");
    Matrix c;
    for (int r = 0; r < o.rows; ++r)
      for (int q = 0; q < o.cols; ++q) c.push_back({orig[0] + q * o.spacing, orig[1] + r * o.spacing});
    run.outputs.stage(o.out, file_header("sites", {{"seed", std::to_string(o.seed)},
                                                   {"kind", o.kind},
                                                   {"rows", std::to_string(o.rows)},
                                                   {"cols", std::to_string(o.cols)},
                                                   {"spacing", num(o.spacing)}}) +
                                 matrix_csv({"x", "y"}, c));
  } else {
    throw UsageError("--kind must be logistic-maxima, hr-angles or maxstab-sites");
  }
  run.result = {{"kind", o.kind}};
}

}  // namespace

Vec parse_range(const std::string& s) {
  const std::string t = trim(s);
  if (t.find(':') == std::string::npos) return parse_list(t);
  const auto parts = split(t, ':');
  double a, b, n;
  if (parts.size() != 3 || !parse_double(parts[0], a) || !parse_double(parts[1], b) || !parse_double(parts[2], n) ||
      n < 1 || n != std::floor(n) || !std::isfinite(a) || !std::isfinite(b))
    throw UsageError("malformed range '" + s + "' (expected a:b:n)");
  if (n == 1 && a != b) throw UsageError("range '" + s + "' with n = 1 needs a = b");
  Vec v(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / (n - 1);
  return v;
}

Vec parse_list(const std::string& s) {
  if (trim(s).empty()) throw UsageError("empty value list");
  Vec v;
  for (const auto& part : split(s, ',')) v.push_back(parse_fraction(part));
  return v;
}

Table read_table(std::istream& is, const std::string& kind) {
  Table t;
  std::string line;
  bool first = true, header_done = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (first && line.rfind("extremodep-", 0) == 0) {
      const std::string want = "extremodep-" + kind + "-v1";
      if (line != want) throw std::runtime_error("file header '" + line + "' does not match " + want);
      first = false;
      continue;
    }
    first = false;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (!header_done) {
      header_done = true;
      double v;
      bool numeric = true;
      for (const auto& c : cells) numeric = numeric && parse_cell(c, v) && !c.empty();
      if (!numeric) {
        t.columns = cells;
        continue;
      }
      for (std::size_t j = 0; j < cells.size(); ++j) t.columns.push_back("V" + std::to_string(j + 1));
    }
    if (cells.size() != t.columns.size())
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                               " fields");
    Vec r(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      if (!parse_cell(cells[j], r[j])) throw std::runtime_error("line " + std::to_string(lineno) + ": bad number '" + cells[j] + "'");
    t.rows.push_back(std::move(r));
  }
  if (t.rows.empty()) throw std::runtime_error("no data rows");
  return t;
}

Table read_table_file(const std::string& path, const std::string& kind) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  try {
    return read_table(is, kind);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void OutputSet::stage(const std::string& path, std::string content) { files_.emplace_back(path, std::move(content)); }

std::vector<std::string> OutputSet::paths() const {
  std::vector<std::string> p;
  for (const auto& f : files_) p.push_back(f.first);
  return p;
}

void OutputSet::commit() {
  std::vector<std::string> temps;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& t : temps) std::filesystem::remove(t, ec);
  };
  for (const auto& [path, content] : files_) {
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    std::ofstream os(tmp, std::ios::binary);
    if (!os) {
      cleanup();
      throw std::runtime_error("cannot write " + path);
    }
    temps.push_back(tmp);
    os << content;
    os.close();
    if (!os) {
      cleanup();
      throw std::runtime_error("write failed for " + path);
    }
  }
  for (std::size_t i = 0; i < files_.size(); ++i) {
    std::error_code ec;
    std::filesystem::rename(temps[i], files_[i].first, ec);
    if (ec) {
      cleanup();
      throw std::runtime_error("cannot rename into " + files_[i].first + ": " + ec.message());
    }
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Multivariate and spatial extreme-value dependence toolkit", "extremodep"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", o.threads, "worker threads (EXTREMODEP_THREADS overrides)")->check(CLI::NonNegativeNumber);

  auto seed_opt = [&](CLI::App* s) { s->add_option("--seed", o.seed, "random seed")->capture_default_str(); };
  auto data_opt = [&](CLI::App* s, const char* help) {
    s->add_option("--data", o.data, help)->required()->check(CLI::ExistingFile);
  };
  auto chain_opt = [&](CLI::App* s) {
    s->add_option("--chain", o.chain, "chain CSV from bayes-np")->required()->check(CLI::ExistingFile);
    s->add_option("--burn", o.burn, "iterations discarded")->capture_default_str();
  };

  auto* fit_gev = app.add_subcommand("fit-gev", "GEV maximum likelihood per column");
  data_opt(fit_gev, "CSV, one column per component");
  fit_gev->add_option("--column", o.columns, "1-based columns (default all)");
  fit_gev->add_option("--out", o.out, "JSON output");
  seed_opt(fit_gev);

  auto* fit_ang = app.add_subcommand("fit-angular", "parametric angular density fit");
  fit_ang->add_option("--family", o.family, "pb, td or hr")->capture_default_str();
  data_opt(fit_ang, "raw data CSV, or angles with --angles");
  fit_ang->add_flag("--angles", o.angles, "input rows are simplex angles");
  fit_ang->add_option("--quantile", o.quantile, "radius threshold quantile")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  fit_ang->add_flag("--bayes", o.bayes, "random-walk Metropolis instead of maximum likelihood");
  fit_ang->add_option("--nsim", o.nsim)->capture_default_str();
  fit_ang->add_option("--nburn", o.nburn)->capture_default_str();
  fit_ang->add_option("--mcpar", o.mcpar, "proposal variance")->capture_default_str();
  fit_ang->add_option("--out", o.out, "JSON (MLE) or chain CSV (--bayes)");
  seed_opt(fit_ang);

  auto* beed = app.add_subcommand("beed", "madogram Pickands estimate with Bernstein projection");
  data_opt(beed, "maxima CSV");
  beed->add_option("--kappa", o.kappa, "polynomial order")->capture_default_str()->check(CLI::PositiveNumber);
  beed->add_option("--grid", o.grid, "simplex subdivisions (0 = default)")->capture_default_str();
  beed->add_option("--out", o.out, "JSON output");
  seed_opt(beed);

  auto* cluster = app.add_subcommand("cluster", "PAM clustering of stations by F-madogram");
  data_opt(cluster, "maxima CSV, one column per site");
  cluster->add_option("--coords", o.coords, "site coordinates CSV")->required()->check(CLI::ExistingFile);
  cluster->add_option("--coord-kind", o.coord_kind, "lonlat or euclidean")
      ->capture_default_str()
      ->check(CLI::IsMember({"lonlat", "euclidean"}));
  cluster->add_option("--k", o.K, "number of clusters")->capture_default_str()->check(CLI::PositiveNumber);
  cluster->add_option("--kappa", o.kappa, "polynomial order for pairwise coefficients")->capture_default_str();
  cluster->add_option("--out", o.out, "cluster CSV (site, cluster)");
  cluster->add_option("--pairs", o.pairs, "pairwise coefficient CSV");
  seed_opt(cluster);

  auto* bnp = app.add_subcommand("bayes-np", "trans-dimensional MCMC for the Bernstein angular model");
  data_opt(bnp, "bivariate maxima CSV");
  bnp->add_option("--nsim", o.nsim)->capture_default_str()->check(CLI::PositiveNumber);
  bnp->add_option("--prior-k", o.prior_k)->capture_default_str()->check(CLI::IsMember({"nbinom", "pois"}));
  bnp->add_option("--k-mean", o.k_mean)->capture_default_str();
  bnp->add_option("--k-var", o.k_var)->capture_default_str();
  bnp->add_option("--p0-max", o.p0_max)->capture_default_str();
  bnp->add_flag("--no-prelim", o.no_prelim, "skip the preliminary marginal run");
  bnp->add_option("--prelim-iter", o.prelim_iter)->capture_default_str();
  bnp->add_option("--kappa0", o.kappa0)->capture_default_str();
  bnp->add_option("--out", o.out, "chain CSV");
  seed_opt(bnp);

  auto* summary = app.add_subcommand("summary", "posterior summaries of a chain");
  chain_opt(summary);
  summary->add_option("--cred", o.cred)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  summary->add_option("--out", o.out, "JSON output");
  summary->add_option("--diagnostics", o.diagnostics, "adaptation trace CSV");

  auto* predict = app.add_subcommand("predict", "posterior predictive joint exceedance");
  chain_opt(predict);
  predict->add_option("--y", o.y, "y1,y2")->required();
  predict->add_option("--out", o.out, "JSON output");

  auto* failure = app.add_subcommand("failure", "failure-region probabilities on a threshold grid");
  chain_opt(failure);
  failure->add_option("--u1", o.u1, "a:b:n or list")->required();
  failure->add_option("--u2", o.u2, "a:b:n or list")->required();
  failure->add_option("--type", o.type, "or, and or both")->capture_default_str();
  failure->add_option("--n", o.n, "simulated points")->capture_default_str();
  failure->add_option("--out", o.out, "grid CSV");
  seed_opt(failure);

  auto* qregion = app.add_subcommand("qregion", "extreme quantile regions");
  chain_opt(qregion);
  qregion->add_option("--p", o.p, "probabilities, e.g. 1/600,1/1200")->required();
  qregion->add_option("--k", o.k, "number of block maxima")->required();
  qregion->add_option("--N", o.N, "number of raw observations")->required();
  qregion->add_option("--cred", o.qcred)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  qregion->add_option("--out", o.out, "JSON output");

  auto* sim = app.add_subcommand("sim-maxstab", "extremal-t max-stable field simulation");
  sim->add_option("--sites", o.sites, "site coordinates CSV")->required()->check(CLI::ExistingFile);
  sim->add_option("--nu", o.nu)->capture_default_str();
  sim->add_option("--range", o.range)->capture_default_str();
  sim->add_option("--smooth", o.smooth)->capture_default_str();
  sim->add_option("--ny", o.ny, "replicates")->capture_default_str();
  sim->add_option("--M", o.M, "spectral truncation")->capture_default_str();
  sim->add_option("--max-events", o.max_events, "keep replicates with at most this many events (0 = all)")
      ->capture_default_str();
  sim->add_option("--max-tries", o.max_tries)->capture_default_str();
  sim->add_option("--out", o.out, "field CSV");
  sim->add_option("--hits", o.hits, "hitting scenario CSV");
  sim->add_option("--extcoeff", o.extcoeff, "pairwise extremal coefficient CSV");
  seed_opt(sim);

  auto* gen = app.add_subcommand("gen", "synthetic datasets");
  gen->add_option("--kind", o.kind, "logistic-maxima, hr-angles or maxstab-sites")->required();
  gen->add_option("--alpha", o.alpha)->capture_default_str();
  gen->add_option("--k", o.gen_k, "rows (logistic-maxima)")->capture_default_str();
  gen->add_option("--dim", o.dim)->capture_default_str();
  gen->add_option("--gev", o.gev, "mu,sigma,gamma margins (logistic-maxima)");
  gen->add_option("--lambda", o.lambda)->capture_default_str();
  gen->add_option("--n", o.gen_n, "angles (hr-angles)")->capture_default_str();
  gen->add_option("--rows", o.rows)->capture_default_str();
  gen->add_option("--cols", o.cols)->capture_default_str();
  gen->add_option("--spacing", o.spacing)->capture_default_str();
  gen->add_option("--origin", o.origin, "x,y")->capture_default_str();
  gen->add_option("--out", o.out, "CSV output");
  seed_opt(gen);

  const std::map<CLI::App*, std::function<void(const Options&, Run&)>> dispatch{
      {fit_gev, cmd_fit_gev}, {fit_ang, cmd_fit_angular}, {beed, cmd_beed},       {cluster, cmd_cluster},
      {bnp, cmd_bayes_np},    {summary, cmd_summary},     {predict, cmd_predict}, {failure, cmd_failure},
      {qregion, cmd_qregion}, {sim, cmd_sim_maxstab},     {gen, cmd_gen}};

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const auto start = std::chrono::steady_clock::now();
  o.threads = resolve_threads(o.threads);
  Run run;
  try {
    dispatch.at(sub)(o, run);
    run.outputs.commit();
  } catch (const UsageError& e) {
    err << "extremodep " << sub->get_name() << ": " << e.what() << "\n" << sub->help();
    return 2;
  } catch (const std::exception& e) {
    json j = {{"error", e.what()}, {"subcommand", sub->get_name()}, {"exit_code", 1}};
    err << j.dump() << "\n";
    return 1;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest = {{"tool", "extremodep"},
                   {"version", kVersion},
                   {"subcommand", sub->get_name()},
                   {"seed", run.seed.value_or(o.seed)},
                   {"threads", o.threads},
                   {"inputs", run.inputs},
                   {"outputs", run.outputs.paths()},
                   {"wall_time_s", wall},
                   {"warnings", run.warnings},
                   {"result", run.result}};
  out << manifest.dump(2) << "\n";
  return 0;
}

}  // namespace extremodep::cli
