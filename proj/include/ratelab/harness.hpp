#pragma once

// Experiment configuration, m-sweeps with cached spectral data, slope fits, verdicts and file output.

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ratelab/effdim_param.hpp"
#include "ratelab/errors.hpp"
#include "ratelab/estimator.hpp"
#include "ratelab/filters.hpp"
#include "ratelab/index_fn.hpp"
#include "ratelab/kernels_gram.hpp"
#include "ratelab/mercer_model.hpp"
#include "ratelab/rng.hpp"

namespace ratelab {

using json = nlohmann::ordered_json;

inline constexpr std::uint64_t default_master_seed = 20240611;

struct experiment_config {
  model_params model;
  json phi;  ///< {"kind":"holder","r":..} | {"kind":"log","p":..,"nu":..} | {"kind":"product","factors":[..]}
  double R = 1.0;
  double source_s = 1.0;
  std::string noise_kind = "gaussian";
  double noise_sigma = 0.5;
  std::string filter = "tikhonov";
  int filter_nu = 2;
  std::optional<double> filter_tau;  ///< landweber step; defaults to 1/kappa^2
  lambda_rule rule = lambda_rule::psi;
  std::vector<std::size_t> m_grid;
  std::size_t replicates = 16;
  double eta = 0.1;
  std::uint64_t seed = default_master_seed;
  double tolerance = 0.1;
  unsigned threads = 1;
  std::vector<std::string> norms;  ///< norms that get a verdict; empty means the rule's default
};

inline std::vector<std::size_t> default_m_grid() {
  std::vector<std::size_t> g;
  for (int k = 5; k <= 12; ++k) g.push_back(std::size_t{1} << k);
  return g;
}

namespace detail {

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw config_error("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw config_error("config: unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
  }
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  const std::string path = where.empty() ? key : where + "." + key;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw config_error("config: key '" + path + "' has the wrong type");
  }
}

inline double positive(double v, const std::string& key) {
  if (!(v > 0.0) || !std::isfinite(v)) throw config_error("config: key '" + key + "' must be positive");
  return v;
}

}  // namespace detail

/// Index function from its JSON description on [0, domain_max].
inline index_function parse_phi(const json& j, double domain_max, const std::string& where = "phi") {
  if (!j.is_object() || !j.contains("kind")) throw config_error("config: '" + where + "' needs a 'kind'");
  const auto kind = detail::get_as<std::string>(j, "kind", where, "");
  try {
    if (kind == "holder") {
      detail::reject_unknown(j, where, {"kind", "r"});
      if (!j.contains("r")) throw config_error("config: key '" + where + ".r' is required");
      return index_function::holder(detail::get_as<double>(j, "r", where, 0.0), domain_max);
    }
    if (kind == "log") {
      detail::reject_unknown(j, where, {"kind", "p", "nu"});
      return index_function::logarithmic(detail::get_as<double>(j, "p", where, 1.0),
                                         detail::get_as<double>(j, "nu", where, 1.0), domain_max);
    }
    if (kind == "product") {
      detail::reject_unknown(j, where, {"kind", "factors"});
      if (!j.contains("factors") || !j.at("factors").is_array() || j.at("factors").empty())
        throw config_error("config: key '" + where + ".factors' must be a nonempty array");
      std::vector<index_function> parts;
      for (std::size_t i = 0; i < j.at("factors").size(); ++i)
        parts.push_back(parse_phi(j.at("factors")[i], domain_max, where + ".factors[" + std::to_string(i) + "]"));
      return index_function::product(parts);
    }
  } catch (const config_error&) {
    throw;
  } catch (const error& e) {
    throw config_error("config: key '" + where + "': " + e.what());
  }
  throw config_error("config: key '" + where + ".kind' must be holder, log or product");
}

inline experiment_config parse_config(const json& j) {
  using detail::get_as;
  detail::reject_unknown(j, "", {"model", "phi", "noise", "filter", "rule", "m_grid", "replicates", "eta", "seed",
                                 "tolerance", "threads", "norms"});
  experiment_config c;
  if (!j.contains("model")) throw config_error("config: key 'model' is required");
  const json& mj = j.at("model");
  detail::reject_unknown(mj, "model", {"b", "alpha", "beta", "N_trunc", "d", "spectrum_rule", "source", "noise"});
  if (!mj.contains("b")) throw config_error("config: key 'model.b' is required");
  c.model.b = get_as<double>(mj, "b", "model", 2.0);
  if (!(c.model.b >= 1.0)) throw config_error("config: key 'model.b' must be >= 1");
  c.model.alpha = detail::positive(get_as<double>(mj, "alpha", "model", 1.0), "model.alpha");
  c.model.beta = detail::positive(get_as<double>(mj, "beta", "model", 1.0), "model.beta");
  c.model.n_trunc = get_as<int>(mj, "N_trunc", "model", 512);
  c.model.d = get_as<int>(mj, "d", "model", 1);
  if (c.model.n_trunc < 8) throw config_error("config: key 'model.N_trunc' must be >= 8");
  if (c.model.d < 1) throw config_error("config: key 'model.d' must be >= 1");
  try {
    c.model.rule = spectrum_rule_from_name(get_as<std::string>(mj, "spectrum_rule", "model", "lower"));
  } catch (const parameter_error&) {
    throw config_error("config: key 'model.spectrum_rule' must be lower, midpoint or upper");
  }
  if (c.model.rule == spectrum_rule::explicit_values)
    throw config_error("config: key 'model.spectrum_rule' explicit spectra are not supported in configs");

  std::optional<double> source_r;
  if (mj.contains("source")) {
    const json& sj = mj.at("source");
    detail::reject_unknown(sj, "model.source", {"kind", "R", "s", "r"});
    const auto kind = get_as<std::string>(sj, "kind", "model.source", "power");
    if (kind != "power") throw config_error("config: key 'model.source.kind' must be 'power'");
    c.R = detail::positive(get_as<double>(sj, "R", "model.source", 1.0), "model.source.R");
    c.source_s = get_as<double>(sj, "s", "model.source", 1.0);
    if (sj.contains("r")) source_r = get_as<double>(sj, "r", "model.source", 0.0);
  }
  if (j.contains("phi"))
    c.phi = j.at("phi");
  else if (source_r)
    c.phi = json{{"kind", "holder"}, {"r", *source_r}};
  else
    throw config_error("config: key 'phi' (or 'model.source.r') is required");

  const json* nj = mj.contains("noise") ? &mj.at("noise") : (j.contains("noise") ? &j.at("noise") : nullptr);
  if (nj) {
    detail::reject_unknown(*nj, "noise", {"kind", "sigma"});
    c.noise_kind = get_as<std::string>(*nj, "kind", "noise", "gaussian");
    if (c.noise_kind != "gaussian" && c.noise_kind != "two_point")
      throw config_error("config: key 'noise.kind' must be gaussian or two_point");
    c.noise_sigma = get_as<double>(*nj, "sigma", "noise", 0.5);
    if (!(c.noise_sigma >= 0.0)) throw config_error("config: key 'noise.sigma' must be >= 0");
  }
  if (j.contains("filter")) {
    const json& fj = j.at("filter");
    if (fj.is_string()) {
      c.filter = fj.get<std::string>();
    } else {
      detail::reject_unknown(fj, "filter", {"name", "nu", "tau"});
      c.filter = get_as<std::string>(fj, "name", "filter", "tikhonov");
      c.filter_nu = get_as<int>(fj, "nu", "filter", 2);
      if (fj.contains("tau")) c.filter_tau = detail::positive(get_as<double>(fj, "tau", "filter", 1.0), "filter.tau");
    }
    const std::set<std::string> names{"tikhonov", "iterated_tikhonov", "landweber", "cutoff", "spectral_cutoff"};
    if (!names.count(c.filter)) throw config_error("config: key 'filter' names an unknown filter '" + c.filter + "'");
  }
  try {
    c.rule = lambda_rule_from_name(get_as<std::string>(j, "rule", "", "psi"));
  } catch (const parameter_error&) {
    throw config_error("config: key 'rule' must be psi, theta, holder_psi_closed or holder_theta_closed");
  }
  if (j.contains("m_grid")) {
    const json& g = j.at("m_grid");
    if (g.is_array()) {
      for (const auto& v : g) {
        if (!v.is_number_integer() || v.get<long long>() < 2) throw config_error("config: key 'm_grid' entries must be integers >= 2");
        c.m_grid.push_back(v.get<std::size_t>());
      }
    } else if (g.is_object()) {
      detail::reject_unknown(g, "m_grid", {"log2_from", "log2_to"});
      const int a = get_as<int>(g, "log2_from", "m_grid", 5), b = get_as<int>(g, "log2_to", "m_grid", 12);
      if (a < 1 || b > 24 || b < a) throw config_error("config: key 'm_grid' has an invalid log2 range");
      for (int k = a; k <= b; ++k) c.m_grid.push_back(std::size_t{1} << k);
    } else {
      throw config_error("config: key 'm_grid' must be an array or {log2_from, log2_to}");
    }
    for (std::size_t i = 1; i < c.m_grid.size(); ++i)
      if (c.m_grid[i] <= c.m_grid[i - 1]) throw config_error("config: key 'm_grid' must be strictly increasing");
  } else {
    c.m_grid = default_m_grid();
  }
  c.replicates = get_as<std::size_t>(j, "replicates", "", 16);
  if (c.replicates < 1) throw config_error("config: key 'replicates' must be >= 1");
  c.eta = get_as<double>(j, "eta", "", 0.1);
  if (!(c.eta > 0.0 && c.eta < 1.0)) throw config_error("config: key 'eta' must lie in (0, 1)");
  c.seed = get_as<std::uint64_t>(j, "seed", "", default_master_seed);
  c.tolerance = detail::positive(get_as<double>(j, "tolerance", "", 0.1), "tolerance");
  c.threads = get_as<unsigned>(j, "threads", "", 1);
  if (j.contains("norms")) {
    c.norms = get_as<std::vector<std::string>>(j, "norms", "", {});
    for (const auto& n : c.norms)
      if (n != "L2" && n != "RKHS") throw config_error("config: key 'norms' entries must be L2 or RKHS");
  }
  return c;
}

inline experiment_config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw config_error("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// RATE_LAB_SEED overrides the master seed.
inline void apply_env_overrides(experiment_config& c) {
  if (const char* s = std::getenv("RATE_LAB_SEED")) {
    try {
      c.seed = std::stoull(s);
    } catch (const std::exception&) {
      throw config_error("RATE_LAB_SEED must be an unsigned integer");
    }
  }
}

inline json config_to_json(const experiment_config& c) {
  json j;
  j["model"] = {{"b", c.model.b},
                {"alpha", c.model.alpha},
                {"beta", c.model.beta},
                {"N_trunc", c.model.n_trunc},
                {"d", c.model.d},
                {"spectrum_rule", spectrum_rule_name(c.model.rule)},
                {"source", {{"kind", "power"}, {"R", c.R}, {"s", c.source_s}}}};
  j["phi"] = c.phi;
  j["noise"] = {{"kind", c.noise_kind}, {"sigma", c.noise_sigma}};
  json f = {{"name", c.filter}};
  if (c.filter == "iterated_tikhonov") f["nu"] = c.filter_nu;
  if (c.filter_tau) f["tau"] = *c.filter_tau;
  j["filter"] = f;
  j["rule"] = lambda_rule_name(c.rule);
  j["m_grid"] = c.m_grid;
  j["replicates"] = c.replicates;
  j["eta"] = c.eta;
  j["seed"] = c.seed;
  j["tolerance"] = c.tolerance;
  return j;
}

/// Model, target, noise and filter instantiated from a config.
struct experiment_setup {
  std::shared_ptr<const mercer_model> model;
  index_function phi;
  rate_maps maps;
  target_function target;
  noise_spec noise;
  spectral_filter filter;
};

inline experiment_setup make_setup(const experiment_config& c) {
  auto model = std::make_shared<const mercer_model>(c.model);
  const index_function phi = parse_phi(c.phi, model->kappa2());
  rate_maps maps(phi, model->b());
  target_function target(*model, phi, power_law_source(*model, c.R, c.source_s), c.R);
  noise_spec noise = c.noise_kind == "gaussian" ? noise_spec::gaussian(c.noise_sigma, model->d())
                                                : noise_spec::two_point(4.0 * model->kappa() * phi(model->kappa2()) * c.R, model->d());
  const double tau = c.filter_tau.value_or(1.0 / model->kappa2());
  spectral_filter filter = spectral_filter::from_name(c.filter, c.filter_nu, tau);
  return {std::move(model), phi, std::move(maps), std::move(target), std::move(noise), filter};
}

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw contract_error("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct slope_fit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
};

/// Ordinary least squares of log(error) on log(m).
inline slope_fit fit_slope(const std::vector<double>& ms, const std::vector<double>& errs) {
  if (ms.size() != errs.size()) throw contract_error("fit_slope: size mismatch");
  if (ms.size() < 4) throw parameter_error("fit_slope: need at least 4 points");
  const auto n = static_cast<double>(ms.size());
  double sx = 0.0, sy = 0.0;
  std::vector<double> x(ms.size()), y(ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (!(ms[i] > 0.0) || !(errs[i] > 0.0)) throw domain_error("fit_slope: values must be positive");
    x[i] = std::log(ms[i]);
    y[i] = std::log(errs[i]);
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  slope_fit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    ssr += r * r;
  }
  f.stderr_ = std::sqrt(ssr / (n - 2.0) / sxx);
  return f;
}

/// Per-dataset spectral data sufficient for any filter and lambda:
/// H-coefficients = (1/m) P g(mu) Uty (+ g(0)(Q - P Uty) when the decomposition is thin).
struct cell_data {
  std::size_t m = 0;
  VectorXd mu;
  MatrixXd P;    ///< sqrt(t) (.) F^T U, N x r
  MatrixXd Uty;  ///< U^T y, r x d
  MatrixXd Q;    ///< sqrt(t) (.) F^T y, N x d (thin route only)
  bool thin = false;
};

inline cell_data compute_cell(const experiment_setup& s, std::size_t m, std::uint64_t seed) {
  const auto ds = sample_dataset(*s.model, s.target, s.noise, m, seed);
  const MatrixXd F = s.model->features(ds.xs);
  const auto ge = spectral_decomposition(*s.model, F);
  const VectorXd st = s.model->eigenvalues().cwiseSqrt();
  cell_data c;
  c.m = m;
  c.mu = ge.values;
  c.P = st.asDiagonal() * (F.transpose() * ge.vectors);
  c.Uty = ge.vectors.transpose() * ds.ys;
  c.thin = ge.thin();
  if (c.thin) c.Q = st.asDiagonal() * (F.transpose() * ds.ys);
  return c;
}

inline MatrixXd cell_h_coefficients(const cell_data& c, const spectral_filter& f, double lambda) {
  VectorXd g(c.mu.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = f.on_spectrum(c.mu[i], lambda);
  MatrixXd a = c.P * (g.asDiagonal() * c.Uty);
  if (c.thin) {
    const double g0 = f.at_zero(lambda);
    if (g0 != 0.0) a += g0 * (c.Q - c.P * c.Uty);
  }
  return a / static_cast<double>(c.m);
}

/// Cache of cell data per (m, replicate), valid for one (model, target, noise, seed) fingerprint.
class sweep_cache {
 public:
  std::shared_ptr<const cell_data> find(const std::string& fp, std::size_t m, std::size_t rep) {
    std::lock_guard<std::mutex> lock(mu_);
    if (fp != fingerprint_) return nullptr;
    auto it = cells_.find({m, rep});
    return it == cells_.end() ? nullptr : it->second;
  }
  void store(const std::string& fp, std::size_t m, std::size_t rep, std::shared_ptr<const cell_data> c) {
    std::lock_guard<std::mutex> lock(mu_);
    if (fp != fingerprint_) {
      cells_.clear();
      fingerprint_ = fp;
    }
    cells_[{m, rep}] = std::move(c);
  }
  std::size_t size() const { return cells_.size(); }

 private:
  std::mutex mu_;
  std::string fingerprint_;
  std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const cell_data>> cells_;
};

inline std::string data_fingerprint(const experiment_config& c) {
  json j = config_to_json(c);
  j.erase("filter");
  j.erase("rule");
  j.erase("tolerance");
  j.erase("eta");
  return j.dump();
}

struct sweep_row {
  std::size_t m = 0;
  double lambda = 0.0;
  bool clipped = false;
  double margin = 0.0;
  double q50_l2 = 0.0, qhi_l2 = 0.0;
  double q50_h = 0.0, qhi_h = 0.0;
  double predicted_l2 = 0.0, predicted_h = 0.0;  ///< phi-generic decay curves
};

struct norm_verdict {
  std::string norm;
  slope_fit fit;
  double expected_slope = 0.0;
  std::string expected_from;  ///< "holder exponent" or "predicted curve"
  double tau = 0.0;           ///< curve constant fitted in log space
  bool pass = false;
};

struct sweep_result {
  experiment_config config;
  std::vector<sweep_row> rows;
  std::vector<norm_verdict> verdicts;
  json report;
  bool pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.pass; });
  }
};

struct truncation_check {
  double tail_rho_sq = 0.0;
  double threshold = 0.0;  ///< 1% of min over m of R^2 phi(lambda)^2 lambda
  bool adequate = true;
  int required_n = 0;
};

inline truncation_check check_truncation(const experiment_config& c, const experiment_setup& s,
                                         const std::vector<double>& lambdas) {
  truncation_check t;
  double smallest = std::numeric_limits<double>::infinity();
  for (double lam : lambdas) {
    const double p = s.phi(lam);
    smallest = std::min(smallest, c.R * c.R * p * p * lam);
  }
  t.threshold = 0.01 * smallest;
  t.tail_rho_sq = power_law_truncated_tail(*s.model, s.phi, c.R, c.source_s);
  t.adequate = t.tail_rho_sq < t.threshold;
  if (!t.adequate) {
    // Tail of the sum over n > N of t_n phi(t_n)^2 n^{-2s}, up to the normalization of the head.
    const auto& mp = c.model;
    int n = mp.n_trunc;
    while (n < (1 << 22)) {
      n *= 2;
      double head = 0.0, tail = 0.0;
      for (int k = 1; k <= n; ++k) head += std::pow(static_cast<double>(k), -2.0 * c.source_s);
      for (long k = n + 1; k <= 64L * n && k <= (1L << 26); ++k) {
        const double tk = s.model->extended_eigenvalue(k);
        const double f = s.phi(std::min(tk, s.phi.domain_max()));
        tail += tk * f * f * std::pow(static_cast<double>(k), -2.0 * c.source_s);
      }
      if (tail * c.R * c.R / head < t.threshold) break;
    }
    t.required_n = n;
  }
  return t;
}

/// Runs the sweep; cells come from the cache when available and are identical either way.
inline sweep_result run_sweep(const experiment_config& cfg, sweep_cache* cache = nullptr) {
  if (cfg.m_grid.size() < 4) throw config_error("config: key 'm_grid' needs at least 4 sample sizes for a slope fit");
  const experiment_setup s = make_setup(cfg);
  const auto& model = *s.model;
  const std::string fp = data_fingerprint(cfg);

  std::vector<lambda_choice> choices;
  std::vector<double> lambdas;
  for (auto m : cfg.m_grid) {
    choices.push_back(choose_lambda(cfg.rule, s.maps, static_cast<double>(m)));
    lambdas.push_back(choices.back().lambda);
  }
  const auto trunc = check_truncation(cfg, s, lambdas);
  if (!trunc.adequate)
    throw truncation_error("truncation inadequate: tail rho-mass " + std::to_string(trunc.tail_rho_sq) +
                           " >= 1% of the smallest expected error^2; use N_trunc >= " +
                           std::to_string(trunc.required_n));

  const std::size_t n_m = cfg.m_grid.size(), reps = cfg.replicates;
  std::vector<double> err_l2(n_m * reps), err_h(n_m * reps);
  auto work = [&](std::size_t idx) {
    const std::size_t mi = idx / reps, rep = idx % reps;
    const std::size_t m = cfg.m_grid[mi];
    std::shared_ptr<const cell_data> cell = cache ? cache->find(fp, m, rep) : nullptr;
    if (!cell) {
      cell = std::make_shared<const cell_data>(compute_cell(s, m, derive_seed(cfg.seed, {m, rep})));
      if (cache) cache->store(fp, m, rep, cell);
    }
    const MatrixXd a = cell_h_coefficients(*cell, s.filter, lambdas[mi]);
    const auto nr = norms_of_expansion(model, a - s.target.coefficients());
    err_l2[idx] = nr.rho;
    err_h[idx] = nr.h;
  };
  const std::size_t total = n_m * reps;
  const unsigned threads = std::max(1u, cfg.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < total; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex fail_mu;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < total; i = next++) {
          try {
            work(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(fail_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  sweep_result res;
  res.config = cfg;
  const double hi_q = 1.0 - cfg.eta;
  for (std::size_t mi = 0; mi < n_m; ++mi) {
    sweep_row r;
    r.m = cfg.m_grid[mi];
    r.lambda = lambdas[mi];
    r.clipped = choices[mi].clipped;
    r.margin = check_theorem_condition(static_cast<double>(r.m), r.lambda, model.kappa(), cfg.eta).margin;
    std::vector<double> l2(err_l2.begin() + mi * reps, err_l2.begin() + (mi + 1) * reps);
    std::vector<double> hh(err_h.begin() + mi * reps, err_h.begin() + (mi + 1) * reps);
    r.q50_l2 = quantile(l2, 0.5);
    r.qhi_l2 = quantile(l2, hi_q);
    r.q50_h = quantile(hh, 0.5);
    r.qhi_h = quantile(hh, hi_q);
    // phi-generic curves: L2 ~ psi(lambda) for psi-type rules, phi(lambda) for theta; RKHS ~ phi(lambda).
    const bool theta_type = cfg.rule == lambda_rule::theta || cfg.rule == lambda_rule::holder_theta_closed;
    r.predicted_h = s.phi(r.lambda);
    r.predicted_l2 = theta_type ? s.phi(r.lambda) : s.maps.small_psi(r.lambda);
    res.rows.push_back(r);
  }

  const auto holder_r = s.phi.holder_exponent();
  std::optional<rate_exponents> ex;
  if (holder_r) ex = make_rate_exponents(model.b(), *holder_r);
  std::vector<std::string> norms = cfg.norms;
  const bool theta_type = cfg.rule == lambda_rule::theta || cfg.rule == lambda_rule::holder_theta_closed;
  if (norms.empty()) norms = theta_type ? std::vector<std::string>{"L2"} : std::vector<std::string>{"L2", "RKHS"};

  std::vector<double> ms;
  for (auto m : cfg.m_grid) ms.push_back(static_cast<double>(m));
  for (const auto& nm : norms) {
    norm_verdict v;
    v.norm = nm;
    std::vector<double> med, pred;
    for (const auto& r : res.rows) {
      med.push_back(nm == "L2" ? r.q50_l2 : r.q50_h);
      pred.push_back(nm == "L2" ? r.predicted_l2 : r.predicted_h);
    }
    v.fit = fit_slope(ms, med);
    if (ex) {
      double e = 0.0;
      if (nm == "L2")
        e = theta_type ? ex->l2_upper_theta : ex->l2_upper_psi;
      else
        e = ex->rkhs_upper;
      v.expected_slope = -e;
      v.expected_from = "holder exponent";
    } else {
      v.expected_slope = fit_slope(ms, pred).slope;
      v.expected_from = "predicted curve";
    }
    double log_tau = 0.0;
    for (std::size_t i = 0; i < med.size(); ++i) log_tau += std::log(med[i]) - std::log(pred[i]);
    v.tau = std::exp(log_tau / static_cast<double>(med.size()));
    v.pass = std::abs(v.fit.slope - v.expected_slope) <= cfg.tolerance && v.fit.stderr_ <= cfg.tolerance / 2.0;
    res.verdicts.push_back(v);
  }

  json rep;
  rep["config"] = config_to_json(cfg);
  rep["model"] = {{"kappa2", model.kappa2()},
                  {"N_trunc", model.n_trunc()},
                  {"kernel_tail_bound", model.tail_bound()},
                  {"phi", s.phi.describe()},
                  {"below_decay_regime", s.maps.below_decay_regime()}};
  rep["noise"] = {{"kind", cfg.noise_kind},
                  {"M", s.noise.M},
                  {"Sigma", s.noise.Sigma},
                  {"certified", s.noise.certified},
                  {"moment_lhs", s.noise.moment_lhs},
                  {"moment_rhs", s.noise.moment_rhs}};
  if (cfg.noise_kind == "gaussian" && cfg.noise_sigma > 0.0) {
    const double cap = s.noise.gaussian_variance_cap();
    rep["noise"]["closed_form_variance_cap"] = cap;
    rep["noise"]["closed_form_cap_satisfied"] = cfg.noise_sigma * cfg.noise_sigma <= cap;
  }
  rep["truncation"] = {{"target_tail_rho_sq", trunc.tail_rho_sq}, {"threshold", trunc.threshold}};
  if (ex)
    rep["exponents"] = {{"rkhs_upper", ex->rkhs_upper},
                        {"l2_upper_theta", ex->l2_upper_theta},
                        {"l2_upper_psi", ex->l2_upper_psi},
                        {"l2_lower", ex->l2_lower},
                        {"rkhs_lower", ex->rkhs_lower},
                        {"optimal", ex->optimal}};
  json rows = json::array();
  for (const auto& r : res.rows)
    rows.push_back({{"m", r.m},
                    {"lambda", r.lambda},
                    {"lambda_clipped", r.clipped},
                    {"margin", r.margin},
                    {"theorem_regime", r.margin >= 1.0},
                    {"L2", {{"q50", r.q50_l2}, {"q_hi", r.qhi_l2}}},
                    {"RKHS", {{"q50", r.q50_h}, {"q_hi", r.qhi_h}}}});
  rep["rows"] = rows;
  json verdicts = json::array();
  for (const auto& v : res.verdicts)
    verdicts.push_back({{"norm", v.norm},
                        {"slope", v.fit.slope},
                        {"intercept", v.fit.intercept},
                        {"stderr", v.fit.stderr_},
                        {"expected_slope", v.expected_slope},
                        {"expected_from", v.expected_from},
                        {"curve_tau", v.tau},
                        {"tolerance", cfg.tolerance},
                        {"verdict", v.pass ? "PASS" : "FAIL"}});
  rep["verdicts"] = verdicts;
  rep["verdict"] = res.pass() ? "PASS" : "FAIL";
  res.report = std::move(rep);
  return res;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string sweep_csv(const sweep_result& r) {
  std::ostringstream os;
  os << "m,lambda,norm,q50,q90,margin,flagged\n";
  for (const auto& row : r.rows) {
    const int flagged = row.margin < 1.0 ? 1 : 0;
    for (const char* nm : {"L2", "RKHS"}) {
      const bool l2 = std::string(nm) == "L2";
      os << row.m << ',' << format_double(row.lambda) << ',' << nm << ','
         << format_double(l2 ? row.q50_l2 : row.q50_h) << ',' << format_double(l2 ? row.qhi_l2 : row.qhi_h) << ','
         << format_double(row.margin) << ',' << flagged << '\n';
    }
  }
  return os.str();
}

inline std::string curve_csv(const sweep_result& r) {
  std::ostringstream os;
  os << "m,norm,predicted,fitted\n";
  for (const auto& v : r.verdicts)
    for (const auto& row : r.rows) {
      const double p = v.norm == "L2" ? row.predicted_l2 : row.predicted_h;
      os << row.m << ',' << v.norm << ',' << format_double(p) << ',' << format_double(v.tau * p) << '\n';
    }
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw error("cannot write " + p.string());
  out << s;
}

inline void write_sweep_outputs(const sweep_result& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "sweep.csv", sweep_csv(r));
  write_text(dir / "report.json", r.report.dump(2) + "\n");
  write_text(dir / "curve.csv", curve_csv(r));
}

}  // namespace ratelab
