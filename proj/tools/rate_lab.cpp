// rate_lab: command-line front end for the spectral regularization lab.
// Exit codes: 0 success, 1 error, 2 verdict failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ratelab/concentration.hpp"
#include "ratelab/effdim_param.hpp"
#include "ratelab/estimator.hpp"
#include "ratelab/filters.hpp"
#include "ratelab/harness.hpp"
#include "ratelab/minimax_lab.hpp"

namespace fs = std::filesystem;
using namespace ratelab;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_verdict = 2;

/// Config from --config, or the built-in default (b = 2, phi = t^{1/2}).
experiment_config config_or_default(const std::string& path) {
  experiment_config c;
  if (!path.empty()) {
    c = load_config(path);
  } else {
    c = parse_config(json::parse(R"({"model": {"b": 2}, "phi": {"kind": "holder", "r": 0.5}})"));
  }
  apply_env_overrides(c);
  return c;
}

void emit(const json& j, const std::string& out_dir, const std::string& file) {
  if (out_dir.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / file, j.dump(2) + "\n");
}

int cmd_exponents(double b, double r) {
  const auto e = make_rate_exponents(b, r);
  json j = {{"b", b},
            {"r", r},
            {"rkhs_upper", e.rkhs_upper},
            {"l2_upper_theta", e.l2_upper_theta},
            {"l2_upper_psi", e.l2_upper_psi},
            {"l2_lower", e.l2_lower},
            {"rkhs_lower", e.rkhs_lower},
            {"optimal", e.optimal},
            {"individual_rkhs_status", "as stated, unverified"}};
  std::cout << j.dump(2) << "\n";
  return exit_ok;
}

int cmd_filters(const std::string& name, int nu, std::optional<double> tau, double kappa2) {
  const auto f = spectral_filter::from_name(name, nu, tau.value_or(1.0 / kappa2));
  const auto rep = verify_constants(f, kappa2);
  const auto c = f.declared_constants();
  json checks = json::array();
  for (const auto& ch : rep.checks)
    checks.push_back({{"inequality", ch.name}, {"attained", ch.attained}, {"declared", ch.declared},
                      {"pass", ch.pass}});
  json j = {{"filter", rep.filter},
            {"D", c.D},
            {"B", c.B},
            {"gamma", c.gamma},
            {"qualification", c.qualification ? json(*c.qualification) : json("unbounded")},
            {"checks", checks},
            {"all_pass", rep.all_pass()}};
  std::cout << j.dump(2) << "\n";
  return rep.all_pass() ? exit_ok : exit_verdict;
}

int cmd_sweep(const std::string& config, const std::string& out) {
  const auto c = config_or_default(config);
  const auto res = run_sweep(c);
  write_sweep_outputs(res, out.empty() ? fs::path("rate_lab_out") : fs::path(out));
  for (const auto& v : res.verdicts)
    std::cout << v.norm << " slope " << v.fit.slope << " (stderr " << v.fit.stderr_ << ") expected "
              << v.expected_slope << " -> " << (v.pass ? "PASS" : "FAIL") << "\n";
  return res.pass() ? exit_ok : exit_verdict;
}

int cmd_fit(const std::string& config, std::size_t m, std::optional<double> lambda_opt, const std::string& out) {
  const auto c = config_or_default(config);
  const auto s = make_setup(c);
  const double lambda = lambda_opt.value_or(choose_lambda(c.rule, s.maps, static_cast<double>(m)).lambda);
  const auto ds = sample_dataset(*s.model, s.target, s.noise, m, derive_seed(c.seed, {m, 0}));
  const auto k = kernel::mercer(s.model);
  const auto fz = fit(ds, k, s.filter, lambda);
  const auto nr = error_norms(fz, s.target);
  json coeffs = json::array();
  for (Eigen::Index i = 0; i < fz.c.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < fz.c.cols(); ++j) row.push_back(fz.c(i, j));
    coeffs.push_back(row);
  }
  json j = {{"m", m},
            {"lambda", lambda},
            {"filter", fz.filter},
            {"kernel", k.describe()},
            {"error_L2", nr.rho},
            {"error_RKHS", nr.h},
            {"xs", fz.xs},
            {"c", coeffs}};
  emit(j, out, "fit.json");
  if (!out.empty()) std::cout << "L2 error " << nr.rho << ", RKHS error " << nr.h << "\n";
  return exit_ok;
}

int cmd_effdim(const std::string& config, const std::string& out) {
  const auto c = config_or_default(config);
  const mercer_model model(c.model);
  const auto rep = effdim_bound_check(model, geometric_grid(1e-4, model.kappa2(), 64));
  std::ostringstream csv;
  csv << "lambda,N,poly_bound,crude_bound\n";
  for (const auto& p : rep.points)
    csv << format_double(p.lambda) << ',' << format_double(p.value) << ',' << format_double(p.poly_bound) << ','
        << format_double(p.crude_bound) << '\n';
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    fs::create_directories(out);
    write_text(fs::path(out) / "effdim.csv", csv.str());
  }
  return rep.all_ok() ? exit_ok : exit_verdict;
}

int cmd_concentration(const std::string& config, std::size_t m, double eta, std::size_t replicates,
                      const std::string& stat, std::optional<double> lambda_opt, const std::string& out) {
  const auto c = config_or_default(config);
  const auto s = make_setup(c);
  const double lambda = lambda_opt.value_or(choose_lambda(c.rule, s.maps, static_cast<double>(m)).lambda);
  const auto kind = statistic_kind_from_name(stat);
  const auto res = tail_test(kind, *s.model, s.target, s.noise, lambda, m, eta, replicates, c.seed);
  std::ostringstream csv;
  csv << "replicate,statistic,bound,violated\n";
  for (std::size_t i = 0; i < res.statistics.size(); ++i)
    csv << i << ',' << format_double(res.statistics[i]) << ',' << format_double(res.bound) << ','
        << (res.violated[i] ? 1 : 0) << '\n';
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    fs::create_directories(out);
    write_text(fs::path(out) / "concentration.csv", csv.str());
    std::cout << "violation frequency " << res.frequency << " (eta " << eta << ")\n";
  }
  return res.within_eta ? exit_ok : exit_verdict;
}

int cmd_lower_bound(const std::string& config, double eps, std::size_t m, std::size_t trials, bool rkhs,
                    const std::string& out) {
  const auto c = config_or_default(config);
  const auto s = make_setup(c);
  const auto& model = *s.model;
  const int ell = rkhs ? code_length_rkhs(model, s.phi, c.R, eps) : code_length(model, s.phi, c.R, eps);
  if (ell <= 16)
    throw parameter_error("lower-bound: code length " + std::to_string(ell) + " <= 16; choose epsilon below " +
                          std::to_string(epsilon_zero(model, s.phi, c.R, rkhs)));
  const auto packing = build_packing(ell, derive_seed(c.seed, {1}));
  const auto fam = make_adversarial_family(model, s.phi, c.R, eps, packing, rkhs, derive_seed(c.seed, {2}));
  const double L = two_point_amplitude(model, s.phi, c.R);
  double kl_max = 0.0;
  for (std::size_t i = 0; i < fam.members.size(); ++i)
    for (std::size_t j = 0; j < fam.members.size(); ++j)
      if (i != j) kl_max = std::max(kl_max, kl_divergence(L, fam.members[i], fam.members[j]));
  const auto fb = rkhs ? fano_bound_rkhs(ell, static_cast<double>(m), eps, model.d(), L, model.b(), model.beta())
                       : fano_bound(ell, static_cast<double>(m), eps, model.d(), L);
  const double lambda = choose_lambda(c.rule, s.maps, static_cast<double>(m)).lambda;
  const auto chk = empirical_fano_check(s.model, fam, L, m, trials, s.filter, lambda, fb, derive_seed(c.seed, {3}));
  json j = {{"ell", ell},
            {"N", fam.members.size()},
            {"separation", {{"min", fam.min_separation}, {"max", fam.max_separation}}},
            {"kl_max", kl_max},
            {"fano_bound", fb.value},
            {"binding_branch", fb.binding},
            {"observed_frequency", chk.max_frequency},
            {"pooled_frequency", chk.pooled_frequency},
            {"consistent", chk.consistent}};
  emit(j, out, "lower_bound.json");
  return chk.consistent ? exit_ok : exit_verdict;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral regularization rate lab"};
  app.require_subcommand(1);

  std::string config, out;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one dataset and export coefficients");
  std::size_t fit_m = 256;
  std::optional<double> fit_lambda;
  fit_cmd->add_option("--config", config, "Experiment config (JSON)");
  fit_cmd->add_option("--m", fit_m, "Sample size");
  fit_cmd->add_option("--lambda", fit_lambda, "Regularization parameter (default: the config rule)");
  fit_cmd->add_option("--out", out, "Output directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run an m-sweep and compare slopes with theory");
  sweep_cmd->add_option("--config", config, "Experiment config (JSON)");
  sweep_cmd->add_option("--out", out, "Output directory");

  auto* eff_cmd = app.add_subcommand("effdim", "Effective dimension against its bounds");
  eff_cmd->add_option("--config", config, "Experiment config (JSON)");
  eff_cmd->add_option("--out", out, "Output directory");

  auto* conc_cmd = app.add_subcommand("concentration", "Tail test of a concentration inequality");
  std::size_t conc_m = 256, conc_reps = 500;
  double conc_eta = 0.1;
  std::string stat = "sample";
  std::optional<double> conc_lambda;
  conc_cmd->add_option("--config", config, "Experiment config (JSON)");
  conc_cmd->add_option("--m", conc_m, "Sample size");
  conc_cmd->add_option("--eta", conc_eta, "Confidence level eta");
  conc_cmd->add_option("--replicates", conc_reps, "Number of datasets");
  conc_cmd->add_option("--statistic", stat, "sample or operator")->check(CLI::IsMember({"sample", "operator"}));
  conc_cmd->add_option("--lambda", conc_lambda, "Regularization parameter (default: the config rule)");
  conc_cmd->add_option("--out", out, "Output directory");

  auto* lb_cmd = app.add_subcommand("lower-bound", "Packing, KL and Fano lower-bound lab");
  double lb_eps = 0.0;
  std::size_t lb_m = 64, lb_trials = 200;
  bool lb_rkhs = false;
  lb_cmd->add_option("--config", config, "Experiment config (JSON)");
  lb_cmd->add_option("--epsilon", lb_eps, "Separation scale epsilon")->required();
  lb_cmd->add_option("--m", lb_m, "Sample size");
  lb_cmd->add_option("--trials", lb_trials, "Monte Carlo trials");
  lb_cmd->add_flag("--rkhs-variant", lb_rkhs, "Use the RKHS-norm construction");
  lb_cmd->add_option("--out", out, "Output directory");

  auto* filt_cmd = app.add_subcommand("filters", "Verify a filter's regularization constants on grids");
  std::string filt_name;
  int filt_nu = 2;
  std::optional<double> filt_tau;
  double filt_kappa2 = 1.0;
  filt_cmd->add_option("--check", filt_name, "tikhonov, iterated_tikhonov, landweber or cutoff")->required();
  filt_cmd->add_option("--nu", filt_nu, "Iterations for iterated_tikhonov");
  filt_cmd->add_option("--tau", filt_tau, "Landweber step (default 1/kappa^2)");
  filt_cmd->add_option("--kappa2", filt_kappa2, "Spectrum bound kappa^2");

  auto* exp_cmd = app.add_subcommand("exponents", "Theoretical rate exponents as JSON");
  double eb = 2.0, er = 0.5;
  exp_cmd->add_option("--b", eb, "Eigenvalue decay exponent")->required();
  exp_cmd->add_option("--r", er, "Hölder smoothness")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_error;
  }

  try {
    if (*fit_cmd) return cmd_fit(config, fit_m, fit_lambda, out);
    if (*sweep_cmd) return cmd_sweep(config, out);
    if (*eff_cmd) return cmd_effdim(config, out);
    if (*conc_cmd) return cmd_concentration(config, conc_m, conc_eta, conc_reps, stat, conc_lambda, out);
    if (*lb_cmd) return cmd_lower_bound(config, lb_eps, lb_m, lb_trials, lb_rkhs, out);
    if (*filt_cmd) return cmd_filters(filt_name, filt_nu, filt_tau, filt_kappa2);
    if (*exp_cmd) return cmd_exponents(eb, er);
  } catch (const std::exception& e) {
    std::cerr << "rate_lab: " << e.what() << "\n";
    return exit_error;
  }
  return exit_error;
}
