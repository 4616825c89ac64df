// Command-line driver: annealing sweeps of the mixed-state 2-SRE, its
// thermodynamic-integration derivatives, exact small-system fixtures,
// autocorrelation comparisons of the two nonlocal update schemes, and
// volume-law fits over results files.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sremc/analysis.hpp"
#include "sremc/config.hpp"
#include "sremc/oracle.hpp"
#include "sremc/results_io.hpp"
#include "sremc/schedule.hpp"
#include "sremc/version.hpp"

namespace {

using namespace sremc;

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  int workers = 1;
  bool resume = false;
};

RunConfig load_with_overrides(const CommonOpts& opts) {
  RunConfig cfg = load_config(opts.config_path);
  if (opts.has_seed) cfg.seed = opts.seed_override;
  if (!opts.out_override.empty()) cfg.results_path = opts.out_override;
  return cfg;
}

void clear_checkpoints(const std::string& dir) {
  if (dir.empty() || !std::filesystem::exists(dir)) return;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".ckpt") std::filesystem::remove(entry.path());
}

int cmd_sweep(const CommonOpts& opts) {
  RunConfig cfg = load_with_overrides(opts);
  const Lattice lat = cfg.lattice();
  const ModelParams params = cfg.params();
  ChainRunConfig rc = cfg.chain_config();
  rc.workers = opts.workers;
  rc.config_hash = config_hash(cfg);
  if (!opts.resume) clear_checkpoints(rc.checkpoint_dir);

  const PilotStats pilot =
      run_pilot(cfg.direction, cfg.lambda_end, lat, params, cfg.seed);
  const Schedule sched =
      build_schedule(cfg.direction, cfg.lambda_start, cfg.lambda_end, lat, params, cfg.epsilon,
                     pilot, cfg.cap_constant, 200000, cfg.waypoints);
  std::cerr << "sweep: " << direction_name(cfg.direction) << " in [" << cfg.lambda_start << ", "
            << cfg.lambda_end << "], " << sched.steps() << " subintervals\n";
  const std::vector<SreResult> results = run_schedule(sched, lat, params, rc);
  write_sweep_results(cfg.results_path, cfg, results);
  for (const auto& r : results)
    std::printf("%s=%-10.6g  m2_tilde=%-12.8g m2_density=%-12.8g sigma=%.3g\n",
                direction_name(cfg.direction).c_str(), r.lambda, r.m2_tilde, r.m2_density,
                r.std_error);
  std::cerr << "wrote " << cfg.results_path << "\n";
  return 0;
}

int cmd_derivatives(const CommonOpts& opts) {
  RunConfig cfg = load_with_overrides(opts);
  if (cfg.derivative_grid.empty())
    throw CLI::ValidationError("derivatives.grid must be a non-empty list of positive values");
  const Lattice lat = cfg.lattice();
  const ModelParams params = cfg.params();
  ChainRunConfig rc = cfg.chain_config();
  rc.workers = opts.workers;
  rc.config_hash = config_hash(cfg);

  std::vector<double> grid = cfg.derivative_grid;
  std::sort(grid.begin(), grid.end());
  const auto points = run_derivatives(grid, cfg.direction, lat, params, rc);
  write_derivative_results(cfg.results_path, cfg, points);
  for (const auto& p : points)
    std::printf("%s=%-10.6g  d1=%-12.6g +- %-10.3g  d2=%-12.6g +- %.3g\n",
                direction_name(cfg.direction).c_str(), p.lambda, p.first.value,
                p.first.std_error, p.second.value, p.second.std_error);
  std::cerr << "wrote " << cfg.results_path << "\n";
  return 0;
}

int cmd_oracle(const CommonOpts& opts) {
  RunConfig cfg = load_with_overrides(opts);
  const Lattice lat = cfg.lattice();
  if (lat.sites > cfg.oracle_cap)
    throw CLI::ValidationError("oracle: N = " + std::to_string(lat.sites) +
                               " exceeds the enumeration cap " + std::to_string(cfg.oracle_cap));
  std::vector<double> couplings = cfg.oracle_couplings;
  std::vector<double> betas = cfg.oracle_betas;
  if (couplings.empty()) couplings = {cfg.coupling};
  if (betas.empty()) betas = {cfg.beta};

  std::ofstream out(cfg.results_path);
  if (!out) throw std::runtime_error("cannot open " + cfg.results_path);
  out << "# sremc exact fixtures, code_version " << kCodeVersion << "\n";
  out << "# N J h beta M2 S2 M2_tilde Q Z Z2\n";
  char line[512];
  for (double beta : betas)
    for (double coupling : couplings) {
      ModelParams p = cfg.params();
      p.coupling = coupling;
      p.beta = beta;
      const Eigen::MatrixXd H = build_hamiltonian(lat, p, cfg.oracle_cap);
      const GeneralizedPartitions g = generalized_partitions(H, beta, cfg.oracle_cap);
      const SreValues v = sre_exact(gibbs_state(H, beta), cfg.oracle_cap);
      std::snprintf(line, sizeof(line),
                    "%d %.12g %.12g %.12g %.12g %.12g %.12g %.12g %.12g %.12g\n", lat.sites,
                    coupling, cfg.field, beta, v.m2, v.s2, v.m2_tilde, g.q, g.z, g.z2);
      out << line;
      std::printf("N=%d J=%g beta=%g  M2=%.10g S2=%.10g M2_tilde=%.10g\n", lat.sites, coupling,
                  beta, v.m2, v.s2, v.m2_tilde);
    }
  std::cerr << "wrote " << cfg.results_path << "\n";
  return 0;
}

int cmd_autocorr(const CommonOpts& opts) {
  RunConfig cfg = load_with_overrides(opts);
  const Lattice lat = cfg.lattice();
  const ModelParams params = cfg.params();

  std::ofstream out(cfg.results_path);
  if (!out) throw std::runtime_error("cannot open " + cfg.results_path);
  out << results_header(cfg, "autocorr");
  out << "scheme,seed,tau_int,truncation_lag,n_samples\n";

  std::vector<double> tau_freeze, tau_naive;
  for (std::size_t s = 0; s < cfg.autocorr_seeds; ++s) {
    for (int which = 0; which < 2; ++which) {
      const auto scheme = which == 0 ? QUpdateScheme::Freezing50 : QUpdateScheme::CrossReplica;
      QChain chain(lat, params, params.beta, Rng(cfg.seed, 500 + 2 * s + static_cast<std::size_t>(which)),
                   scheme);
      chain.thermalize(cfg.autocorr_thermalization);
      const std::vector<double> series = run_series(chain, cfg.autocorr_sweeps, true);
      const AutocorrReport rep = autocorr(series, cfg.autocorr_threshold);
      (which == 0 ? tau_freeze : tau_naive).push_back(rep.tau_int);
      out << (which == 0 ? "freezing" : "cross_replica") << ',' << s << ','
          << format_double(rep.tau_int) << ',' << rep.truncation_lag << ',' << rep.n_samples
          << '\n';
      std::printf("%-14s seed=%zu  tau_int(n_J) = %.3f (lag %zu)\n",
                  which == 0 ? "freezing" : "cross_replica", s, rep.tau_int, rep.truncation_lag);
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  std::printf("median tau_int: freezing %.3f, cross-replica %.3f\n", median(tau_freeze),
              median(tau_naive));
  std::cerr << "wrote " << cfg.results_path << "\n";
  return 0;
}

int cmd_fit(const std::vector<std::string>& files, int dimension, double at, double at_tol,
            const std::string& out_path) {
  std::vector<VolumePoint> points;
  for (const auto& f : files) {
    const ResultsFile rf = read_results(f);
    if (rf.kind != "sweep") throw std::runtime_error(f + ": not a sweep results file");
    const int L = rf.config.at("model").at("L").get<int>();
    double best = -1.0;
    std::size_t best_row = 0;
    for (std::size_t i = 0; i < rf.rows.size(); ++i) {
      const double d = std::abs(rf.column(i, "lambda") - at);
      if (best < 0.0 || d < best) {
        best = d;
        best_row = i;
      }
    }
    if (best < 0.0 || best > at_tol)
      throw std::runtime_error(f + ": no grid point within tolerance of the fit location");
    points.push_back({L, rf.column(best_row, "m2_tilde"), rf.column(best_row, "std_error")});
  }
  const VolumeLawFit fit = volume_fit(points, dimension);
  nlohmann::json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["slope_err"] = std::sqrt(fit.cov_ss);
  j["intercept_err"] = std::sqrt(fit.cov_ii);
  j["covariance"] = {fit.cov_ss, fit.cov_si, fit.cov_ii};
  j["chi2"] = fit.chi2;
  j["sizes"] = fit.sizes;
  j["residuals"] = fit.residuals;
  const std::string text = j.dump(2);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << text << "\n";
  }
  std::cout << text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo evaluation of the stabilizer Renyi entropy for transverse-field "
               "Ising models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sremc::kCodeVersion);

  CommonOpts opts;
  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config)
      sub->add_option("-c,--config", opts.config_path, "run configuration JSON")->required();
    sub->add_option("-o,--out", opts.out_override, "override the output path");
    sub->add_option("--seed", opts.seed_override, "override the configured seed")
        ->each([&](const std::string&) { opts.has_seed = true; });
    sub->add_option("-j,--workers", opts.workers, "worker threads for independent chains");
    sub->add_flag("--resume", opts.resume, "resume from existing checkpoints");
  };

  auto* sweep = app.add_subcommand("sweep", "anneal M2_tilde along beta or J");
  add_common(sweep);
  auto* derivs = app.add_subcommand("derivatives", "equilibrium TI derivatives on a grid");
  add_common(derivs);
  auto* oracle = app.add_subcommand("oracle", "exact small-system fixtures");
  add_common(oracle);
  auto* autoc = app.add_subcommand("autocorr", "compare nonlocal update schemes");
  add_common(autoc);

  auto* fit = app.add_subcommand("fit", "volume-law fit over sweep results files");
  std::vector<std::string> fit_files;
  int fit_dim = 1;
  double fit_at = 1.0, fit_tol = 1e-6;
  std::string fit_out;
  fit->add_option("files", fit_files, "sweep results files")->required()->expected(-1);
  fit->add_option("--dimension", fit_dim, "lattice dimension d in a_d L^d + b_d")->required();
  fit->add_option("--at", fit_at, "parameter value to fit at")->required();
  fit->add_option("--at-tol", fit_tol, "grid matching tolerance");
  fit->add_option("-o,--out", fit_out, "write the fit summary here as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) return cmd_sweep(opts);
    if (derivs->parsed()) return cmd_derivatives(opts);
    if (oracle->parsed()) return cmd_oracle(opts);
    if (autoc->parsed()) return cmd_autocorr(opts);
    if (fit->parsed()) return cmd_fit(fit_files, fit_dim, fit_at, fit_tol, fit_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
