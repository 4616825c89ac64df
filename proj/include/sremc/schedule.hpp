#pragma once

// Reweight-annealing driver.  A sweep over beta or J is divided into m
// subintervals sized so each partition-function ratio is about a fixed
// overlap epsilon; the per-site operator count makes the required m scale
// like (lambda_end - lambda_start) L^d / |log eps|.  Three independent chain
// families (Q, Z, Z_2) measure the per-step ratios; chained log ratios
// assemble the mixed-state 2-SRE at every grid point of the path:
//
//     M2t(lambda_k) = M2t(lambda_0)
//                     - [log Q](k) + 2 [log Z](k) + [log Z2](k) ,
//
// where [log X](k) is the accumulated log X(lambda_k) - log X(lambda_0).
// Chains are warm-started from the previous grid point (simulated-annealing
// reuse); families and grid chunks run concurrently and merge
// deterministically for a fixed seed.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sremc/checkpoint.hpp"
#include "sremc/estimators.hpp"
#include "sremc/lattice.hpp"
#include "sremc/oracle.hpp"
#include "sremc/qsse.hpp"
#include "sremc/rng.hpp"
#include "sremc/sse.hpp"
#include "sremc/stats.hpp"

namespace sremc {

struct Schedule {
  SweepDirection direction = SweepDirection::Coupling;
  std::vector<double> points;    // lambda_0 (reference) < ... < lambda_m
  double reference_value = 0.0;  // exact M2t at lambda_0
  double epsilon = 0.5;

  std::size_t steps() const { return points.empty() ? 0 : points.size() - 1; }
};

struct PilotStats {
  std::vector<double> lambda;
  std::vector<double> mean_count;  // schedule-relevant operator count (Q family)
};

struct ChainRunConfig {
  std::size_t measure_sweeps = 20000;  // per grid point, initial batch
  std::size_t bins = 32;
  std::size_t therm_sweeps = 0;    // 0 = max(1000, measure/10)
  std::size_t retherm_sweeps = 0;  // 0 = max(200, measure/20)
  double safety_factor = 1.25;
  std::uint64_t seed = 1;
  int workers = 1;
  std::size_t chunks = 1;  // contiguous grid chunks per family (parallelism unit)
  // adaptive budgets: grow the measurement until the step error is below
  // target, up to max_batches times the initial batch (0 targets = fixed)
  double target_log_error = 0.0;
  double target_total_error = 0.0;  // derives the per-step target from the grid size
  double target_first_error = 0.0;
  double target_second_error = 0.0;
  std::size_t max_batches = 16;
  std::string checkpoint_dir;  // empty = no checkpointing
  std::uint64_t config_hash = 0;

  std::size_t therm() const { return therm_sweeps ? therm_sweeps : std::max<std::size_t>(1000, measure_sweeps / 10); }
  std::size_t retherm() const { return retherm_sweeps ? retherm_sweeps : std::max<std::size_t>(200, measure_sweeps / 20); }
};

namespace detail {

// log-log interpolation of the pilot counts with power-law extrapolation
inline double interp_count(const PilotStats& pilot, double lambda) {
  const auto& xs = pilot.lambda;
  const auto& ys = pilot.mean_count;
  if (xs.empty()) throw std::invalid_argument("schedule: empty pilot");
  if (xs.size() == 1) return std::max(ys[0], 1e-3);
  const double lx = std::log(std::max(lambda, 1e-300));
  std::size_t i = 1;
  while (i + 1 < xs.size() && lx > std::log(xs[i])) ++i;
  const double x0 = std::log(xs[i - 1]), x1 = std::log(xs[i]);
  const double y0 = std::log(std::max(ys[i - 1], 1e-6));
  const double y1 = std::log(std::max(ys[i], 1e-6));
  const double t = (lx - x0) / (x1 - x0);
  return std::max(std::exp(y0 + t * (y1 - y0)), 1e-3);
}

}  // namespace detail

// Short equilibrium runs of the Q family (the largest counts, hence the
// binding constraint) at geometric anchors up to lambda_end.
inline PilotStats run_pilot(SweepDirection dir, double lambda_end, const Lattice& lat,
                            const ModelParams& params, std::uint64_t seed,
                            std::size_t sweeps = 1536) {
  PilotStats pilot;
  for (double f : {0.125, 0.25, 0.5, 1.0}) {
    const double lambda = lambda_end * f;
    ModelParams p = params;
    (dir == SweepDirection::Beta ? p.beta : p.coupling) = lambda;
    if (p.beta <= 0.0) continue;
    QChain chain(lat, p, p.beta, Rng(seed, 7100 + static_cast<std::uint64_t>(f * 1000)));
    chain.thermalize(std::max<std::size_t>(sweeps / 2, 256));
    auto st = run_bins(chain, sweeps, std::max<std::size_t>(sweeps / 8, 2));
    pilot.lambda.push_back(lambda);
    pilot.mean_count.push_back(dir == SweepDirection::Coupling ? mean(st.nj_tot) : mean(st.n_tot));
  }
  return pilot;
}

// Builds the annealing grid.  Steps are sized so the predicted per-step
// ratio stays near epsilon; construction signals if the grid would exceed
// ceil(cap_constant * (range) * L^d / |log eps|) (or the hard cap when no
// constant is configured).
inline Schedule build_schedule(SweepDirection dir, double lambda_start, double lambda_end,
                               const Lattice& lat, const ModelParams& params, double epsilon,
                               const PilotStats& pilot, double cap_constant = 0.0,
                               std::size_t hard_cap = 200000,
                               std::vector<double> waypoints = {}) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("build_schedule: epsilon must lie in (0,1)");
  if (lambda_start < 0.0 || lambda_end < lambda_start)
    throw std::invalid_argument("build_schedule: need 0 <= lambda_start <= lambda_end");
  std::sort(waypoints.begin(), waypoints.end());

  Schedule sched;
  sched.direction = dir;
  sched.epsilon = epsilon;
  sched.reference_value =
      dir == SweepDirection::Coupling && lambda_start == 0.0
          ? product_state_m2_tilde(lat.sites, params.beta, params.field)
          : 0.0;
  sched.points.push_back(lambda_start);
  if (lambda_start == lambda_end) return sched;

  const double step_log = -std::log(epsilon);
  std::size_t cap = hard_cap;
  if (cap_constant > 0.0) {
    const double formula = std::ceil(cap_constant * (lambda_end - lambda_start) *
                                     std::pow(lat.linear_size, lat.dimension) / step_log);
    cap = std::min<std::size_t>(hard_cap, static_cast<std::size_t>(std::max(1.0, formula)));
  }

  double lambda = lambda_start;
  if (lambda == 0.0) {
    // first point: counts of order |log eps| keep the 0-reference overlap near eps
    double lo = lambda_end * 1e-9, hi = lambda_end;
    if (detail::interp_count(pilot, hi) > step_log) {
      for (int it = 0; it < 60; ++it) {
        const double mid = std::sqrt(lo * hi);
        (detail::interp_count(pilot, mid) > step_log ? hi : lo) = mid;
      }
    }
    lambda = hi;
    sched.points.push_back(std::min(lambda, lambda_end));
  }
  while (lambda < lambda_end) {
    double h = step_log / detail::interp_count(pilot, lambda);
    h = step_log / detail::interp_count(pilot, lambda * std::exp(0.5 * h));
    double next = lambda * std::exp(h);
    if (next >= lambda_end * (1.0 - 1e-12)) next = lambda_end;
    // snap to mandatory waypoints so requested parameter values land on grid
    for (double w : waypoints)
      if (w > lambda * (1.0 + 1e-12) && w < next) {
        next = w;
        break;
      }
    sched.points.push_back(next);
    lambda = next;
    if (sched.points.size() - 1 > cap)
      throw std::runtime_error(
          "build_schedule: interpolation count exceeds the cap; epsilon too close to 1 "
          "or cap constant too small");
  }
  return sched;
}

struct StepRatio {
  double lambda_prev = 0.0;
  double lambda = 0.0;
  double dlog = 0.0;  // log X(lambda) - log X(lambda_prev)
  double err = 0.0;
  std::uint64_t sweeps = 0;
};

struct SreResult {
  double lambda = 0.0;
  double m2_tilde = 0.0;
  double m2_density = 0.0;
  double std_error = 0.0;
  // accumulated log X(lambda) - log X(lambda_0) per family, with errors
  double dlog_q = 0.0, dlog_z = 0.0, dlog_z2 = 0.0;
  double err_q = 0.0, err_z = 0.0, err_z2 = 0.0;
};

namespace detail {

inline void append_stats(ChainStats& into, const ChainStats& more) {
  auto cat = [](std::vector<double>& a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
  };
  cat(into.n_tot, more.n_tot);
  cat(into.nj_tot, more.nj_tot);
  cat(into.n_pair, more.n_pair);
  cat(into.nj_pair, more.nj_pair);
  cat(into.ratio, more.ratio);
}

template <class Chain>
void set_lambda(Chain& chain, SweepDirection dir, PartitionKind kind, double lambda) {
  if (dir == SweepDirection::Beta)
    chain.set_beta_sim(kind == PartitionKind::Z2 ? 2.0 * lambda : lambda);
  else
    chain.set_coupling(lambda);
}

inline std::uint64_t family_stream(PartitionKind kind, std::size_t chunk) {
  return (static_cast<std::uint64_t>(kind) + 1) * 1000003ULL + chunk;
}

}  // namespace detail

// Measures the ratio steps [k_begin, k_end) of one family chunk, writing
// results into their slots.  Chain must already be constructed at the chunk's
// first simulation point; thermalization and warm starts happen inside.
template <class Chain>
void run_ratio_steps(Chain& chain, const Schedule& sched, std::size_t k_begin, std::size_t k_end,
                     const ChainRunConfig& rc, PartitionKind kind, std::vector<StepRatio>& out,
                     const std::string& ckpt_path = {}) {
  const SweepDirection dir = sched.direction;
  std::size_t k_next = k_begin;

  auto write_ckpt = [&](std::size_t next) {
    if (ckpt_path.empty()) return;
    write_checkpoint_file(ckpt_path, [&](BinaryWriter& w) {
      w.u64(rc.config_hash);
      w.u8(static_cast<std::uint8_t>(kind));
      w.u64(k_begin);
      w.u64(k_end);
      w.u64(next);
      for (std::size_t k = k_begin; k < next; ++k) {
        const auto& s = out[k - 1];
        w.f64(s.lambda_prev);
        w.f64(s.lambda);
        w.f64(s.dlog);
        w.f64(s.err);
        w.u64(s.sweeps);
      }
      w.f64(chain.beta_sim());
      w.f64(chain.params().coupling);
      w.str(chain.rng().serialize());
      if constexpr (std::is_same_v<Chain, QChain>)
        write_qconfiguration(w, chain.configuration());
      else
        write_replica(w, chain.replica());
    });
  };

  bool resumed = false;
  if (!ckpt_path.empty() && std::filesystem::exists(ckpt_path)) {
    read_checkpoint_file(ckpt_path, [&](BinaryReader& r) {
      if (r.u64() != rc.config_hash) return;  // stale checkpoint for another run
      if (r.u8() != static_cast<std::uint8_t>(kind)) return;
      if (r.u64() != k_begin || r.u64() != k_end) return;
      const std::size_t next = r.u64();
      for (std::size_t k = k_begin; k < next; ++k) {
        StepRatio s;
        s.lambda_prev = r.f64();
        s.lambda = r.f64();
        s.dlog = r.f64();
        s.err = r.f64();
        s.sweeps = r.u64();
        out[k - 1] = s;
      }
      chain.set_beta_sim(r.f64());
      chain.set_coupling(r.f64());
      chain.set_rng(Rng::deserialize(r.str()));
      if constexpr (std::is_same_v<Chain, QChain>)
        chain.configuration() = read_qconfiguration(r);
      else
        chain.replica() = read_replica(r);
      k_next = next;
      resumed = true;
    });
  }
  if (k_next >= k_end) return;

  if (!resumed) {
    detail::set_lambda(chain, dir, kind, sched.points[k_next]);
    chain.thermalize(rc.therm(), rc.safety_factor);
  }

  const std::size_t bin_len = std::max<std::size_t>(1, rc.measure_sweeps / rc.bins);
  for (std::size_t k = k_next; k < k_end; ++k) {
    const double lam_prev = sched.points[k - 1];
    const double lam = sched.points[k];
    detail::set_lambda(chain, dir, kind, lam);
    if (k != k_begin || resumed) chain.thermalize(rc.retherm(), rc.safety_factor);

    ObservableSpec obs;
    obs.record_ratio = true;
    obs.ratio_base = lam_prev / lam;
    obs.ratio_uses_bond_count = (dir == SweepDirection::Coupling);

    ChainStats stats = run_bins(chain, rc.measure_sweeps, bin_len, obs);
    RatioEstimate est;
    std::size_t batches = 1;
    for (;;) {
      est = dir == SweepDirection::Beta ? ratio_beta(stats, lam_prev, lam, kind)
                                        : ratio_coupling(stats, lam_prev, lam, kind);
      if (rc.target_log_error <= 0.0 || est.log_std_error <= rc.target_log_error ||
          batches >= rc.max_batches)
        break;
      detail::append_stats(stats, run_bins(chain, rc.measure_sweeps, bin_len, obs));
      ++batches;
    }
    auto& slot = out[k - 1];
    slot.lambda_prev = lam_prev;
    slot.lambda = lam;
    slot.dlog = -est.log_value;
    slot.err = est.log_std_error;
    slot.sweeps = batches * rc.measure_sweeps;
    write_ckpt(k + 1);
  }
}

namespace detail {

inline void run_tasks(std::vector<std::function<void()>>& tasks, int workers) {
  std::vector<std::exception_ptr> errors(tasks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      try {
        tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) break;
        try {
          tasks[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(workers, static_cast<int>(tasks.size()));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t m,
                                                                     std::size_t chunks) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  const std::size_t c = std::max<std::size_t>(1, std::min(chunks, m));
  for (std::size_t i = 0; i < c; ++i) {
    const std::size_t lo = 1 + i * m / c;
    const std::size_t hi = 1 + (i + 1) * m / c;
    if (hi > lo) ranges.emplace_back(lo, hi);
  }
  return ranges;
}

}  // namespace detail

// Runs the three families over the schedule and assembles M2t at every grid
// point.  Chain failures carry the family and grid index; with a checkpoint
// directory the run resumes from the last completed subinterval.
inline std::vector<SreResult> run_schedule(const Schedule& sched, const Lattice& lat,
                                           const ModelParams& params, const ChainRunConfig& rc_in) {
  ChainRunConfig rc = rc_in;
  const std::size_t m = sched.steps();
  // a total error budget translates into a per-step target through the
  // quadrature weights (1, -2, -1) of the three families
  if (rc.target_total_error > 0.0 && m > 0 && rc.target_log_error <= 0.0)
    rc.target_log_error = rc.target_total_error / std::sqrt(6.0 * static_cast<double>(m));
  std::vector<std::vector<StepRatio>> fam(3, std::vector<StepRatio>(m));
  if (m > 0) {
    if (!rc.checkpoint_dir.empty()) std::filesystem::create_directories(rc.checkpoint_dir);
    const auto ranges = detail::chunk_ranges(m, rc.chunks);
    std::vector<std::function<void()>> tasks;
    for (int f = 0; f < 3; ++f) {
      const auto kind = static_cast<PartitionKind>(f);
      for (std::size_t c = 0; c < ranges.size(); ++c) {
        const auto [lo, hi] = ranges[c];
        tasks.emplace_back([&, kind, f, c, lo, hi] {
          const Rng rng(rc.seed, detail::family_stream(kind, c));
          std::string ckpt;
          if (!rc.checkpoint_dir.empty())
            ckpt = rc.checkpoint_dir + "/family" + std::to_string(f) + "_chunk" +
                   std::to_string(c) + ".ckpt";
          ModelParams p = params;
          if (sched.direction == SweepDirection::Coupling) p.coupling = sched.points[lo];
          const double beta0 = sched.direction == SweepDirection::Beta ? sched.points[lo] : params.beta;
          const double beta_sim = kind == PartitionKind::Z2 ? 2.0 * beta0 : beta0;
          if (sched.direction == SweepDirection::Beta) p.beta = beta0;
          try {
            if (kind == PartitionKind::Q) {
              QChain chain(lat, p, beta_sim, rng);
              run_ratio_steps(chain, sched, lo, hi, rc, kind, fam[static_cast<std::size_t>(f)], ckpt);
            } else {
              ZChain chain(lat, p, beta_sim, rng);
              run_ratio_steps(chain, sched, lo, hi, rc, kind, fam[static_cast<std::size_t>(f)], ckpt);
            }
          } catch (const std::exception& e) {
            throw std::runtime_error("family " + std::to_string(f) + " chunk [" +
                                     std::to_string(lo) + "," + std::to_string(hi) +
                                     "): " + e.what());
          }
        });
      }
    }
    detail::run_tasks(tasks, rc.workers);
  }

  std::vector<SreResult> results(m + 1);
  double cq = 0, cz = 0, cz2 = 0, vq = 0, vz = 0, vz2 = 0;
  for (std::size_t k = 0; k <= m; ++k) {
    if (k > 0) {
      cq += fam[0][k - 1].dlog;
      cz += fam[1][k - 1].dlog;
      cz2 += fam[2][k - 1].dlog;
      vq += fam[0][k - 1].err * fam[0][k - 1].err;
      vz += fam[1][k - 1].err * fam[1][k - 1].err;
      vz2 += fam[2][k - 1].err * fam[2][k - 1].err;
    }
    auto& r = results[k];
    r.lambda = sched.points[k];
    r.dlog_q = cq;
    r.dlog_z = cz;
    r.dlog_z2 = cz2;
    r.err_q = std::sqrt(vq);
    r.err_z = std::sqrt(vz);
    r.err_z2 = std::sqrt(vz2);
    r.m2_tilde = sched.reference_value - cq + 2.0 * cz + cz2;
    r.std_error = std::sqrt(vq + 4.0 * vz + vz2);
    r.m2_density = r.m2_tilde / lat.sites;
  }
  return results;
}

// Per-point density with linear error propagation.
inline std::vector<std::pair<double, double>> assemble_density(const std::vector<SreResult>& results,
                                                               int sites) {
  if (sites <= 0) throw std::invalid_argument("assemble_density: sites must be positive");
  std::vector<std::pair<double, double>> out;
  out.reserve(results.size());
  for (const auto& r : results)
    out.emplace_back(r.m2_tilde / sites, r.std_error / sites);
  return out;
}

struct DerivativePoint {
  double lambda = 0.0;
  DerivativeEstimate first;
  DerivativeEstimate second;
};

// Equilibrium chains at each grid point measuring the operator-count moments
// for the thermodynamic-integration derivatives, with warm starts along the
// grid.  The three families run concurrently.
inline std::vector<DerivativePoint> run_derivatives(const std::vector<double>& grid,
                                                    SweepDirection dir, const Lattice& lat,
                                                    const ModelParams& params,
                                                    const ChainRunConfig& rc) {
  for (double g : grid)
    if (!(g > 0.0)) throw std::invalid_argument("run_derivatives: grid points must be > 0");
  const std::size_t m = grid.size();
  std::vector<std::vector<Estimate>> counts(3, std::vector<Estimate>(m));
  std::vector<std::vector<Estimate>> flucts(3, std::vector<Estimate>(m));

  std::vector<std::function<void()>> tasks;
  for (int f = 0; f < 3; ++f) {
    const auto kind = static_cast<PartitionKind>(f);
    tasks.emplace_back([&, kind, f] {
      const Rng rng(rc.seed, detail::family_stream(kind, 9000));
      ModelParams p = params;
      if (dir == SweepDirection::Coupling) p.coupling = grid[0];
      const double beta0 = dir == SweepDirection::Beta ? grid[0] : params.beta;
      if (dir == SweepDirection::Beta) p.beta = beta0;
      const double beta_sim = kind == PartitionKind::Z2 ? 2.0 * beta0 : beta0;
      const std::size_t bin_len = std::max<std::size_t>(1, rc.measure_sweeps / rc.bins);

      auto measure = [&](auto& chain) {
        for (std::size_t k = 0; k < m; ++k) {
          detail::set_lambda(chain, dir, kind, grid[k]);
          chain.thermalize(k == 0 ? rc.therm() : rc.retherm(), rc.safety_factor);
          ChainStats stats = run_bins(chain, rc.measure_sweeps, bin_len);
          std::size_t batches = 1;
          for (;;) {
            counts[static_cast<std::size_t>(f)][k] = count_estimate(stats, dir);
            flucts[static_cast<std::size_t>(f)][k] = fluctuation_estimate(stats, dir);
            const bool count_ok = rc.target_first_error <= 0.0 ||
                                  counts[static_cast<std::size_t>(f)][k].std_error / grid[k] <=
                                      rc.target_first_error;
            const bool fluct_ok = rc.target_second_error <= 0.0 ||
                                  flucts[static_cast<std::size_t>(f)][k].std_error /
                                          (grid[k] * grid[k]) <=
                                      rc.target_second_error;
            if ((count_ok && fluct_ok) || batches >= rc.max_batches) break;
            detail::append_stats(stats, run_bins(chain, rc.measure_sweeps, bin_len));
            ++batches;
          }
        }
      };
      if (kind == PartitionKind::Q) {
        QChain chain(lat, p, beta_sim, rng);
        measure(chain);
      } else {
        ZChain chain(lat, p, beta_sim, rng);
        measure(chain);
      }
    });
  }
  detail::run_tasks(tasks, rc.workers);

  std::vector<DerivativePoint> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    out[k].lambda = grid[k];
    out[k].first = first_derivative(counts[0][k], counts[1][k], counts[2][k], grid[k], dir);
    out[k].second = second_derivative(flucts[0][k], flucts[1][k], flucts[2][k], grid[k], dir);
  }
  return out;
}

}  // namespace sremc
