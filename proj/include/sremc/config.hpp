#pragma once

// Run configuration: a single JSON file with every default materialized, so
// the header block embedded in each results file reproduces the run exactly.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sremc/lattice.hpp"
#include "sremc/schedule.hpp"

namespace sremc {

struct RunConfig {
  // model
  int dimension = 1;
  int linear_size = 4;
  double coupling = 1.0;
  double field = 1.0;
  double beta = 1.0;
  // sweep
  SweepDirection direction = SweepDirection::Coupling;
  double lambda_start = 0.0;
  double lambda_end = 1.0;
  double epsilon = 0.5;
  double cap_constant = 0.0;  // 0 = hard cap only
  std::vector<double> waypoints;  // parameter values the grid must contain
  // chain
  std::size_t sweeps = 20000;
  std::size_t bins = 32;
  std::size_t thermalization = 0;    // 0 = auto
  std::size_t rethermalization = 0;  // 0 = auto
  std::uint64_t seed = 1;
  std::size_t chunks = 1;
  double target_log_error = 0.0;
  double target_total_error = 0.0;
  double target_first_error = 0.0;
  double target_second_error = 0.0;
  std::size_t max_batches = 16;
  // derivatives
  std::vector<double> derivative_grid;
  // oracle
  int oracle_cap = kOracleCap;
  std::vector<double> oracle_couplings;
  std::vector<double> oracle_betas;
  // autocorr
  std::size_t autocorr_sweeps = 20000;
  std::size_t autocorr_thermalization = 2000;
  std::size_t autocorr_seeds = 5;
  double autocorr_threshold = 0.01;
  // output
  std::string results_path = "results.csv";
  std::string checkpoint_dir;

  Lattice lattice() const { return build_lattice(dimension, linear_size); }
  ModelParams params() const {
    ModelParams p;
    p.coupling = coupling;
    p.field = field;
    p.beta = beta;
    p.check();
    return p;
  }
  ChainRunConfig chain_config() const {
    ChainRunConfig rc;
    rc.measure_sweeps = sweeps;
    rc.bins = bins;
    rc.therm_sweeps = thermalization;
    rc.retherm_sweeps = rethermalization;
    rc.seed = seed;
    rc.chunks = chunks;
    rc.target_log_error = target_log_error;
    rc.target_total_error = target_total_error;
    rc.target_first_error = target_first_error;
    rc.target_second_error = target_second_error;
    rc.max_batches = max_batches;
    rc.checkpoint_dir = checkpoint_dir;
    return rc;
  }
};

inline std::string direction_name(SweepDirection d) {
  return d == SweepDirection::Beta ? "beta" : "J";
}
inline SweepDirection parse_direction(const std::string& s) {
  if (s == "beta") return SweepDirection::Beta;
  if (s == "J" || s == "coupling") return SweepDirection::Coupling;
  throw std::invalid_argument("direction must be \"beta\" or \"J\"");
}

// Canonical JSON with all defaults filled in (nlohmann::json sorts keys).
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["model"] = {{"dimension", c.dimension}, {"L", c.linear_size}, {"J", c.coupling},
                {"h", c.field},             {"beta", c.beta}};
  j["sweep"] = {{"direction", direction_name(c.direction)},
                {"start", c.lambda_start},
                {"end", c.lambda_end},
                {"epsilon", c.epsilon},
                {"cap_constant", c.cap_constant},
                {"waypoints", c.waypoints}};
  j["chain"] = {{"sweeps", c.sweeps},
                {"bins", c.bins},
                {"thermalization", c.thermalization},
                {"rethermalization", c.rethermalization},
                {"seed", c.seed},
                {"chunks", c.chunks},
                {"target_log_error", c.target_log_error},
                {"target_total_error", c.target_total_error},
                {"target_first_error", c.target_first_error},
                {"target_second_error", c.target_second_error},
                {"max_batches", c.max_batches}};
  j["derivatives"] = {{"grid", c.derivative_grid}};
  j["oracle"] = {{"cap", c.oracle_cap}, {"couplings", c.oracle_couplings}, {"betas", c.oracle_betas}};
  j["autocorr"] = {{"sweeps", c.autocorr_sweeps},
                   {"thermalization", c.autocorr_thermalization},
                   {"seeds", c.autocorr_seeds},
                   {"threshold", c.autocorr_threshold}};
  j["output"] = {{"results", c.results_path}, {"checkpoint_dir", c.checkpoint_dir}};
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  auto get = [](const nlohmann::json& obj, const char* key, auto fallback) {
    using T = decltype(fallback);
    return obj.contains(key) ? obj.at(key).get<T>() : fallback;
  };
  if (j.contains("model")) {
    const auto& m = j.at("model");
    c.dimension = get(m, "dimension", c.dimension);
    c.linear_size = get(m, "L", c.linear_size);
    c.coupling = get(m, "J", c.coupling);
    c.field = get(m, "h", c.field);
    c.beta = get(m, "beta", c.beta);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    c.direction = parse_direction(get(s, "direction", std::string("J")));
    c.lambda_start = get(s, "start", c.lambda_start);
    c.lambda_end = get(s, "end", c.lambda_end);
    c.epsilon = get(s, "epsilon", c.epsilon);
    c.cap_constant = get(s, "cap_constant", c.cap_constant);
    c.waypoints = get(s, "waypoints", c.waypoints);
  }
  if (j.contains("chain")) {
    const auto& ch = j.at("chain");
    c.sweeps = get(ch, "sweeps", c.sweeps);
    c.bins = get(ch, "bins", c.bins);
    c.thermalization = get(ch, "thermalization", c.thermalization);
    c.rethermalization = get(ch, "rethermalization", c.rethermalization);
    c.seed = get(ch, "seed", c.seed);
    c.chunks = get(ch, "chunks", c.chunks);
    c.target_log_error = get(ch, "target_log_error", c.target_log_error);
    c.target_total_error = get(ch, "target_total_error", c.target_total_error);
    c.target_first_error = get(ch, "target_first_error", c.target_first_error);
    c.target_second_error = get(ch, "target_second_error", c.target_second_error);
    c.max_batches = get(ch, "max_batches", c.max_batches);
  }
  if (j.contains("derivatives")) c.derivative_grid = get(j.at("derivatives"), "grid", c.derivative_grid);
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    c.oracle_cap = get(o, "cap", c.oracle_cap);
    c.oracle_couplings = get(o, "couplings", c.oracle_couplings);
    c.oracle_betas = get(o, "betas", c.oracle_betas);
  }
  if (j.contains("autocorr")) {
    const auto& a = j.at("autocorr");
    c.autocorr_sweeps = get(a, "sweeps", c.autocorr_sweeps);
    c.autocorr_thermalization = get(a, "thermalization", c.autocorr_thermalization);
    c.autocorr_seeds = get(a, "seeds", c.autocorr_seeds);
    c.autocorr_threshold = get(a, "threshold", c.autocorr_threshold);
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    c.results_path = get(o, "results", c.results_path);
    c.checkpoint_dir = get(o, "checkpoint_dir", c.checkpoint_dir);
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

// FNV-1a over the canonical dump.
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sremc
