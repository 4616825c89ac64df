#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "sremc/checkpoint.hpp"
#include "sremc/config.hpp"
#include "sremc/results_io.hpp"

using namespace sremc;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool chains_equal(const QChain& a, const QChain& b) {
  if (!(a.rng() == b.rng())) return false;
  if (a.configuration().pauli.offdiag != b.configuration().pauli.offdiag) return false;
  for (int k = 0; k < 4; ++k) {
    const auto& ra = a.configuration().replicas[static_cast<std::size_t>(k)];
    const auto& rb = b.configuration().replicas[static_cast<std::size_t>(k)];
    if (ra.spins0 != rb.spins0 || ra.n != rb.n || ra.n_bond != rb.n_bond) return false;
    if (ra.slots.size() != rb.slots.size()) return false;
    for (std::size_t i = 0; i < ra.slots.size(); ++i)
      if (!(ra.slots[i] == rb.slots[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("rng state round-trips exactly") {
  Rng a(123456789, 42);
  for (int i = 0; i < 1000; ++i) a.bits();
  const std::string state = a.serialize();
  Rng b = Rng::deserialize(state);
  REQUIRE(a == b);
  for (int i = 0; i < 100; ++i) REQUIRE(a.bits() == b.bits());
  REQUIRE_THROWS_AS(Rng::deserialize("garbage"), std::runtime_error);
}

TEST_CASE("split streams are independent of parent draws") {
  Rng a(99, 1);
  Rng c1 = a.split(4);
  a.bits();
  a.bits();
  Rng c2 = a.split(4);
  REQUIRE(c1 == c2);
}

TEST_CASE("config json round-trips with defaults materialized") {
  RunConfig c;
  c.dimension = 2;
  c.linear_size = 4;
  c.coupling = 1.0;
  c.field = 3.04438;
  c.beta = 4.0;
  c.direction = SweepDirection::Coupling;
  c.lambda_end = 2.0;
  c.seed = 99;
  const nlohmann::json j = to_json(c);
  const RunConfig back = config_from_json(j);
  REQUIRE(to_json(back) == j);
  REQUIRE(config_hash(back) == config_hash(c));

  // partial configs inherit defaults
  const RunConfig partial = config_from_json(nlohmann::json::parse(R"({"model":{"L":6}})"));
  REQUIRE(partial.linear_size == 6);
  REQUIRE(partial.dimension == 1);
  REQUIRE(partial.sweeps == RunConfig{}.sweeps);

  REQUIRE_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"sweep":{"direction":"x"}})")),
                    std::invalid_argument);
}

TEST_CASE("config hash is sensitive to every field") {
  RunConfig a;
  const auto h = config_hash(a);
  RunConfig b = a;
  b.seed += 1;
  REQUIRE(config_hash(b) != h);
  b = a;
  b.epsilon = 0.25;
  REQUIRE(config_hash(b) != h);
}

TEST_CASE("sweep results round-trip through the csv layer") {
  RunConfig cfg;
  cfg.results_path = temp_path("sremc_results_test.csv");
  std::vector<SreResult> results(3);
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].lambda = 0.5 * static_cast<double>(i);
    results[i].m2_tilde = 0.1 * static_cast<double>(i) + 1e-13;
    results[i].m2_density = results[i].m2_tilde / 4.0;
    results[i].std_error = 0.01;
    results[i].dlog_q = -1.5 * static_cast<double>(i);
  }
  write_sweep_results(cfg.results_path, cfg, results);

  const ResultsFile rf = read_results(cfg.results_path);
  REQUIRE(rf.kind == "sweep");
  REQUIRE(rf.schema_version == kResultsSchemaVersion);
  REQUIRE(rf.seed == cfg.seed);
  REQUIRE(rf.rows.size() == results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    REQUIRE(rf.column(i, "lambda") == results[i].lambda);
    REQUIRE(rf.column(i, "m2_tilde") == results[i].m2_tilde);
    REQUIRE(rf.column(i, "dlog_q") == results[i].dlog_q);
  }
  // the embedded config regenerates the run configuration
  const RunConfig back = config_from_json(rf.config);
  REQUIRE(config_hash(back) == config_hash(cfg));
  std::filesystem::remove(cfg.results_path);
}

TEST_CASE("readers reject unknown schema versions") {
  const std::string path = temp_path("sremc_bad_schema.csv");
  {
    std::ofstream out(path);
    out << "# sremc-results v99\nlambda\n1.0\n";
  }
  REQUIRE_THROWS_AS(read_results(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("replica and four-replica checkpoints are bit-exact") {
  const Lattice lat = build_lattice(2, 3);
  ModelParams p{1.0, 1.4, 1.2};
  QChain chain(lat, p, p.beta, Rng(7, 7));
  chain.thermalize(500);
  const std::string path = temp_path("sremc_q.ckpt");
  write_checkpoint_file(path, [&](BinaryWriter& w) {
    write_qconfiguration(w, chain.configuration());
    w.str(chain.rng().serialize());
  });
  QConfiguration restored;
  Rng rng_restored;
  read_checkpoint_file(path, [&](BinaryReader& r) {
    restored = read_qconfiguration(r);
    rng_restored = Rng::deserialize(r.str());
  });
  REQUIRE(restored.pauli.offdiag == chain.configuration().pauli.offdiag);
  for (int k = 0; k < 4; ++k) {
    const auto& a = chain.configuration().replicas[static_cast<std::size_t>(k)];
    const auto& b = restored.replicas[static_cast<std::size_t>(k)];
    REQUIRE(a.spins0 == b.spins0);
    REQUIRE(a.slots.size() == b.slots.size());
    for (std::size_t i = 0; i < a.slots.size(); ++i) REQUIRE(a.slots[i] == b.slots[i]);
    REQUIRE(a.n == b.n);
    REQUIRE(a.n_bond == b.n_bond);
  }
  REQUIRE(rng_restored == chain.rng());

  // resumed evolution is identical to continued evolution
  QChain continued = chain;
  QChain resumed(lat, p, p.beta, rng_restored);
  resumed.configuration() = restored;
  for (int i = 0; i < 50; ++i) {
    continued.sweep();
    resumed.sweep();
  }
  REQUIRE(chains_equal(continued, resumed));
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string path = temp_path("sremc_corrupt.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "notackpt";
  }
  REQUIRE_THROWS_AS(read_checkpoint_file(path, [](BinaryReader&) {}), std::runtime_error);
  std::filesystem::remove(path);
}
