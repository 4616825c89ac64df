#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "sremc/oracle.hpp"
#include "sremc/qsse.hpp"
#include "support/test_helpers.hpp"

using namespace sremc;
using Catch::Matchers::WithinAbs;

TEST_CASE("initial four-replica configuration is valid by construction") {
  const Lattice lat = build_lattice(1, 4);
  const QConfiguration qc = init_q(lat, 8);
  validate_q(qc, lat);
  for (const auto& r : qc.replicas) {
    REQUIRE(r.n == 0);
    for (auto s : r.spins0) REQUIRE(s == 0);  // all up: zero down spins, even parity
  }
  for (auto o : qc.pauli.offdiag) REQUIRE(o == 0);
  REQUIRE(q_measure(qc) == std::pair<long, long>{0, 0});
}

TEST_CASE("operator count totals") {
  const Lattice lat = build_lattice(1, 4);
  QConfiguration qc = init_q(lat, 8);
  // craft replicas with n = (3,1,0,2) diagonal site operators
  const int ns[4] = {3, 1, 0, 2};
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < ns[k]; ++i)
      qc.replicas[static_cast<std::size_t>(k)].slots[static_cast<std::size_t>(i)] =
          OperatorSlot::diagonal_site(i);
    qc.replicas[static_cast<std::size_t>(k)].n = ns[k];
  }
  const auto [n, nj] = q_measure(qc);
  REQUIRE(n == 6);
  REQUIRE(nj == 0);
}

TEST_CASE("local update at beta = 0 inserts nothing") {
  const Lattice lat = build_lattice(1, 4);
  ModelParams p{1.0, 1.0, 0.0};
  QChain chain(lat, p, 0.0, Rng(2, 1));
  for (int i = 0; i < 50; ++i) chain.sweep();
  REQUIRE(chain.n_tot() == 0);
  chain.validate();
}

TEST_CASE("local update of one replica never reads the others") {
  const Lattice lat = build_lattice(1, 4);
  ModelParams p{1.0, 1.0, 1.3};
  QChain seeded(lat, p, p.beta, Rng(5, 2));
  seeded.thermalize(300);
  QConfiguration a = seeded.configuration();

  QConfiguration b = a;  // same replica 0, scrambled replicas 1..3
  for (int k = 1; k < 4; ++k) {
    auto& r = b.replicas[static_cast<std::size_t>(k)];
    for (auto& s : r.slots)
      if (s.is_null()) s = OperatorSlot::diagonal_site(k - 1);
    r.n = 0;
    r.n_bond = 0;
    for (auto& s : r.slots) {
      if (!s.is_null()) ++r.n;
      if (s.kind() == SlotKind::DiagonalBond) ++r.n_bond;
    }
  }

  std::vector<std::uint8_t> state;
  Rng ra(77, 7), rb(77, 7);
  q_diagonal_update_replica(a, 0, lat, p, p.beta, ra, state);
  q_diagonal_update_replica(b, 0, lat, p, p.beta, rb, state);
  REQUIRE(testing::replica_key(a.replicas[0]) == testing::replica_key(b.replicas[0]));
}

TEST_CASE("parity and periodicity hold through both update schemes") {
  for (auto scheme : {QUpdateScheme::Freezing50, QUpdateScheme::CrossReplica}) {
    for (int dim : {1, 2}) {
      const Lattice lat = build_lattice(dim, dim == 1 ? 4 : 3);
      ModelParams p{1.0, 1.2, 1.1};
      QChain chain(lat, p, p.beta, Rng(9, static_cast<std::uint64_t>(10 * dim + static_cast<int>(scheme))),
                   scheme);
      chain.thermalize(200);
      for (int i = 0; i < 200; ++i) {
        chain.sweep();
        chain.validate();
      }
    }
  }
}

TEST_CASE("slice operators become off-diagonal somewhere in a long run", "[mc]") {
  // ergodicity over the reduced Pauli string: the all-diagonal start must
  // reach off-diagonal slice types
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{0.8, 1.0, 1.5};
  for (auto scheme : {QUpdateScheme::Freezing50, QUpdateScheme::CrossReplica}) {
    QChain chain(lat, p, p.beta, Rng(13, static_cast<std::uint64_t>(scheme)), scheme);
    chain.thermalize(500);
    long offdiag_seen = 0;
    for (int i = 0; i < 3000; ++i) {
      chain.sweep();
      for (auto o : chain.configuration().pauli.offdiag) offdiag_seen += o;
    }
    REQUIRE(offdiag_seen > 0);
  }
}

TEST_CASE("replica exchange symmetry of mean counts", "[mc]") {
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{1.0, 1.0, 1.2};
  QChain chain(lat, p, p.beta, Rng(17, 3));
  chain.thermalize(2000);
  std::array<double, 4> sums{};
  std::array<std::vector<double>, 4> bins;
  const int n_bins = 40, bin_len = 2500;
  for (int b = 0; b < n_bins; ++b) {
    sums = {};
    for (int i = 0; i < bin_len; ++i) {
      chain.sweep();
      for (int k = 0; k < 4; ++k) sums[static_cast<std::size_t>(k)] += chain.configuration().replicas[static_cast<std::size_t>(k)].n;
    }
    for (int k = 0; k < 4; ++k) bins[static_cast<std::size_t>(k)].push_back(sums[static_cast<std::size_t>(k)] / bin_len);
  }
  std::array<Estimate, 4> est;
  for (int k = 0; k < 4; ++k) est[static_cast<std::size_t>(k)] = jackknife_mean(bins[static_cast<std::size_t>(k)]);
  for (int k = 1; k < 4; ++k) {
    const double sigma = std::sqrt(est[0].std_error * est[0].std_error +
                                   est[static_cast<std::size_t>(k)].std_error * est[static_cast<std::size_t>(k)].std_error);
    REQUIRE_THAT(est[static_cast<std::size_t>(k)].value, WithinAbs(est[0].value, 3.5 * sigma));
  }
}

TEST_CASE("mean total count matches the generalized-partition derivative", "[mc]") {
  // <n_tot> = beta * d log Q_engine / d beta, oracle differentiated numerically
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{1.0, 1.0, 1.0};
  const double delta = 1e-4;
  ModelParams pp = p, pm = p;
  pp.beta += delta;
  pm.beta -= delta;
  const double exact =
      p.beta * (oracle_log_q_engine(lat, pp) - oracle_log_q_engine(lat, pm)) / (2.0 * delta);
  for (auto scheme : {QUpdateScheme::Freezing50, QUpdateScheme::CrossReplica}) {
    QChain chain(lat, p, p.beta, Rng(19, static_cast<std::uint64_t>(scheme)), scheme);
    chain.thermalize(4000);
    auto st = run_bins(chain, 120000, 3000);
    const auto est = jackknife_mean(st.n_tot);
    INFO("scheme " << static_cast<int>(scheme) << ": " << est.value << " +- " << est.std_error
                   << " vs " << exact);
    REQUIRE_THAT(est.value, WithinAbs(exact, 3.0 * est.std_error));
  }
}

namespace {

testing::Chi2Result q_stationary_chi2(const Lattice& lat, const ModelParams& p, int lambda,
                                      QUpdateScheme scheme, int stride, std::uint64_t samples,
                                      std::uint64_t stream,
                                      const std::map<std::string, double>& dist) {
  QChain chain(lat, p, p.beta, Rng(23, stream), scheme, lambda);
  for (int i = 0; i < 2000; ++i) chain.sweep();
  std::map<std::string, std::uint64_t> observed;
  for (std::uint64_t s = 0; s < samples; ++s) {
    for (int i = 0; i < stride; ++i) chain.sweep();
    ++observed[testing::q_key(chain.configuration())];
    if (s % 100000 == 0) chain.validate();
  }
  // no invalid configuration may ever be visited
  for (const auto& [key, count] : observed) REQUIRE(dist.count(key) == 1);
  return testing::chi2_compare(dist, observed, static_cast<double>(samples));
}

}  // namespace

TEST_CASE("freezing scheme samples the exact reduced-space distribution", "[mc]") {
  // L=2 ring, capped strings: chi-square of empirical configuration
  // frequencies against the exact four-replica weights
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{0.8, 1.0, 0.6};
  const auto dist = testing::enumerate_q_distribution(lat, p, p.beta, 1);
  REQUIRE(dist.size() > 50);
  const auto res =
      q_stationary_chi2(lat, p, 1, QUpdateScheme::Freezing50, 8, 500000, 100, dist);
  INFO("chi2 " << res.chi2 << " dof " << res.dof << " p " << res.p_value << " max|z| "
               << res.max_abs_z);
  REQUIRE(res.p_value > 0.005);
}

TEST_CASE("both update schemes sample the exact distribution", "[mc]") {
  // the plain cross-replica scheme autocorrelates far more strongly, so this
  // comparison runs at a field-dominated point where it still mixes, with a
  // stride well beyond the measured integrated time
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{0.4, 1.5, 0.4};
  const auto dist = testing::enumerate_q_distribution(lat, p, p.beta, 1);
  REQUIRE(dist.size() > 50);
  for (auto scheme : {QUpdateScheme::Freezing50, QUpdateScheme::CrossReplica}) {
    // sampling stride sits far above the slowest measured mode of each scheme
    const int stride = scheme == QUpdateScheme::Freezing50 ? 32 : 256;
    const std::uint64_t samples = scheme == QUpdateScheme::Freezing50 ? 250000 : 120000;
    const auto res = q_stationary_chi2(lat, p, 1, scheme, stride, samples,
                                       200 + static_cast<std::uint64_t>(scheme), dist);
    INFO("scheme " << static_cast<int>(scheme) << ": chi2 " << res.chi2 << " dof " << res.dof
                   << " p " << res.p_value << " max|z| " << res.max_abs_z);
    REQUIRE(res.p_value > 0.005);
  }
}
