#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sremc/estimators.hpp"
#include "sremc/oracle.hpp"
#include "sremc/qsse.hpp"
#include "sremc/sse.hpp"

using namespace sremc;
using Catch::Matchers::WithinAbs;

namespace {

ChainStats fake_ratio_stats(std::vector<double> bins) {
  ChainStats st;
  st.bin_length = 100;
  st.ratio = std::move(bins);
  st.n_tot.assign(st.ratio.size(), 0.0);
  st.nj_tot.assign(st.ratio.size(), 0.0);
  return st;
}

}  // namespace

TEST_CASE("identity ratio is exact") {
  const auto st = fake_ratio_stats({1.0, 1.0, 1.0, 1.0});
  const auto r = ratio_beta(st, 2.0, 2.0);
  REQUIRE(r.value == 1.0);
  REQUIRE(r.std_error == 0.0);
  REQUIRE(r.log_value == 0.0);
}

TEST_CASE("zero exponent gives unit ratio") {
  // n identically zero: every sample factor is (lambda'/lambda)^0 = 1
  const Lattice lat = build_lattice(1, 4);
  ModelParams p{1.0, 1.0, 1e-9};
  ZChain chain(lat, p, p.beta, Rng(3, 1), 8);
  ObservableSpec obs;
  obs.record_ratio = true;
  obs.ratio_base = 0.5;
  auto st = run_bins(chain, 200, 50, obs);
  const auto r = ratio_beta(st, 0.5e-9, 1e-9);
  REQUIRE_THAT(r.value, WithinAbs(1.0, 1e-12));
}

TEST_CASE("ratio estimators reject malformed inputs") {
  const auto one_bin = fake_ratio_stats({0.5});
  REQUIRE_THROWS_AS(ratio_beta(one_bin, 0.5, 1.0), std::runtime_error);
  const auto ok = fake_ratio_stats({0.5, 0.6, 0.4, 0.5});
  REQUIRE_THROWS_AS(ratio_beta(ok, 1.5, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(ratio_coupling(ok, 0.0, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(ratio_coupling(ok, 0.7, 0.5), std::invalid_argument);
  const auto dead = fake_ratio_stats({0.0, 0.0, 0.0, 0.0});
  REQUIRE_THROWS_AS(ratio_beta(dead, 0.5, 1.0), std::runtime_error);
}

TEST_CASE("zero-coupling reference degenerates to the indicator estimator") {
  // factors are 0^{n_J}: 1 when n_J = 0, else 0; the mean is the probability
  // of a bond-free configuration
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{0.4, 1.0, 0.8};
  ZChain chain(lat, p, p.beta, Rng(5, 2));
  chain.thermalize(2000);
  ObservableSpec obs;
  obs.record_ratio = true;
  obs.ratio_base = 0.0;
  obs.ratio_uses_bond_count = true;
  auto st = run_bins(chain, 40000, 1000, obs);
  double p_free = 0.0;
  for (std::size_t b = 0; b < st.ratio.size(); ++b) p_free += st.ratio[b];
  p_free /= static_cast<double>(st.ratio.size());
  const auto r = ratio_coupling(st, 0.0, p.coupling);
  REQUIRE_THAT(r.value, WithinAbs(p_free, 1e-12));
  REQUIRE(r.value > 0.0);
  REQUIRE(r.value < 1.0);
}

TEST_CASE("beta ratio matches the oracle", "[mc]") {
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{1.0, 1.0, 1.0};
  ZChain chain(lat, p, 1.0, Rng(31, 1));
  chain.thermalize(4000);
  ObservableSpec obs;
  obs.record_ratio = true;
  obs.ratio_base = 0.5;  // beta 0.5 -> 1.0
  auto st = run_bins(chain, 200000, 5000, obs);
  const auto r = ratio_beta(st, 0.5, 1.0);
  const double exact = std::exp(oracle_log_z_sse(lat, p, 0.5) - oracle_log_z_sse(lat, p, 1.0));
  INFO(r.value << " +- " << r.std_error << " vs " << exact);
  REQUIRE_THAT(r.value, WithinAbs(exact, 3.0 * r.std_error));
}

TEST_CASE("coupling ratio matches the oracle", "[mc]") {
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{1.0, 1.0, 1.0};
  ZChain chain(lat, p, p.beta, Rng(37, 2));
  chain.thermalize(4000);
  ObservableSpec obs;
  obs.record_ratio = true;
  obs.ratio_base = 0.5;  // J 0.5 -> 1.0
  obs.ratio_uses_bond_count = true;
  auto st = run_bins(chain, 200000, 5000, obs);
  const auto r = ratio_coupling(st, 0.5, 1.0);
  ModelParams p_half = p;
  p_half.coupling = 0.5;
  const double exact =
      std::exp(oracle_log_z_sse(lat, p_half, p.beta) - oracle_log_z_sse(lat, p, p.beta));
  INFO(r.value << " +- " << r.std_error << " vs " << exact);
  REQUIRE_THAT(r.value, WithinAbs(exact, 3.0 * r.std_error));
}

TEST_CASE("telescoping ratios multiply consistently", "[mc]") {
  // Z(0.5)/Z(1.0) directly vs the product over [0.5,0.75] and [0.75,1.0]
  const Lattice lat = build_lattice(1, 2);
  ModelParams p{1.0, 1.0, 1.0};
  auto measure = [&](double bprev, double bk, std::uint64_t stream) {
    ZChain chain(lat, p, bk, Rng(41, stream));
    chain.thermalize(4000);
    ObservableSpec obs;
    obs.record_ratio = true;
    obs.ratio_base = bprev / bk;
    auto st = run_bins(chain, 150000, 5000, obs);
    return ratio_beta(st, bprev, bk);
  };
  const auto direct = measure(0.5, 1.0, 1);
  const auto a = measure(0.5, 0.75, 2);
  const auto b = measure(0.75, 1.0, 3);
  const double prod = a.value * b.value;
  const double sigma = std::sqrt(std::pow(a.value * b.std_error, 2) +
                                 std::pow(b.value * a.std_error, 2) +
                                 direct.std_error * direct.std_error);
  REQUIRE_THAT(prod, WithinAbs(direct.value, 3.0 * sigma));
}

TEST_CASE("first derivative arithmetic") {
  const Estimate e{6.0, 0.1};
  const auto d = first_derivative(e, e, e, 2.0, SweepDirection::Coupling);
  // all effective energies equal E: value = E - 2E - E = -2E, with E = -3
  REQUIRE_THAT(d.value, WithinAbs(6.0, 1e-12));
  REQUIRE_THAT(d.parts[0], WithinAbs(-3.0, 1e-12));
  REQUIRE_THAT(d.value, WithinAbs(d.recompute(), 0.0));
  REQUIRE_THAT(d.std_error, WithinAbs(std::sqrt(6.0) * 0.05, 1e-12));
  REQUIRE_THROWS_AS(first_derivative(e, e, e, 0.0, SweepDirection::Coupling),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(
      first_derivative(Estimate{std::nan(""), 0.0}, e, e, 1.0, SweepDirection::Beta),
      std::invalid_argument);
}

TEST_CASE("second derivative arithmetic") {
  SECTION("all parts equal") {
    const Estimate c{4.0, 0.2};
    const auto d = second_derivative(c, c, c, 2.0, SweepDirection::Coupling);
    // -(C - 2C - C)/lambda^2 = 2C/lambda^2
    REQUIRE_THAT(d.value, WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(d.recompute(), WithinAbs(d.value, 0.0));
  }
  SECTION("constant count has C = -<n>") {
    // n constant: <n(n-1)> = <n>^2 - <n>, so C = -<n> and each part
    // contributes <n>/lambda^2 to the combination
    ChainStats st;
    st.bin_length = 10;
    st.n_tot = {5.0, 5.0, 5.0};
    st.n_pair = {20.0, 20.0, 20.0};
    st.nj_tot = st.n_tot;
    st.nj_pair = st.n_pair;
    const auto c = fluctuation_estimate(st, SweepDirection::Beta);
    REQUIRE_THAT(c.value, WithinAbs(-5.0, 1e-12));
    const auto d = second_derivative(c, Estimate{0.0, 0.0}, Estimate{0.0, 0.0}, 2.0,
                                     SweepDirection::Beta);
    REQUIRE_THAT(d.value, WithinAbs(5.0 / 4.0, 1e-12));
  }
}

TEST_CASE("zero-coupling limit has vanishing coupling derivatives") {
  // n_J is identically zero in all three ensembles at J = 0
  const Estimate zero{0.0, 0.0};
  const auto d = first_derivative(zero, zero, zero, 1e-6, SweepDirection::Coupling);
  REQUIRE_THAT(d.value, WithinAbs(0.0, 1e-12));
  for (double part : d.parts) REQUIRE_THAT(part, WithinAbs(0.0, 1e-12));
}

TEST_CASE("coupling derivatives match oracle finite differences", "[mc]") {
  const Lattice lat = build_lattice(1, 4);
  const double beta = 2.0;

  SECTION("first derivative at J = 0.5") {
    ModelParams p{0.5, 1.0, beta};
    std::array<Estimate, 3> counts;
    for (int f = 0; f < 3; ++f) {
      const double beta_sim = f == 2 ? 2.0 * beta : beta;
      if (f == 0) {
        QChain chain(lat, p, beta_sim, Rng(51, static_cast<std::uint64_t>(f)));
        chain.thermalize(3000);
        counts[static_cast<std::size_t>(f)] = jackknife_mean(run_bins(chain, 60000, 2000).nj_tot);
      } else {
        ZChain chain(lat, p, beta_sim, Rng(51, static_cast<std::uint64_t>(f)));
        chain.thermalize(3000);
        counts[static_cast<std::size_t>(f)] = jackknife_mean(run_bins(chain, 60000, 2000).nj_tot);
      }
    }
    const auto d = first_derivative(counts[0], counts[1], counts[2], p.coupling,
                                    SweepDirection::Coupling);
    const double exact = oracle_m2_tilde_derivative(lat, p, SweepDirection::Coupling, 1, 0.01);
    INFO(d.value << " +- " << d.std_error << " vs oracle " << exact);
    REQUIRE_THAT(d.value, WithinAbs(exact, 3.0 * d.std_error));
  }
}

TEST_CASE("derivative estimate is recomputable bit-for-bit") {
  const Estimate a{5.5, 0.2}, b{3.25, 0.08}, c{7.125, 0.4};
  const auto d1 = first_derivative(a, b, c, 1.75, SweepDirection::Beta);
  REQUIRE(d1.value == d1.recompute());
  const auto d2 = second_derivative(a, b, c, 1.75, SweepDirection::Beta);
  REQUIRE(d2.value == d2.recompute());
}
