#pragma once

// Dense ground truth for small systems: the transverse-field Ising
// Hamiltonian, Gibbs states, the stabilizer entropy
//
//     M_2  = -log[ (1/2^N) sum_P Tr(rho P)^4 ],     S_2 = -log Tr rho^2,
//     M2t  =  M_2 - S_2,
//
// and the generalized partition functions
//
//     Q = sum_P [Tr(e^{-beta H} P)]^4,  Z = Tr e^{-beta H},  Z2 = Tr e^{-2 beta H}.
//
// Everything is real in the Z basis once Y is replaced by Ytilde = [[0,-1],[1,0]];
// squares make the substitution irrelevant for M_2.  A Pauli string is a pair
// of bit masks (flip, sign): per site I=(0,0), X=(1,0), Ytilde=(1,1), Z=(0,1),
// and Tr(M P) = sum_z (-1)^{popcount(z & sign)} M(z ^ flip, z).  The 4^N
// enumeration uses the sparse action; per-string traces are stored and
// reduced in fixed order so fixtures are bit-stable at any thread count.

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sremc/lattice.hpp"

namespace sremc {

inline constexpr int kOracleCap = 10;  // full enumeration is 8^N; 10 is the practical limit

namespace detail {
inline int qubits_of(const Eigen::MatrixXd& m, int cap) {
  const auto dim = m.rows();
  if (dim != m.cols() || dim < 2) throw std::invalid_argument("oracle: matrix must be square, dim >= 2");
  int n = 0;
  while ((1LL << n) < dim) ++n;
  if ((1LL << n) != dim) throw std::invalid_argument("oracle: dimension must be a power of two");
  if (n > cap) throw std::invalid_argument("oracle: system exceeds the enumeration cap");
  return n;
}
}  // namespace detail

inline Eigen::MatrixXd build_hamiltonian(const Lattice& lat, const ModelParams& p,
                                         int cap = kOracleCap) {
  p.check();
  if (lat.sites > cap) throw std::invalid_argument("build_hamiltonian: N exceeds oracle cap");
  const std::int64_t dim = 1LL << lat.sites;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  for (std::int64_t z = 0; z < dim; ++z) {
    double diag = 0.0;
    for (const auto& b : lat.bonds) {
      const bool parallel = (((z >> b.first) ^ (z >> b.second)) & 1LL) == 0;
      diag += parallel ? -p.coupling : p.coupling;
    }
    H(z, z) = diag;
    for (int j = 0; j < lat.sites; ++j) H(z ^ (1LL << j), z) += -p.field;
  }
  return H;
}

// rho = e^{-beta H} / Tr e^{-beta H} via eigendecomposition.
inline Eigen::MatrixXd gibbs_state(const Eigen::MatrixXd& H, double beta) {
  if (beta < 0.0) throw std::invalid_argument("gibbs_state: beta must be >= 0");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const Eigen::VectorXd& e = es.eigenvalues();
  Eigen::VectorXd w = (-(beta) * (e.array() - e(0))).exp();
  w /= w.sum();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

// Tr(M e^{-beta H}) / Tr(e^{-beta H}).
inline double thermal_average(const Eigen::MatrixXd& M, const Eigen::MatrixXd& H, double beta) {
  return (M * gibbs_state(H, beta)).trace();
}

// Per-string traces Tr(M P) for all 4^N reduced-real Pauli strings, indexed
// base-4 with per-site digits I=0, X=1, Ytilde=2, Z=3 (site 0 = least
// significant digit).
inline std::vector<double> pauli_traces(const Eigen::MatrixXd& M, int cap = kOracleCap) {
  const int n = detail::qubits_of(M, cap);
  const std::int64_t dim = 1LL << n;
  const std::int64_t total = 1LL << (2 * n);
  std::vector<double> traces(static_cast<std::size_t>(total));

  auto work = [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t p = lo; p < hi; ++p) {
      std::uint64_t flip = 0, sign = 0;
      std::int64_t t = p;
      for (int j = 0; j < n; ++j, t >>= 2) {
        const int d = static_cast<int>(t & 3);
        if (d == 1 || d == 2) flip |= 1ULL << j;
        if (d == 2 || d == 3) sign |= 1ULL << j;
      }
      double acc = 0.0;
      for (std::int64_t z = 0; z < dim; ++z) {
        const double v = M(static_cast<std::int64_t>(z ^ static_cast<std::int64_t>(flip)), z);
        acc += (std::popcount(static_cast<std::uint64_t>(z) & sign) & 1) ? -v : v;
      }
      traces[static_cast<std::size_t>(p)] = acc;
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (total >= 4096 && hw > 1) {
    const std::int64_t chunk = (total + hw - 1) / hw;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < hw; ++t) {
      const std::int64_t lo = static_cast<std::int64_t>(t) * chunk;
      if (lo >= total) break;
      pool.emplace_back(work, lo, std::min(total, lo + chunk));
    }
    for (auto& th : pool) th.join();
  } else {
    work(0, total);
  }
  return traces;
}

struct SreValues {
  double m2 = 0.0;        // pure-state 2-SRE of the density matrix
  double s2 = 0.0;        // -log Tr rho^2
  double m2_tilde = 0.0;  // mixed-state extension M_2 - S_2
};

// The characteristic function Xi_P = [Tr(rho P)]^2 / 2^N over all strings.
inline std::vector<double> characteristic_function(const Eigen::MatrixXd& rho,
                                                   int cap = kOracleCap) {
  const int n = detail::qubits_of(rho, cap);
  std::vector<double> xi = pauli_traces(rho, cap);
  const double norm = 1.0 / static_cast<double>(1LL << n);
  for (auto& x : xi) x = x * x * norm;
  return xi;
}

inline SreValues sre_exact(const Eigen::MatrixXd& rho, int cap = kOracleCap) {
  const int n = detail::qubits_of(rho, cap);
  const std::vector<double> traces = pauli_traces(rho, cap);
  double sum2 = 0.0, sum4 = 0.0;
  for (double t : traces) {
    const double t2 = t * t;
    sum2 += t2;
    sum4 += t2 * t2;
  }
  const double dim = static_cast<double>(1LL << n);
  SreValues v;
  v.m2 = -std::log(sum4 / dim);
  v.s2 = -std::log(sum2 / dim);  // sum_P Tr(rho P)^2 = 2^N Tr rho^2
  v.m2_tilde = v.m2 - v.s2;
  return v;
}

struct GeneralizedPartitions {
  double log_q = 0.0, log_z = 0.0, log_z2 = 0.0;
  double q = 0.0, z = 0.0, z2 = 0.0;  // raw values; inf if out of range
  double m2_tilde = 0.0;              // -log Q + 2 log Z + log Z2 + N log 2
};

inline GeneralizedPartitions generalized_partitions(const Eigen::MatrixXd& H, double beta,
                                                    int cap = kOracleCap) {
  const int n = detail::qubits_of(H, cap);
  if (beta < 0.0) throw std::invalid_argument("generalized_partitions: beta must be >= 0");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const Eigen::VectorXd& e = es.eigenvalues();
  const double e0 = e(0);

  const Eigen::VectorXd w = (-(beta) * (e.array() - e0)).exp();
  const Eigen::VectorXd w2 = (-(2.0 * beta) * (e.array() - e0)).exp();
  GeneralizedPartitions g;
  g.log_z = -beta * e0 + std::log(w.sum());
  g.log_z2 = -2.0 * beta * e0 + std::log(w2.sum());

  const Eigen::MatrixXd scaled = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
  const std::vector<double> traces = pauli_traces(scaled, cap);
  double sum4 = 0.0;
  for (double t : traces) sum4 += (t * t) * (t * t);
  g.log_q = -4.0 * beta * e0 + std::log(sum4);

  g.q = std::exp(g.log_q);
  g.z = std::exp(g.log_z);
  g.z2 = std::exp(g.log_z2);
  g.m2_tilde = -g.log_q + 2.0 * g.log_z + g.log_z2 + n * std::log(2.0);
  return g;
}

// ---- conventions shared with the samplers -------------------------------

// Constant energy shift per the operator decomposition: the sampled weights
// correspond to H - (J N_b + h N) I.
inline double sse_constant_shift(const Lattice& lat, const ModelParams& p) {
  return p.coupling * lat.n_bonds() + p.field * lat.sites;
}

// log of the partition function the single-replica sampler targets at
// simulation inverse temperature beta_sim.
inline double oracle_log_z_sse(const Lattice& lat, const ModelParams& p, double beta_sim,
                               int cap = kOracleCap) {
  ModelParams q = p;
  q.beta = beta_sim;
  Eigen::MatrixXd H = build_hamiltonian(lat, q, cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const Eigen::VectorXd& e = es.eigenvalues();
  const double e0 = e(0);
  const double logz = -beta_sim * e0 + std::log((-(beta_sim) * (e.array() - e0)).exp().sum());
  return logz + beta_sim * sse_constant_shift(lat, p);
}

// log of the generalized partition function in the engine convention
// (shifted Hamiltonian, global 2^N dropped).
inline double oracle_log_q_engine(const Lattice& lat, const ModelParams& p,
                                  int cap = kOracleCap) {
  const GeneralizedPartitions g = generalized_partitions(build_hamiltonian(lat, p, cap), p.beta, cap);
  return g.log_q + 4.0 * p.beta * sse_constant_shift(lat, p) -
         lat.sites * std::log(2.0);
}

inline double oracle_m2_tilde(const Lattice& lat, const ModelParams& p, int cap = kOracleCap) {
  return generalized_partitions(build_hamiltonian(lat, p, cap), p.beta, cap).m2_tilde;
}

// <n> = beta_sim * < -H + (J N_b + h N) > at the simulated temperature.
inline double oracle_mean_operator_count(const Lattice& lat, const ModelParams& p,
                                         double beta_sim, int cap = kOracleCap) {
  Eigen::MatrixXd H = build_hamiltonian(lat, p, cap);
  const double energy = thermal_average(H, H, beta_sim);
  return beta_sim * (-energy + sse_constant_shift(lat, p));
}

// Central finite differences of the exact mixed-state 2-SRE.
inline double oracle_m2_tilde_derivative(const Lattice& lat, const ModelParams& p,
                                         SweepDirection dir, int order, double delta = 0.01,
                                         int cap = kOracleCap) {
  auto at = [&](double shift) {
    ModelParams q = p;
    (dir == SweepDirection::Beta ? q.beta : q.coupling) += shift;
    return oracle_m2_tilde(lat, q, cap);
  };
  if (order == 1) return (at(delta) - at(-delta)) / (2.0 * delta);
  if (order == 2) return (at(delta) - 2.0 * at(0.0) + at(-delta)) / (delta * delta);
  throw std::invalid_argument("oracle_m2_tilde_derivative: order must be 1 or 2");
}

// Exact reference for the decoupled model: at J = 0 the Gibbs state is a
// product over sites and M2t = N log[(1+t^2)/(1+t^4)], t = tanh(beta h).
inline double product_state_m2_tilde(int sites, double beta, double field) {
  const double t = std::tanh(beta * field);
  const double t2 = t * t;
  return sites * std::log((1.0 + t2) / (1.0 + t2 * t2));
}

}  // namespace sremc
