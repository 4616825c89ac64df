#pragma once

// Four-replica sampler for the generalized partition function
//
//     Q = sum_P [ Tr(e^{-beta H} P) ]^4 ,
//
// restricted to the reduced configuration space: the Pauli string is kept
// only as a per-site diagonal/off-diagonal flag (reduced Pauli string,
// (I+Z) or (X+Ytilde)), shared by all four replicas, and boundary states
// must carry an even number of down spins per site across the replicas.
// Summing each site's slice operator over its two Pauli members
// contributes a uniform factor 2 on the even-parity sector and cancels all
// negative signs; the global 2^N is dropped together with the 1/2^N of the
// stabilizer-entropy normalization.
//
// A configuration is therefore {alpha_0^k, S_Lambda^k}_{k=1..4} plus the
// shared reduced string.  Per replica the weight is the standard series
// weight with the slice applied between alpha_0^k and alpha_1^k.
//
// Updates:
//  - local: per replica and slot, identical to the single-replica diagonal
//    update with the propagated state seeded by the slice;
//  - nonlocal: branching clusters extended across replicas through the
//    slice operators.  Each slice operator participates through one of two
//    dressings drawn afresh every sweep:
//      * active: the cluster includes one side of the slice operator in
//        every replica (sides drawn with an even number of boundary
//        crossings); flipping such a cluster toggles the slice between
//        diagonal and off-diagonal in all replicas at once;
//      * frozen: the slice operator is excluded from any cluster.  The four
//        worldlines pass through the slice in two randomly paired replicas,
//        so boundary spins flip in pairs and the slice type stays fixed.
//    The 50%-freezing scheme draws the frozen dressing with probability 1/2
//    per site; the plain cross-replica scheme keeps every site active.
//    Both preserve the parity constraint and per-replica periodicity by
//    construction; freezing decorrelates the replicas.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sremc/lattice.hpp"
#include "sremc/rng.hpp"
#include "sremc/sse.hpp"

namespace sremc {

inline constexpr int kReplicas = 4;

struct QConfiguration {
  std::array<SseReplica, kReplicas> replicas;
  ReducedPauliString pauli;
};

inline QConfiguration init_q(const Lattice& lat, int lambda0 = 16) {
  QConfiguration qc;
  for (auto& r : qc.replicas) r = init_replica(lat, lambda0);
  qc.pauli.offdiag.assign(static_cast<std::size_t>(lat.sites), 0);
  return qc;
}

inline std::pair<long, long> q_measure(const QConfiguration& qc) {
  long n = 0, nj = 0;
  for (const auto& r : qc.replicas) {
    n += r.n;
    nj += r.n_bond;
  }
  return {n, nj};
}

// Local update of one replica; never reads the other replicas.
inline void q_diagonal_update_replica(QConfiguration& qc, int k, const Lattice& lat,
                                      const ModelParams& p, double beta_sim, Rng& rng,
                                      std::vector<std::uint8_t>& state) {
  diagonal_update(qc.replicas[static_cast<std::size_t>(k)], lat, p, beta_sim, rng, state,
                  &qc.pauli);
}

inline void q_diagonal_update(QConfiguration& qc, const Lattice& lat, const ModelParams& p,
                              double beta_sim, Rng& rng, std::vector<std::uint8_t>& state) {
  for (int k = 0; k < kReplicas; ++k) q_diagonal_update_replica(qc, k, lat, p, beta_sim, rng, state);
}

enum class QUpdateScheme {
  Freezing50,     // freeze each slice operator with probability 1/2 per sweep
  CrossReplica,   // no freezing; every slice operator active
};

struct QClusterScratch {
  detail::DisjointSets dsu;
  std::vector<int> op_slot;          // global op -> slot position
  std::vector<int> op_replica;       // global op -> replica
  std::vector<int> op_leg;           // global op -> first leg id
  std::vector<int> last_leg;
  std::vector<std::uint8_t> flip_decided;
  std::vector<std::uint8_t> flip_value;
  std::vector<std::uint8_t> site_active;   // dressing: 1 = active slice op
  std::vector<std::uint8_t> side;          // active sites: side per replica
  std::vector<std::uint8_t> pairing;       // frozen sites: replica pairing
};

// Nonlocal update on the reduced Pauli string, the operator strings and the
// boundary spins.
inline void q_cluster_update(QConfiguration& qc, const Lattice& lat, Rng& rng,
                             QClusterScratch& s, QUpdateScheme scheme) {
  const int N = lat.sites;
  // slice-operator legs: per replica k and site j, the alpha_1 side ("right",
  // towards the operator string) and the alpha_0 side ("left", across the
  // trace boundary)
  auto sigma_right = [N](int k, int j) { return 2 * (k * N + j); };
  auto sigma_left = [N](int k, int j) { return 2 * (k * N + j) + 1; };
  const int op_leg_offset = 2 * kReplicas * N;

  // dressing first: all random choices are independent of the configuration
  s.site_active.assign(static_cast<std::size_t>(N), 1);
  if (scheme == QUpdateScheme::Freezing50)
    for (int j = 0; j < N; ++j) s.site_active[static_cast<std::size_t>(j)] = rng.coin() ? 0 : 1;
  s.side.assign(static_cast<std::size_t>(kReplicas * N), 0);
  s.pairing.assign(static_cast<std::size_t>(N), 0);
  for (int j = 0; j < N; ++j) {
    if (s.site_active[static_cast<std::size_t>(j)]) {
      // sides with an even number of boundary crossings (side 1 = alpha_0)
      std::uint8_t x = 0;
      for (int k = 0; k < kReplicas - 1; ++k) {
        const std::uint8_t b = rng.coin() ? 1 : 0;
        s.side[static_cast<std::size_t>(k * N + j)] = b;
        x ^= b;
      }
      s.side[static_cast<std::size_t>((kReplicas - 1) * N + j)] = x;
    } else {
      s.pairing[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(rng.uniform_below(3));
    }
  }

  // enumerate operators of all replicas
  s.op_slot.clear();
  s.op_replica.clear();
  s.op_leg.clear();
  int n_legs = op_leg_offset;
  for (int k = 0; k < kReplicas; ++k) {
    const auto& r = qc.replicas[static_cast<std::size_t>(k)];
    for (int q = 0; q < r.truncation(); ++q) {
      const OperatorSlot op = r.slots[static_cast<std::size_t>(q)];
      if (op.is_null()) continue;
      s.op_slot.push_back(q);
      s.op_replica.push_back(k);
      s.op_leg.push_back(n_legs);
      n_legs += op.kind() == SlotKind::DiagonalBond ? 4 : 2;
    }
  }
  const int n_ops = static_cast<int>(s.op_slot.size());
  s.dsu.reset(static_cast<std::size_t>(n_legs));

  // thread worldlines; the slice legs seed and close every site circle
  s.last_leg.assign(static_cast<std::size_t>(kReplicas * N), 0);
  for (int k = 0; k < kReplicas; ++k)
    for (int j = 0; j < N; ++j)
      s.last_leg[static_cast<std::size_t>(k * N + j)] = sigma_right(k, j);

  for (int o = 0; o < n_ops; ++o) {
    const int k = s.op_replica[static_cast<std::size_t>(o)];
    const OperatorSlot op =
        qc.replicas[static_cast<std::size_t>(k)].slots[static_cast<std::size_t>(s.op_slot[static_cast<std::size_t>(o)])];
    const int base = s.op_leg[static_cast<std::size_t>(o)];
    if (op.kind() == SlotKind::DiagonalBond) {
      s.dsu.unite(base, base + 1);
      s.dsu.unite(base, base + 2);
      s.dsu.unite(base, base + 3);
      const auto& b = lat.bonds[static_cast<std::size_t>(op.bond())];
      for (int side = 0; side < 2; ++side) {
        const int j = side == 0 ? b.first : b.second;
        auto& last = s.last_leg[static_cast<std::size_t>(k * N + j)];
        s.dsu.unite(last, base + side);
        last = base + 2 + side;
      }
    } else {
      const int j = op.site();
      auto& last = s.last_leg[static_cast<std::size_t>(k * N + j)];
      s.dsu.unite(last, base);
      last = base + 1;
    }
  }
  for (int k = 0; k < kReplicas; ++k)
    for (int j = 0; j < N; ++j)
      s.dsu.unite(s.last_leg[static_cast<std::size_t>(k * N + j)], sigma_left(k, j));

  // wire the slice vertices according to the dressing
  for (int j = 0; j < N; ++j) {
    if (s.site_active[static_cast<std::size_t>(j)]) {
      // one chosen leg per replica in one group, complements in the other
      auto chosen = [&](int k) {
        return s.side[static_cast<std::size_t>(k * N + j)] ? sigma_left(k, j) : sigma_right(k, j);
      };
      auto other = [&](int k) {
        return s.side[static_cast<std::size_t>(k * N + j)] ? sigma_right(k, j) : sigma_left(k, j);
      };
      for (int k = 1; k < kReplicas; ++k) {
        s.dsu.unite(chosen(0), chosen(k));
        s.dsu.unite(other(0), other(k));
      }
    } else {
      // frozen: worldlines pass through in paired replicas
      static constexpr int kPairs[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
      const int* pr = kPairs[s.pairing[static_cast<std::size_t>(j)]];
      for (int half = 0; half < 2; ++half) {
        const int a = pr[2 * half], b = pr[2 * half + 1];
        s.dsu.unite(sigma_left(a, j), sigma_right(a, j));
        s.dsu.unite(sigma_left(a, j), sigma_left(b, j));
        s.dsu.unite(sigma_left(a, j), sigma_right(b, j));
      }
    }
  }

  // flip coins are drawn lazily; only clusters touching slice legs or
  // site-operator legs can change the stored configuration
  s.flip_decided.assign(static_cast<std::size_t>(n_legs), 0);
  s.flip_value.assign(static_cast<std::size_t>(n_legs), 0);
  auto flip_of = [&](int leg) -> bool {
    const int root = s.dsu.find(leg);
    if (!s.flip_decided[static_cast<std::size_t>(root)]) {
      s.flip_decided[static_cast<std::size_t>(root)] = 1;
      s.flip_value[static_cast<std::size_t>(root)] = rng.coin() ? 1 : 0;
    }
    return s.flip_value[static_cast<std::size_t>(root)] != 0;
  };

  // apply: slice types, operator types, boundary spins
  for (int j = 0; j < N; ++j) {
    if (!s.site_active[static_cast<std::size_t>(j)]) continue;
    const int legA = s.side[static_cast<std::size_t>(j)] ? sigma_left(0, j) : sigma_right(0, j);
    const int legB = s.side[static_cast<std::size_t>(j)] ? sigma_right(0, j) : sigma_left(0, j);
    if (flip_of(legA) != flip_of(legB))
      qc.pauli.offdiag[static_cast<std::size_t>(j)] ^= 1;
  }
  for (int o = 0; o < n_ops; ++o) {
    const int k = s.op_replica[static_cast<std::size_t>(o)];
    auto& slot =
        qc.replicas[static_cast<std::size_t>(k)].slots[static_cast<std::size_t>(s.op_slot[static_cast<std::size_t>(o)])];
    if (slot.kind() == SlotKind::DiagonalBond) continue;
    const int base = s.op_leg[static_cast<std::size_t>(o)];
    if (flip_of(base) != flip_of(base + 1)) slot.toggle_site_kind();
  }
  for (int k = 0; k < kReplicas; ++k)
    for (int j = 0; j < N; ++j)
      if (flip_of(sigma_left(k, j)))
        qc.replicas[static_cast<std::size_t>(k)].spins0[static_cast<std::size_t>(j)] ^= 1;
}

// Parity constraint, per-replica periodicity through the slice, weight
// positivity and counter consistency.  Throws std::logic_error.
inline void validate_q(const QConfiguration& qc, const Lattice& lat) {
  for (int j = 0; j < lat.sites; ++j) {
    int down = 0;
    for (const auto& r : qc.replicas) down += r.spins0[static_cast<std::size_t>(j)];
    if (down % 2 != 0)
      throw std::logic_error("validate_q: odd down-spin parity at a site");
  }
  for (const auto& r : qc.replicas) validate_replica(r, lat, &qc.pauli);
}

// One Markov chain for Q.  beta_sim is the replica inverse temperature.
class QChain {
 public:
  QChain(const Lattice& lat, const ModelParams& p, double beta_sim, Rng rng,
         QUpdateScheme scheme = QUpdateScheme::Freezing50, int lambda0 = 16)
      : lat_(lat), params_(p), beta_sim_(beta_sim), rng_(rng), scheme_(scheme),
        qc_(init_q(lat, lambda0)) {
    params_.check();
  }

  void sweep() {
    q_diagonal_update(qc_, lat_, params_, beta_sim_, rng_, state_);
    q_cluster_update(qc_, lat_, rng_, scratch_, scheme_);
  }

  void thermalize(std::size_t sweeps, double safety_factor = 1.25) {
    for (std::size_t i = 0; i < sweeps; ++i) {
      sweep();
      for (auto& r : qc_.replicas) adjust_truncation(r, safety_factor);
    }
  }

  long n_tot() const { return q_measure(qc_).first; }
  long nj_tot() const { return q_measure(qc_).second; }

  void set_coupling(double J) { params_.coupling = J; }
  void set_beta_sim(double beta_sim) { beta_sim_ = beta_sim; }
  double beta_sim() const { return beta_sim_; }
  const ModelParams& params() const { return params_; }
  const Lattice& lattice() const { return lat_; }
  QConfiguration& configuration() { return qc_; }
  const QConfiguration& configuration() const { return qc_; }
  QUpdateScheme scheme() const { return scheme_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  void set_rng(const Rng& r) { rng_ = r; }

  void validate() const { validate_q(qc_, lat_); }

 private:
  Lattice lat_;
  ModelParams params_;
  double beta_sim_;
  Rng rng_;
  QUpdateScheme scheme_;
  QConfiguration qc_;
  std::vector<std::uint8_t> state_;
  QClusterScratch scratch_;
};

}  // namespace sremc
