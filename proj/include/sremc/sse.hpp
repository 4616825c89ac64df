#pragma once

// Stochastic series expansion of Tr e^{-beta H} for the transverse-field
// Ising model.  A configuration is a boundary spin state |alpha_0> plus a
// fixed-length operator string; its weight is
//
//     beta^n (Lambda-n)!/Lambda! * prod_q <alpha_{q+1}| H_{mu_q,nu_q} |alpha_q>
//
// with periodicity |alpha_{Lambda+1}> = |alpha_0>.  Site operators carry
// weight h, bond operators 2J on parallel spins.  Two moves alternate per
// sweep:
//
//  - diagonal update: slot-by-slot Metropolis insertion/removal of diagonal
//    operators at acceptance beta*W/(Lambda-n) and (Lambda-n+1)/(beta*W),
//    where W = N h + 2 J N_b is the total pool weight;
//  - branching cluster update: clusters grow along worldlines, absorb bond
//    operators whole, and terminate at site operators.  Flipping a cluster
//    with probability 1/2 exchanges diagonal and off-diagonal site operators
//    on its boundary and flips boundary spins of clusters that wrap the
//    imaginary-time circle.  All moves preserve the weight exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sremc/lattice.hpp"
#include "sremc/rng.hpp"
#include "sremc/stats.hpp"

namespace sremc {

struct ReducedPauliString {
  // 1 = off-diagonal slice operator (flips the site), 0 = diagonal.
  std::vector<std::uint8_t> offdiag;

  int sites() const { return static_cast<int>(offdiag.size()); }
};

struct SseReplica {
  std::vector<std::uint8_t> spins0;   // alpha_0, 0 = up / 1 = down
  std::vector<OperatorSlot> slots;    // fixed length Lambda
  int n = 0;                          // non-null slots
  int n_bond = 0;                     // diagonal bond slots

  int truncation() const { return static_cast<int>(slots.size()); }
};

inline SseReplica init_replica(const Lattice& lat, int lambda0 = 16) {
  SseReplica r;
  r.spins0.assign(static_cast<std::size_t>(lat.sites), 0);
  r.slots.assign(static_cast<std::size_t>(std::max(1, lambda0)), OperatorSlot::null());
  return r;
}

// Grows the truncation so Lambda >= safety_factor * n, padding nulls at the
// end.  Never shrinks.  Call during thermalization only; after that Lambda
// stays frozen so the n-dependent ratio estimators are well defined.
inline void adjust_truncation(SseReplica& r, double safety_factor = 1.25) {
  const double needed = safety_factor * static_cast<double>(r.n);
  if (needed > static_cast<double>(r.truncation())) {
    const auto target = static_cast<std::size_t>(std::ceil(needed));
    r.slots.resize(std::max(target, r.slots.size() + 1), OperatorSlot::null());
  }
}

// Slot-by-slot diagonal update at simulation inverse temperature beta_sim.
// The propagated state starts from alpha_0, transformed by the reduced Pauli
// slice when one is attached (four-replica sampling).  Off-diagonal
// operators, alpha_0 and the Pauli slice itself stay untouched.
inline void diagonal_update(SseReplica& r, const Lattice& lat, const ModelParams& p,
                            double beta_sim, Rng& rng, std::vector<std::uint8_t>& state,
                            const ReducedPauliString* pauli = nullptr) {
  state = r.spins0;
  if (pauli)
    for (int j = 0; j < lat.sites; ++j) state[static_cast<std::size_t>(j)] ^= pauli->offdiag[static_cast<std::size_t>(j)];

  const double pool = diagonal_pool_weight(lat, p);
  const double site_pool = lat.sites * p.field;
  const int lambda = r.truncation();

  for (auto& slot : r.slots) {
    switch (slot.kind()) {
      case SlotKind::Null: {
        // insertion: accept with min(1, beta*W/(Lambda-n)), candidate drawn
        // proportionally to its pool weight
        if (beta_sim <= 0.0) break;
        if (rng.uniform() * static_cast<double>(lambda - r.n) < beta_sim * pool) {
          const double v = rng.uniform() * pool;
          if (v < site_pool) {
            int j = std::min(static_cast<int>(v / p.field), lat.sites - 1);
            slot = OperatorSlot::diagonal_site(j);
            ++r.n;
          } else {
            int b = std::min(static_cast<int>((v - site_pool) / (2.0 * p.coupling)),
                             lat.n_bonds() - 1);
            const auto& bond = lat.bonds[static_cast<std::size_t>(b)];
            if (state[static_cast<std::size_t>(bond.first)] ==
                state[static_cast<std::size_t>(bond.second)]) {
              slot = OperatorSlot::diagonal_bond(b);
              ++r.n;
              ++r.n_bond;
            }
          }
        }
        break;
      }
      case SlotKind::DiagonalSite: {
        if (beta_sim <= 0.0 ||
            rng.uniform() * beta_sim * pool < static_cast<double>(lambda - r.n + 1)) {
          slot = OperatorSlot::null();
          --r.n;
        }
        break;
      }
      case SlotKind::DiagonalBond: {
        if (beta_sim <= 0.0 ||
            rng.uniform() * beta_sim * pool < static_cast<double>(lambda - r.n + 1)) {
          slot = OperatorSlot::null();
          --r.n;
          --r.n_bond;
        }
        break;
      }
      case SlotKind::OffDiagonalSite:
        state[static_cast<std::size_t>(slot.site())] ^= 1;
        break;
    }
  }
}

namespace detail {

class DisjointSets {
 public:
  void reset(std::size_t n) {
    parent_.resize(n);
    std::iota(parent_.begin(), parent_.end(), 0);
    size_.assign(n, 1);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] =
          parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[static_cast<std::size_t>(a)] < size_[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
  }

 private:
  std::vector<std::int32_t> parent_;
  std::vector<std::int32_t> size_;
};

}  // namespace detail

// Scratch buffers reused across sweeps.
struct ClusterScratch {
  detail::DisjointSets dsu;
  std::vector<int> op_slot;      // dense op index -> slot position
  std::vector<int> op_leg;       // dense op index -> first leg id
  std::vector<int> first_leg;    // per site
  std::vector<int> last_leg;     // per site
  std::vector<std::uint8_t> flip_decided;
  std::vector<std::uint8_t> flip_value;
};

// Branching cluster update for a single replica.  Site operators carry two
// legs (in, out) and terminate clusters; bond operators carry four legs all
// in one cluster.  The segment that wraps the imaginary-time boundary at a
// site carries alpha_0 of that site.  Flip coins are drawn lazily: only
// clusters that touch a site-operator leg or a wrapped boundary segment can
// change the stored configuration, the rest map it to itself.
inline void cluster_update(SseReplica& r, const Lattice& lat, Rng& rng, ClusterScratch& s) {
  const int N = lat.sites;
  s.op_slot.clear();
  s.op_leg.clear();
  int n_legs = 0;
  for (int q = 0; q < r.truncation(); ++q) {
    const OperatorSlot op = r.slots[static_cast<std::size_t>(q)];
    if (op.is_null()) continue;
    s.op_slot.push_back(q);
    s.op_leg.push_back(n_legs);
    n_legs += op.kind() == SlotKind::DiagonalBond ? 4 : 2;
  }
  const int n_ops = static_cast<int>(s.op_slot.size());

  s.dsu.reset(static_cast<std::size_t>(n_legs));
  s.first_leg.assign(static_cast<std::size_t>(N), -1);
  s.last_leg.assign(static_cast<std::size_t>(N), -1);

  for (int o = 0; o < n_ops; ++o) {
    const OperatorSlot op = r.slots[static_cast<std::size_t>(s.op_slot[static_cast<std::size_t>(o)])];
    const int base = s.op_leg[static_cast<std::size_t>(o)];
    if (op.kind() == SlotKind::DiagonalBond) {
      // legs: j_in, k_in, j_out, k_out, all in one cluster
      s.dsu.unite(base, base + 1);
      s.dsu.unite(base, base + 2);
      s.dsu.unite(base, base + 3);
      const auto& b = lat.bonds[static_cast<std::size_t>(op.bond())];
      for (int side = 0; side < 2; ++side) {
        const int j = side == 0 ? b.first : b.second;
        auto& last = s.last_leg[static_cast<std::size_t>(j)];
        if (last >= 0)
          s.dsu.unite(last, base + side);
        else
          s.first_leg[static_cast<std::size_t>(j)] = base + side;
        last = base + 2 + side;
      }
    } else {  // site operator: legs in, out; growth terminates here
      const int j = op.site();
      auto& last = s.last_leg[static_cast<std::size_t>(j)];
      if (last >= 0)
        s.dsu.unite(last, base);
      else
        s.first_leg[static_cast<std::size_t>(j)] = base;
      last = base + 1;
    }
  }

  // wrap the worldlines through the trace boundary
  for (int j = 0; j < N; ++j)
    if (s.first_leg[static_cast<std::size_t>(j)] >= 0)
      s.dsu.unite(s.last_leg[static_cast<std::size_t>(j)], s.first_leg[static_cast<std::size_t>(j)]);

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

  // site operators toggle when exactly one of their sides flips
  for (int o = 0; o < n_ops; ++o) {
    auto& slot = r.slots[static_cast<std::size_t>(s.op_slot[static_cast<std::size_t>(o)])];
    if (slot.kind() == SlotKind::DiagonalBond) continue;
    const int base = s.op_leg[static_cast<std::size_t>(o)];
    if (flip_of(base) != flip_of(base + 1)) slot.toggle_site_kind();
  }

  // spins: wrapped-segment flips for occupied sites, free resampling otherwise
  for (int j = 0; j < N; ++j) {
    if (s.first_leg[static_cast<std::size_t>(j)] >= 0) {
      if (flip_of(s.first_leg[static_cast<std::size_t>(j)])) r.spins0[static_cast<std::size_t>(j)] ^= 1;
    } else {
      if (rng.coin()) r.spins0[static_cast<std::size_t>(j)] ^= 1;
    }
  }
}

// Full propagation check: imaginary-time periodicity, bond operators on
// parallel spins, counters consistent.  Throws std::logic_error on any
// violation.  Used by tests and the long assertion runs.
inline void validate_replica(const SseReplica& r, const Lattice& lat,
                             const ReducedPauliString* pauli = nullptr) {
  std::vector<std::uint8_t> state = r.spins0;
  if (pauli)
    for (int j = 0; j < lat.sites; ++j) state[static_cast<std::size_t>(j)] ^= pauli->offdiag[static_cast<std::size_t>(j)];
  int n = 0, n_bond = 0;
  for (const auto& slot : r.slots) {
    switch (slot.kind()) {
      case SlotKind::Null:
        break;
      case SlotKind::DiagonalSite:
        ++n;
        break;
      case SlotKind::OffDiagonalSite:
        ++n;
        state[static_cast<std::size_t>(slot.site())] ^= 1;
        break;
      case SlotKind::DiagonalBond: {
        ++n;
        ++n_bond;
        const auto& b = lat.bonds[static_cast<std::size_t>(slot.bond())];
        if (state[static_cast<std::size_t>(b.first)] != state[static_cast<std::size_t>(b.second)])
          throw std::logic_error("validate_replica: bond operator on antiparallel spins");
        break;
      }
    }
  }
  if (state != r.spins0)
    throw std::logic_error("validate_replica: propagation does not close periodically");
  if (n != r.n || n_bond != r.n_bond)
    throw std::logic_error("validate_replica: operator counters out of sync");
}

// One Markov chain for a standard partition function Tr e^{-beta_sim H}.
// Z uses beta_sim = beta, the doubled-temperature factor Z_2 uses 2 beta.
class ZChain {
 public:
  ZChain(const Lattice& lat, const ModelParams& p, double beta_sim, Rng rng, int lambda0 = 16)
      : lat_(lat), params_(p), beta_sim_(beta_sim), rng_(rng), replica_(init_replica(lat, lambda0)) {
    params_.check();
  }

  void sweep() {
    diagonal_update(replica_, lat_, params_, beta_sim_, rng_, state_);
    cluster_update(replica_, lat_, rng_, scratch_);
  }

  void thermalize(std::size_t sweeps, double safety_factor = 1.25) {
    for (std::size_t i = 0; i < sweeps; ++i) {
      sweep();
      adjust_truncation(replica_, safety_factor);
    }
  }

  int n_tot() const { return replica_.n; }
  int nj_tot() const { return replica_.n_bond; }

  void set_coupling(double J) { params_.coupling = J; }
  void set_beta_sim(double beta_sim) { beta_sim_ = beta_sim; }
  double beta_sim() const { return beta_sim_; }
  const ModelParams& params() const { return params_; }
  const Lattice& lattice() const { return lat_; }
  SseReplica& replica() { return replica_; }
  const SseReplica& replica() const { return replica_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  void set_rng(const Rng& r) { rng_ = r; }

  void validate() const { validate_replica(replica_, lat_); }

 private:
  Lattice lat_;
  ModelParams params_;
  double beta_sim_;
  Rng rng_;
  SseReplica replica_;
  std::vector<std::uint8_t> state_;
  ClusterScratch scratch_;
};

// Runs measurement sweeps grouped into bins of bin_length sweeps each.
// Chain must expose sweep(), n_tot(), nj_tot().
template <class Chain>
ChainStats run_bins(Chain& chain, std::size_t n_sweeps, std::size_t bin_length,
                    const ObservableSpec& obs = {}) {
  if (bin_length == 0) throw std::invalid_argument("run_bins: bin_length must be positive");
  const std::size_t bins = n_sweeps / bin_length;
  if (bins < 2) throw std::invalid_argument("run_bins: need at least 2 full bins");

  ChainStats st;
  st.bin_length = bin_length;
  st.n_tot.reserve(bins);
  st.nj_tot.reserve(bins);
  st.n_pair.reserve(bins);
  st.nj_pair.reserve(bins);
  if (obs.record_ratio) st.ratio.reserve(bins);

  for (std::size_t b = 0; b < bins; ++b) {
    double a_n = 0.0, a_nj = 0.0, a_np = 0.0, a_njp = 0.0, a_r = 0.0;
    for (std::size_t i = 0; i < bin_length; ++i) {
      chain.sweep();
      const double n = chain.n_tot();
      const double nj = chain.nj_tot();
      a_n += n;
      a_nj += nj;
      a_np += n * (n - 1.0);
      a_njp += nj * (nj - 1.0);
      if (obs.record_ratio) {
        const double expn = obs.ratio_uses_bond_count ? nj : n;
        a_r += std::pow(obs.ratio_base, expn);
      }
    }
    const double inv = 1.0 / static_cast<double>(bin_length);
    st.n_tot.push_back(a_n * inv);
    st.nj_tot.push_back(a_nj * inv);
    st.n_pair.push_back(a_np * inv);
    st.nj_pair.push_back(a_njp * inv);
    if (obs.record_ratio) st.ratio.push_back(a_r * inv);
  }
  st.check_finite();
  return st;
}

// Per-sweep time series of one observable, for autocorrelation analysis.
template <class Chain>
std::vector<double> run_series(Chain& chain, std::size_t n_sweeps, bool bond_count = true) {
  std::vector<double> out;
  out.reserve(n_sweeps);
  for (std::size_t i = 0; i < n_sweeps; ++i) {
    chain.sweep();
    out.push_back(bond_count ? chain.nj_tot() : chain.n_tot());
  }
  return out;
}

}  // namespace sremc
