#pragma once

// Lattice geometry and the operator decomposition of the transverse-field
// Ising Hamiltonian
//
//     H = -J sum_<jk> Z_j Z_k  -  h sum_j X_j ,   J >= 0, h > 0,
//
// on a 1D ring or a 2D periodic square lattice.  For series-expansion
// sampling the Hamiltonian is split into elementary operators
//
//     H_site_off(j)  = h (X_j)                    off-diagonal, weight h
//     H_site_diag(j) = h (I_j)                    diagonal,     weight h
//     H_bond(j,k)    = J (Z_j Z_k + I_j I_k)      diagonal,     weight 2J on
//                                                 parallel spins, 0 otherwise
//
// so that all matrix elements are nonnegative.  The bond operator carries a
// constant shift of J per bond; it cancels in every ratio and derivative
// assembled downstream.

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sremc {

struct Lattice {
  int dimension = 1;                        // 1 or 2
  int linear_size = 0;                      // L
  int sites = 0;                            // N = L^dimension
  std::vector<std::pair<int, int>> bonds;   // periodic nearest neighbours

  int n_bonds() const { return static_cast<int>(bonds.size()); }
};

// Row-major site order in 2D; bonds enumerated site by site, right bond
// first, then up bond.  1D: bond i connects (i, (i+1) mod L).
inline Lattice build_lattice(int dimension, int L) {
  if (dimension != 1 && dimension != 2)
    throw std::invalid_argument("build_lattice: dimension must be 1 or 2");
  if (L < 2) throw std::invalid_argument("build_lattice: L must be >= 2");

  Lattice lat;
  lat.dimension = dimension;
  lat.linear_size = L;
  if (dimension == 1) {
    lat.sites = L;
    lat.bonds.reserve(L);
    for (int i = 0; i < L; ++i) lat.bonds.emplace_back(i, (i + 1) % L);
  } else {
    lat.sites = L * L;
    lat.bonds.reserve(2 * lat.sites);
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < L; ++x) {
        const int s = y * L + x;
        lat.bonds.emplace_back(s, y * L + (x + 1) % L);      // right
        lat.bonds.emplace_back(s, ((y + 1) % L) * L + x);    // up
      }
  }
  return lat;
}

// Annealing parameter families: inverse temperature or Ising coupling.
enum class SweepDirection { Beta, Coupling };

struct ModelParams {
  double coupling = 1.0;   // J >= 0
  double field = 1.0;      // h > 0
  double beta = 1.0;       // inverse temperature >= 0

  void check() const {
    if (coupling < 0.0) throw std::invalid_argument("ModelParams: J must be >= 0");
    if (field <= 0.0) throw std::invalid_argument("ModelParams: h must be > 0");
    if (beta < 0.0) throw std::invalid_argument("ModelParams: beta must be >= 0");
  }
};

enum class SlotKind : std::uint8_t {
  Null = 0,
  DiagonalSite = 1,
  OffDiagonalSite = 2,
  DiagonalBond = 3,
};

// One slot of the fixed-length operator string.  Packed as kind | index so a
// replica's string is a flat array of 4-byte values.
class OperatorSlot {
 public:
  constexpr OperatorSlot() : code_(-1) {}

  static constexpr OperatorSlot null() { return OperatorSlot(); }
  static OperatorSlot diagonal_site(int site) { return OperatorSlot(pack(SlotKind::DiagonalSite, site)); }
  static OperatorSlot off_diagonal_site(int site) { return OperatorSlot(pack(SlotKind::OffDiagonalSite, site)); }
  static OperatorSlot diagonal_bond(int bond) { return OperatorSlot(pack(SlotKind::DiagonalBond, bond)); }

  SlotKind kind() const {
    return code_ < 0 ? SlotKind::Null : static_cast<SlotKind>(code_ >> 28);
  }
  bool is_null() const { return code_ < 0; }
  // Valid for site kinds only.
  int site() const { return code_ & kIndexMask; }
  // Valid for DiagonalBond only.
  int bond() const { return code_ & kIndexMask; }

  // Flips between the two equal-weight site operators; bond/null unchanged.
  void toggle_site_kind() {
    const SlotKind k = kind();
    if (k == SlotKind::DiagonalSite)
      code_ = pack(SlotKind::OffDiagonalSite, site());
    else if (k == SlotKind::OffDiagonalSite)
      code_ = pack(SlotKind::DiagonalSite, site());
  }

  std::int32_t raw() const { return code_; }
  static OperatorSlot from_raw(std::int32_t raw) { return OperatorSlot(raw); }

  friend bool operator==(OperatorSlot a, OperatorSlot b) { return a.code_ == b.code_; }
  friend bool operator!=(OperatorSlot a, OperatorSlot b) { return a.code_ != b.code_; }

 private:
  static constexpr std::int32_t kIndexMask = (1 << 28) - 1;
  static constexpr std::int32_t pack(SlotKind k, int idx) {
    return (static_cast<std::int32_t>(k) << 28) | idx;
  }
  explicit constexpr OperatorSlot(std::int32_t code) : code_(code) {}
  std::int32_t code_;
};

// Matrix element of the slot's operator at the given propagated spin
// configuration (0 = up, 1 = down).  Null slots carry no weight factor and
// return the multiplicative identity.
inline double slot_weight(const Lattice& lat, const ModelParams& p, OperatorSlot slot,
                          const std::vector<std::uint8_t>& spins_at_step) {
  switch (slot.kind()) {
    case SlotKind::Null:
      return 1.0;
    case SlotKind::DiagonalSite:
    case SlotKind::OffDiagonalSite:
      return p.field;
    case SlotKind::DiagonalBond: {
      const auto& b = lat.bonds[static_cast<std::size_t>(slot.bond())];
      return spins_at_step[static_cast<std::size_t>(b.first)] ==
                     spins_at_step[static_cast<std::size_t>(b.second)]
                 ? 2.0 * p.coupling
                 : 0.0;
    }
  }
  return 0.0;
}

// Total weight of the diagonal-operator pool: N h + 2 J N_b.  Acceptance
// ratios of the diagonal update are expressed against this envelope.
inline double diagonal_pool_weight(const Lattice& lat, const ModelParams& p) {
  return lat.sites * p.field + 2.0 * p.coupling * lat.n_bonds();
}

}  // namespace sremc
