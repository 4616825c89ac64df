#pragma once

// Reweight-annealing ratio estimators and thermodynamic-integration
// derivatives.  A chain simulated at lambda_k estimates the ratio to the
// previous grid point through
//
//     X(lambda_{k-1}) / X(lambda_k) = < (lambda_{k-1}/lambda_k)^n >_{lambda_k}
//
// with exponent n = n_tot for beta and n = n_J,tot for the coupling; the
// same form covers Q (counts over four replicas), Z, and Z_2 (single replica
// at doubled beta).  Equilibrium operator counts give the derivatives:
//
//     d M2t/dlambda   =  E_Q - 2 E_Z - E_Z2,          E_X = -<n>_X / lambda,
//     d^2 M2t/dlambda^2 = -(C_Q - 2 C_Z - C_Z2)/lambda^2,
//     C_X = <n(n-1)>_X - <n>_X^2.
//
// Q, Z and Z_2 run as independent chains, so their errors combine in
// quadrature with the (1, -2, -1) coefficients.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "sremc/lattice.hpp"
#include "sremc/stats.hpp"

namespace sremc {

enum class PartitionKind { Q, Z, Z2 };

struct RatioEstimate {
  double value = 1.0;        // estimate of X(lambda_prev)/X(lambda_k), > 0
  double std_error = 0.0;
  double log_value = 0.0;    // jackknifed log of the ratio
  double log_std_error = 0.0;
  std::size_t n_samples = 0;
  PartitionKind kind = PartitionKind::Z;
  SweepDirection direction = SweepDirection::Beta;

  double relative_error() const { return std_error / value; }
};

namespace detail {

inline RatioEstimate ratio_from_stats(const ChainStats& stats, double lambda_prev,
                                      double lambda_k, PartitionKind kind,
                                      SweepDirection direction) {
  RatioEstimate r;
  r.kind = kind;
  r.direction = direction;
  r.n_samples = stats.n_samples();
  if (lambda_prev == lambda_k) return r;  // identity ratio, exactly 1

  if (stats.ratio.size() < 2)
    throw std::runtime_error("ratio estimate: need >= 2 bins of ratio factors");
  const Estimate lin = jackknife_mean(stats.ratio);
  if (!(lin.value > 0.0))
    throw std::runtime_error("ratio estimate: nonpositive mean ratio; no overlap or broken chain");
  const Estimate lg = jackknife_log_mean(stats.ratio);
  r.value = lin.value;
  r.std_error = lin.std_error;
  r.log_value = lg.value;
  r.log_std_error = lg.std_error;
  return r;
}

}  // namespace detail

// Ratio between adjacent inverse temperatures, sampled at beta_k.
inline RatioEstimate ratio_beta(const ChainStats& stats, double beta_prev, double beta_k,
                                PartitionKind kind = PartitionKind::Z) {
  if (!(beta_prev <= beta_k) || beta_prev < 0.0)
    throw std::invalid_argument("ratio_beta: need 0 <= beta_prev <= beta_k");
  return detail::ratio_from_stats(stats, beta_prev, beta_k, kind, SweepDirection::Beta);
}

// Ratio between adjacent couplings, sampled at J_k.  J_k = 0 is rejected;
// a zero coupling can only serve as the reference endpoint, where the
// factor degenerates to the indicator of a bond-operator-free configuration.
inline RatioEstimate ratio_coupling(const ChainStats& stats, double j_prev, double j_k,
                                    PartitionKind kind = PartitionKind::Z) {
  if (j_k <= 0.0)
    throw std::invalid_argument("ratio_coupling: J_k must be positive (use J=0 only as reference)");
  if (j_prev < 0.0 || j_prev > j_k)
    throw std::invalid_argument("ratio_coupling: need 0 <= J_prev <= J_k");
  return detail::ratio_from_stats(stats, j_prev, j_k, kind, SweepDirection::Coupling);
}

struct DerivativeEstimate {
  int order = 1;
  double lambda = 0.0;
  SweepDirection direction = SweepDirection::Beta;
  double value = 0.0;
  double std_error = 0.0;
  // order 1: effective energies (E_Q, E_Z, E_Z2); order 2: fluctuation terms
  // (C_Q, C_Z, C_Z2).  The value is exactly recomputable from the parts.
  std::array<double, 3> parts{};
  std::array<double, 3> part_errors{};

  double recompute() const {
    const double comb = parts[0] - 2.0 * parts[1] - parts[2];
    return order == 1 ? comb : -comb / (lambda * lambda);
  }
};

namespace detail {
inline void require_finite(const Estimate& e, const char* what) {
  if (!std::isfinite(e.value) || !std::isfinite(e.std_error))
    throw std::invalid_argument(std::string("derivative estimate: non-finite input: ") + what);
}
}  // namespace detail

// First derivative from equilibrium operator-count means of the three
// chains (n_tot for beta, n_J,tot for the coupling).
inline DerivativeEstimate first_derivative(const Estimate& count_q, const Estimate& count_z,
                                           const Estimate& count_z2, double lambda,
                                           SweepDirection direction) {
  if (!(lambda > 0.0)) throw std::invalid_argument("first_derivative: lambda must be > 0");
  detail::require_finite(count_q, "Q");
  detail::require_finite(count_z, "Z");
  detail::require_finite(count_z2, "Z2");
  DerivativeEstimate d;
  d.order = 1;
  d.lambda = lambda;
  d.direction = direction;
  d.parts = {-count_q.value / lambda, -count_z.value / lambda, -count_z2.value / lambda};
  d.part_errors = {count_q.std_error / lambda, count_z.std_error / lambda,
                   count_z2.std_error / lambda};
  d.value = d.recompute();
  d.std_error = std::sqrt(d.part_errors[0] * d.part_errors[0] +
                          4.0 * d.part_errors[1] * d.part_errors[1] +
                          d.part_errors[2] * d.part_errors[2]);
  return d;
}

// Second derivative from the fluctuation terms C = <n(n-1)> - <n>^2.
inline DerivativeEstimate second_derivative(const Estimate& c_q, const Estimate& c_z,
                                            const Estimate& c_z2, double lambda,
                                            SweepDirection direction) {
  if (!(lambda > 0.0)) throw std::invalid_argument("second_derivative: lambda must be > 0");
  detail::require_finite(c_q, "Q");
  detail::require_finite(c_z, "Z");
  detail::require_finite(c_z2, "Z2");
  DerivativeEstimate d;
  d.order = 2;
  d.lambda = lambda;
  d.direction = direction;
  d.parts = {c_q.value, c_z.value, c_z2.value};
  d.part_errors = {c_q.std_error, c_z.std_error, c_z2.std_error};
  d.value = d.recompute();
  const double il2 = 1.0 / (lambda * lambda);
  d.std_error = il2 * std::sqrt(d.part_errors[0] * d.part_errors[0] +
                                4.0 * d.part_errors[1] * d.part_errors[1] +
                                d.part_errors[2] * d.part_errors[2]);
  return d;
}

// Helpers pulling the inputs out of binned chain statistics.
inline Estimate count_estimate(const ChainStats& st, SweepDirection dir) {
  return jackknife_mean(dir == SweepDirection::Coupling ? st.nj_tot : st.n_tot);
}
inline Estimate fluctuation_estimate(const ChainStats& st, SweepDirection dir) {
  return dir == SweepDirection::Coupling ? jackknife_fluctuation(st.nj_tot, st.nj_pair)
                                         : jackknife_fluctuation(st.n_tot, st.n_pair);
}

}  // namespace sremc
