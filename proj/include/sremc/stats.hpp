#pragma once

// Binned Monte Carlo statistics and jackknife error estimation.  Ratio-type
// observables are exponential in the operator count and heavy-tailed, so all
// derived quantities (log ratios, fluctuation terms) are jackknifed over
// bins rather than error-propagated naively.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sremc {

// Per-bin averages accumulated by a chain run.  Columns are parallel: entry
// b of each populated column is the average over sweeps of bin b.
struct ChainStats {
  std::size_t bin_length = 0;       // Monte Carlo sweeps per bin
  std::vector<double> n_tot;        // <n>            (all non-null operators)
  std::vector<double> nj_tot;       // <n_J>          (bond operators)
  std::vector<double> n_pair;       // <n (n-1)>
  std::vector<double> nj_pair;      // <n_J (n_J-1)>
  std::vector<double> ratio;        // <(lambda_prev / lambda_k)^exponent>

  std::size_t n_bins() const { return n_tot.size(); }
  std::size_t n_samples() const { return n_bins() * bin_length; }

  void check_finite() const {
    auto scan = [](const std::vector<double>& v, const char* name) {
      for (double x : v)
        if (!std::isfinite(x))
          throw std::runtime_error(std::string("ChainStats: non-finite bin value in ") + name);
    };
    scan(n_tot, "n_tot");
    scan(nj_tot, "nj_tot");
    scan(n_pair, "n_pair");
    scan(nj_pair, "nj_pair");
    scan(ratio, "ratio");
  }
};

// What a chain records while sweeping.  Counts are always cheap; the ratio
// factor is enabled per schedule step.
struct ObservableSpec {
  bool record_ratio = false;
  double ratio_base = 1.0;              // lambda_{k-1} / lambda_k
  bool ratio_uses_bond_count = false;   // exponent n_J instead of n
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Jackknife over equal-length bins for an arbitrary smooth function of
// pooled column means.  Returns the bias-corrected estimate and the
// jackknife standard error.  Requires >= 2 bins.
inline Estimate jackknife(const std::vector<std::vector<double>>& columns,
                          const std::function<double(const std::vector<double>&)>& f) {
  if (columns.empty()) throw std::invalid_argument("jackknife: no columns");
  const std::size_t B = columns.front().size();
  for (const auto& c : columns)
    if (c.size() != B) throw std::invalid_argument("jackknife: ragged columns");
  if (B < 2) throw std::runtime_error("jackknife: need at least 2 bins for an error estimate");

  const std::size_t K = columns.size();
  std::vector<double> sums(K, 0.0), full(K), loo(K);
  for (std::size_t c = 0; c < K; ++c) {
    for (double x : columns[c]) sums[c] += x;
    full[c] = sums[c] / static_cast<double>(B);
  }
  const double theta_full = f(full);

  std::vector<double> theta(B);
  double theta_bar = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < K; ++c)
      loo[c] = (sums[c] - columns[c][b]) / static_cast<double>(B - 1);
    theta[b] = f(loo);
    theta_bar += theta[b];
  }
  theta_bar /= static_cast<double>(B);

  double var = 0.0;
  for (double t : theta) var += (t - theta_bar) * (t - theta_bar);
  var *= static_cast<double>(B - 1) / static_cast<double>(B);

  Estimate e;
  e.value = static_cast<double>(B) * theta_full - static_cast<double>(B - 1) * theta_bar;
  e.std_error = std::sqrt(var);
  if (!std::isfinite(e.value) || !std::isfinite(e.std_error))
    throw std::runtime_error("jackknife: non-finite estimate");
  return e;
}

inline Estimate jackknife_mean(const std::vector<double>& bins) {
  return jackknife({bins}, [](const std::vector<double>& m) { return m[0]; });
}

// log of a binned mean; throws if any leave-one-out mean is nonpositive
// (indistinguishable from a broken chain).
inline Estimate jackknife_log_mean(const std::vector<double>& bins) {
  return jackknife({bins}, [](const std::vector<double>& m) {
    if (m[0] <= 0.0) throw std::runtime_error("jackknife_log_mean: nonpositive mean");
    return std::log(m[0]);
  });
}

// Fluctuation term C = <n(n-1)> - <n>^2 from per-bin means of n and n(n-1).
inline Estimate jackknife_fluctuation(const std::vector<double>& n_bins,
                                      const std::vector<double>& pair_bins) {
  return jackknife({n_bins, pair_bins},
                   [](const std::vector<double>& m) { return m[1] - m[0] * m[0]; });
}

}  // namespace sremc
