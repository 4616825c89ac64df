#pragma once

// Post-processing: autocorrelation diagnostics, volume-law fits with a
// constant correction, part decomposition of derivative estimates, and
// finite-difference cross-validation of value curves against
// thermodynamic-integration derivatives.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "sremc/estimators.hpp"

namespace sremc {

struct AutocorrReport {
  std::string observable;
  std::vector<double> autocorr;   // A(t), t = 0 .. truncation_lag
  double tau_int = 0.5;           // 1/2 + sum_{t>=1} A(t)
  std::size_t truncation_lag = 0; // first lag with A(t) below threshold
  double threshold = 0.01;
  std::size_t n_samples = 0;
};

// Integrated autocorrelation time of a Monte Carlo series.  The normalized
// autocovariance is summed until it first drops below threshold; a constant
// series has no defined normalization and is rejected, as is a series whose
// autocorrelation never decays within the measurable window.
inline AutocorrReport autocorr(const std::vector<double>& series, double threshold = 0.01,
                               const std::string& name = "n_J") {
  if (series.size() < 16) throw std::invalid_argument("autocorr: series too short");
  if (!(threshold > 0.0) || threshold >= 1.0)
    throw std::invalid_argument("autocorr: threshold must lie in (0,1)");
  const std::size_t n = series.size();
  double m = 0.0;
  for (double x : series) m += x;
  m /= static_cast<double>(n);
  double var = 0.0;
  for (double x : series) var += (x - m) * (x - m);
  var /= static_cast<double>(n);
  if (var <= 0.0)
    throw std::runtime_error("autocorr: zero variance (constant series), A(t) undefined");

  AutocorrReport rep;
  rep.observable = name;
  rep.threshold = threshold;
  rep.n_samples = n;
  rep.autocorr.push_back(1.0);
  // the truncation lag must sit well inside the series for the sum to be
  // trustworthy; a tenth of the window is the usual rule of thumb
  const std::size_t max_lag = n / 10;
  double tau = 0.5;
  bool truncated = false;
  for (std::size_t t = 1; t <= max_lag; ++t) {
    double c = 0.0;
    for (std::size_t u = 0; u + t < n; ++u) c += (series[u] - m) * (series[u + t] - m);
    c /= static_cast<double>(n - t) * var;
    rep.autocorr.push_back(c);
    if (c < threshold) {
      rep.truncation_lag = t;
      truncated = true;
      break;
    }
    tau += c;
  }
  if (!truncated)
    throw std::runtime_error(
        "autocorr: series too short, A(t) stayed above the truncation threshold within the "
        "measurable window");
  rep.tau_int = tau;
  return rep;
}

struct VolumeLawFit {
  double slope = 0.0;       // a_d, per-L^d coefficient
  double intercept = 0.0;   // b_d, the volume-law correction
  double cov_ss = 0.0, cov_si = 0.0, cov_ii = 0.0;
  std::vector<double> residuals;
  std::vector<int> sizes;
  double chi2 = 0.0;
};

struct VolumePoint {
  int linear_size = 0;
  double m2_tilde = 0.0;
  double std_error = 0.0;
};

// Weighted least squares of M2t = a_d L^d + b_d.  Zero errors fall back to
// uniform weights (ordinary least squares).
inline VolumeLawFit volume_fit(const std::vector<VolumePoint>& points, int dimension) {
  if (dimension != 1 && dimension != 2)
    throw std::invalid_argument("volume_fit: dimension must be 1 or 2");
  if (points.size() < 3) throw std::invalid_argument("volume_fit: need at least 3 sizes");
  bool uniform = false;
  for (const auto& pt : points) {
    if (pt.std_error < 0.0) throw std::invalid_argument("volume_fit: negative error");
    if (pt.std_error == 0.0) uniform = true;
  }
  int distinct = 1;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].linear_size != points[0].linear_size) {
      distinct = 2;
      break;
    }
  if (distinct < 2) throw std::invalid_argument("volume_fit: singular design, need 2 distinct L");

  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& pt : points) {
    const double x = std::pow(static_cast<double>(pt.linear_size), dimension);
    const double w = uniform ? 1.0 : 1.0 / (pt.std_error * pt.std_error);
    sw += w;
    sx += w * x;
    sy += w * pt.m2_tilde;
    sxx += w * x * x;
    sxy += w * x * pt.m2_tilde;
  }
  const double det = sw * sxx - sx * sx;
  if (det <= 0.0) throw std::invalid_argument("volume_fit: singular design");

  VolumeLawFit fit;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;
  fit.cov_ss = sw / det;
  fit.cov_si = -sx / det;
  fit.cov_ii = sxx / det;
  for (const auto& pt : points) {
    const double x = std::pow(static_cast<double>(pt.linear_size), dimension);
    const double r = pt.m2_tilde - (fit.slope * x + fit.intercept);
    fit.residuals.push_back(r);
    fit.sizes.push_back(pt.linear_size);
    if (!uniform) fit.chi2 += r * r / (pt.std_error * pt.std_error);
  }
  return fit;
}

struct PartCurves {
  std::vector<double> lambda;
  std::vector<double> q_part, z_part, z2_part;
  std::vector<double> q_err, z_err, z2_err;
  std::vector<double> combined;  // the recombined derivative value
  int order = 1;
};

// Splits derivative estimates into their Q / Z / Z2 contributions, the
// paper-level diagnostic for attributing singularities.
inline PartCurves decompose_parts(const std::vector<DerivativeEstimate>& estimates) {
  PartCurves c;
  if (estimates.empty()) return c;
  c.order = estimates.front().order;
  for (const auto& d : estimates) {
    if (d.order != c.order)
      throw std::invalid_argument("decompose_parts: mixed derivative orders");
    c.lambda.push_back(d.lambda);
    c.q_part.push_back(d.parts[0]);
    c.z_part.push_back(d.parts[1]);
    c.z2_part.push_back(d.parts[2]);
    c.q_err.push_back(d.part_errors[0]);
    c.z_err.push_back(d.part_errors[1]);
    c.z2_err.push_back(d.part_errors[2]);
    c.combined.push_back(d.recompute());
  }
  return c;
}

struct FiniteDiffReport {
  std::vector<double> lambda;      // interior grid points
  std::vector<double> fd_value;    // finite difference of the value curve
  std::vector<double> ti_value;    // thermodynamic-integration estimate
  std::vector<double> deviation;   // |fd - ti| / combined sigma
  double max_deviation = 0.0;
};

// Central finite differences of M2t(lambda) on a known (possibly nonuniform)
// grid, compared against first-derivative TI estimates at interior points.
inline FiniteDiffReport finite_diff_check(const std::vector<double>& grid,
                                          const std::vector<double>& values,
                                          const std::vector<double>& value_errors,
                                          const std::vector<DerivativeEstimate>& derivs) {
  if (grid.size() != values.size() || grid.size() != value_errors.size())
    throw std::invalid_argument("finite_diff_check: grid/value size mismatch");
  if (grid.size() < 3) throw std::invalid_argument("finite_diff_check: need >= 3 grid points");
  if (derivs.size() != grid.size() - 2)
    throw std::invalid_argument("finite_diff_check: need one derivative per interior point");

  FiniteDiffReport rep;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const auto& d = derivs[i - 1];
    if (d.order != 1) throw std::invalid_argument("finite_diff_check: need first derivatives");
    if (std::abs(d.lambda - grid[i]) > 1e-9 * std::max(1.0, std::abs(grid[i])))
      throw std::invalid_argument("finite_diff_check: derivative grid does not match value grid");
    const double hm = grid[i] - grid[i - 1];
    const double hp = grid[i + 1] - grid[i];
    if (!(hm > 0.0) || !(hp > 0.0))
      throw std::invalid_argument("finite_diff_check: grid must be strictly increasing");
    // three-point first derivative on a nonuniform grid
    const double wm = -hp / (hm * (hm + hp));
    const double w0 = (hp - hm) / (hm * hp);
    const double wp = hm / (hp * (hm + hp));
    const double fd = wm * values[i - 1] + w0 * values[i] + wp * values[i + 1];
    const double fd_err = std::sqrt(wm * wm * value_errors[i - 1] * value_errors[i - 1] +
                                    w0 * w0 * value_errors[i] * value_errors[i] +
                                    wp * wp * value_errors[i + 1] * value_errors[i + 1]);
    const double sigma = std::sqrt(fd_err * fd_err + d.std_error * d.std_error);
    const double dev = sigma > 0.0 ? std::abs(fd - d.value) / sigma : std::abs(fd - d.value);
    rep.lambda.push_back(grid[i]);
    rep.fd_value.push_back(fd);
    rep.ti_value.push_back(d.value);
    rep.deviation.push_back(dev);
    if (dev > rep.max_deviation) rep.max_deviation = dev;
  }
  return rep;
}

}  // namespace sremc
