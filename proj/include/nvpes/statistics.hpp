#pragma once

// Photon-emission statistics P(n, t) and the readout figures of merit built
// on them: moments, intensity, log-likelihood ratio, error rates, Chernoff
// information and count sampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "nvpes/error.hpp"
#include "nvpes/log.hpp"
#include "nvpes/model.hpp"
#include "nvpes/state.hpp"

namespace nvpes {

class CountingDistribution {
 public:
  CountingDistribution() = default;

  /// `columns[i][n]` is P(n, times[i]). Columns may differ in length; missing
  /// bins read as zero.
  CountingDistribution(std::vector<double> times, std::vector<std::vector<double>> columns,
                       std::vector<double> leakage, std::vector<double> emission_flux = {})
      : times_(std::move(times)),
        columns_(std::move(columns)),
        leakage_(std::move(leakage)),
        flux_(std::move(emission_flux)) {
    if (columns_.size() != times_.size() || leakage_.size() != times_.size() ||
        (!flux_.empty() && flux_.size() != times_.size()))
      fail(ErrorKind::shape, "counting distribution columns do not match the time grid");
  }

  /// A single-time distribution from an explicit pmf (tests, injected data).
  static CountingDistribution from_pmf(std::vector<double> pmf, double t = 0.0,
                                       double leakage = 0.0) {
    return CountingDistribution({t}, {std::move(pmf)}, {leakage});
  }

  std::span<const double> times() const noexcept { return times_; }
  std::size_t size() const noexcept { return times_.size(); }
  double time(std::size_t i) const { return times_.at(i); }
  double leakage(std::size_t i) const { return leakage_.at(i); }
  bool has_flux() const noexcept { return !flux_.empty(); }
  double flux(std::size_t i) const { return flux_.at(i); }

  std::size_t n_max() const noexcept {
    std::size_t m = 0;
    for (const auto& c : columns_) m = std::max(m, c.size());
    return m == 0 ? 0 : m - 1;
  }

  /// P(n, times[i]), with integration noise below zero clamped away.
  double pmf(std::size_t n, std::size_t i) const {
    const auto& c = columns_.at(i);
    return n < c.size() ? std::max(0.0, c[n]) : 0.0;
  }

  std::span<const double> raw_column(std::size_t i) const { return columns_.at(i); }

  std::vector<double> column(std::size_t i, std::size_t n_max) const {
    std::vector<double> out(n_max + 1, 0.0);
    for (std::size_t n = 0; n <= n_max; ++n) out[n] = pmf(n, i);
    return out;
  }

  /// Grid index of time t; there is no interpolation between grid points.
  std::size_t index_of(double t) const {
    for (std::size_t i = 0; i < times_.size(); ++i)
      if (std::abs(times_[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return i;
    std::ostringstream msg;
    msg << "t = " << t << " us is not on the distribution's time grid";
    fail(ErrorKind::grid, msg.str());
  }

 private:
  std::vector<double> times_;
  std::vector<std::vector<double>> columns_;
  std::vector<double> leakage_;
  std::vector<double> flux_;
};

/// P(n, t) = Tr ρ(n, t) along a trajectory, plus the radiative flux
/// Γ₀·(pe0 + pe1 + pem1) summed over n at each time.
inline CountingDistribution pes(std::span<const PhotonResolvedState> traj, const RateSet& rates) {
  if (traj.empty()) fail(ErrorKind::invalid_argument, "trajectory is empty");
  std::vector<double> times, leak, flux;
  std::vector<std::vector<double>> cols;
  for (const auto& s : traj) {
    times.push_back(s.time());
    leak.push_back(s.leakage());
    std::vector<double> col(s.block_count());
    double excited = 0.0;
    for (std::size_t n = 0; n < s.block_count(); ++n) {
      col[n] = s.block_trace(n);
      const auto b = s.block_span(n);
      excited += b[slot::pe0] + b[slot::pe1] + b[slot::pem1];
    }
    cols.push_back(std::move(col));
    flux.push_back(rates.gamma0 * excited);
  }
  return CountingDistribution(std::move(times), std::move(cols), std::move(leak), std::move(flux));
}

inline constexpr double moment_leakage_warning = 1e-6;

inline double moment_at(const CountingDistribution& dist, unsigned order, std::size_t i) {
  double sum = 0.0;
  const std::size_t top = dist.n_max();
  for (std::size_t n = 1; n <= top; ++n) sum += std::pow(static_cast<double>(n), order) * dist.pmf(n, i);
  return sum;
}

/// ⟨nᵐ⟩ at grid time t.
inline double moments(const CountingDistribution& dist, unsigned order, double t) {
  if (order < 1) fail(ErrorKind::invalid_argument, "moment order must be >= 1");
  const std::size_t i = dist.index_of(t);
  if (dist.leakage(i) > moment_leakage_warning) {
    std::ostringstream msg;
    msg << "moment at t = " << t << " us is biased: leakage " << dist.leakage(i);
    warn(msg.str());
  }
  return moment_at(dist, order, i);
}

inline double mean_at(const CountingDistribution& d, std::size_t i) { return moment_at(d, 1, i); }

inline double variance_at(const CountingDistribution& d, std::size_t i) {
  const double mean = mean_at(d, i);
  double var = 0.0;
  for (std::size_t n = 0; n <= d.n_max(); ++n) {
    const double x = static_cast<double>(n) - mean;
    var += x * x * d.pmf(n, i);
  }
  return var;
}

struct IntensityCurve {
  std::vector<double> times;
  std::vector<double> finite_difference;  // d⟨n⟩/dt on the grid
  std::vector<double> flux;               // Γ₀·Σ excited; empty when unavailable
};

/// Derivative of f on a possibly non-uniform grid: three-point central
/// differences inside, three-point one-sided stencils at both ends.
inline std::vector<double> grid_derivative(std::span<const double> x, std::span<const double> f) {
  const std::size_t n = x.size();
  if (n < 3) fail(ErrorKind::grid, "finite differences need at least 3 grid points");
  std::vector<double> d(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = x[i] - x[i - 1], h2 = x[i + 1] - x[i];
    d[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i] +
           h1 / (h2 * (h1 + h2)) * f[i + 1];
  }
  {
    const double h1 = x[1] - x[0], h2 = x[2] - x[1];
    d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] -
           h1 / (h2 * (h1 + h2)) * f[2];
  }
  {
    const double h1 = x[n - 2] - x[n - 3], h2 = x[n - 1] - x[n - 2];
    d[n - 1] = h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2] +
               (2 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1];
  }
  return d;
}

inline IntensityCurve intensity(const CountingDistribution& dist) {
  IntensityCurve out;
  out.times.assign(dist.times().begin(), dist.times().end());
  std::vector<double> mean(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) mean[i] = mean_at(dist, i);
  out.finite_difference = grid_derivative(out.times, mean);
  if (dist.has_flux())
    for (std::size_t i = 0; i < dist.size(); ++i) out.flux.push_back(dist.flux(i));
  return out;
}

inline constexpr double likelihood_floor = 1e-15;

inline void require_same_grid(const CountingDistribution& a, const CountingDistribution& b) {
  if (a.size() != b.size()) fail(ErrorKind::shape, "distributions have different time grids");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a.time(i) - b.time(i)) > 1e-12 * std::max(1.0, std::abs(a.time(i))))
      fail(ErrorKind::shape, "distributions have different time grids");
}

/// λ(n) = ln(P₀(n)/P₁(n)). Bins where both probabilities fall below the
/// floor are NaN (undefined); a one-sided zero gives ±∞.
inline std::vector<double> log_likelihood_ratio(const CountingDistribution& d0,
                                                const CountingDistribution& d1, double t) {
  require_same_grid(d0, d1);
  const std::size_t i = d0.index_of(t);
  const std::size_t top = std::max(d0.n_max(), d1.n_max());
  std::vector<double> lambda(top + 1);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n <= top; ++n) {
    const double a = d0.pmf(n, i), b = d1.pmf(n, i);
    const bool ha = a >= likelihood_floor, hb = b >= likelihood_floor;
    if (!ha && !hb)
      lambda[n] = std::numeric_limits<double>::quiet_NaN();
    else if (!hb)
      lambda[n] = inf;
    else if (!ha)
      lambda[n] = -inf;
    else
      lambda[n] = std::log(a / b);
  }
  return lambda;
}

struct ReadoutReport {
  std::vector<double> lambda;
  long n_crossing = -1;  // outcomes n > n_crossing are assigned |0⟩
  double eps0 = 0.0;
  double eps1 = 0.0;
  double eps_mean = 0.0;
  double eps_bayes = 0.0;
  double chernoff = 0.0;
  double s_star = 0.5;
};

/// Threshold error rates with the bright-|0⟩ convention: counts above n_c
/// are assigned |0⟩, where n_c is the largest n whose likelihood ratio
/// favours |1⟩ (λ ≤ 0). Also reports the per-bin Bayes error ½Σ min(P₀, P₁).
inline ReadoutReport error_rates(const CountingDistribution& d0, const CountingDistribution& d1,
                                 double t) {
  ReadoutReport rep;
  rep.lambda = log_likelihood_ratio(d0, d1, t);
  const std::size_t i = d0.index_of(t);
  for (std::size_t n = 0; n < rep.lambda.size(); ++n)
    if (!std::isnan(rep.lambda[n]) && rep.lambda[n] <= 0.0) rep.n_crossing = static_cast<long>(n);
  double bayes = 0.0;
  for (std::size_t n = 0; n < rep.lambda.size(); ++n) {
    const double a = d0.pmf(n, i), b = d1.pmf(n, i);
    if (static_cast<long>(n) <= rep.n_crossing)
      rep.eps0 += a;
    else
      rep.eps1 += b;
    bayes += std::min(a, b);
  }
  rep.eps0 = std::clamp(rep.eps0, 0.0, 1.0);
  rep.eps1 = std::clamp(rep.eps1, 0.0, 1.0);
  rep.eps_mean = 0.5 * (rep.eps0 + rep.eps1);
  rep.eps_bayes = 0.5 * bayes;
  return rep;
}

struct ChernoffResult {
  double information = 0.0;  // C; +∞ when the supports do not overlap
  double s_star = 0.5;
};

/// Minimizes a function that is convex on [lo, hi] by golden-section search.
template <class F>
double golden_section_minimize(F&& f, double lo, double hi, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// C = −min_{s∈[0,1]} ln Σₙ P₀ˢ P₁^{1−s} over bins where both are positive.
inline ChernoffResult chernoff(std::span<const double> p0, std::span<const double> p1) {
  std::vector<double> la, lb;
  const std::size_t top = std::max(p0.size(), p1.size());
  for (std::size_t n = 0; n < top; ++n) {
    const double a = n < p0.size() ? p0[n] : 0.0;
    const double b = n < p1.size() ? p1[n] : 0.0;
    if (a > 0.0 && b > 0.0) {
      la.push_back(std::log(a));
      lb.push_back(std::log(b));
    }
  }
  if (la.empty()) return {std::numeric_limits<double>::infinity(), 0.5};
  auto objective = [&](double s) {
    // log-sum-exp for robustness when the counts are large
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < la.size(); ++k) m = std::max(m, s * la[k] + (1 - s) * lb[k]);
    double acc = 0.0;
    for (std::size_t k = 0; k < la.size(); ++k) acc += std::exp(s * la[k] + (1 - s) * lb[k] - m);
    return m + std::log(acc);
  };
  const double s = golden_section_minimize(objective, 0.0, 1.0, 1e-7);
  return {std::max(0.0, -objective(s)), s};
}

inline ChernoffResult chernoff(const CountingDistribution& d0, const CountingDistribution& d1,
                               double t) {
  require_same_grid(d0, d1);
  const std::size_t i = d0.index_of(t);
  const std::size_t top = std::max(d0.n_max(), d1.n_max());
  return chernoff(d0.column(i, top), d1.column(i, top));
}

inline ReadoutReport readout_report(const CountingDistribution& d0,
                                    const CountingDistribution& d1, double t) {
  ReadoutReport rep = error_rates(d0, d1, t);
  const auto c = chernoff(d0, d1, t);
  rep.chernoff = c.information;
  rep.s_star = c.s_star;
  return rep;
}

inline constexpr double sampling_leakage_limit = 1e-3;

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw; fixed
/// arithmetic so that seeded sequences match across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Draws `shots` photon counts from P(·, t) by inverse-CDF sampling.
inline std::vector<std::size_t> sample_counts(const CountingDistribution& dist, double t,
                                              std::size_t shots, std::uint64_t seed) {
  if (shots < 1) fail(ErrorKind::invalid_argument, "need at least one shot");
  const std::size_t i = dist.index_of(t);
  if (dist.leakage(i) > sampling_leakage_limit) {
    std::ostringstream msg;
    msg << "distribution at t = " << t << " us is truncated (leakage " << dist.leakage(i) << ")";
    fail(ErrorKind::truncated_distribution, msg.str());
  }
  std::vector<double> cdf(dist.n_max() + 1);
  double acc = 0.0;
  for (std::size_t n = 0; n < cdf.size(); ++n) cdf[n] = (acc += dist.pmf(n, i));
  if (!(acc > 0.0)) fail(ErrorKind::invalid_argument, "distribution has no probability mass");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out(shots);
  for (auto& s : out) {
    const double u = unit_uniform(rng) * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    s = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
  }
  return out;
}

}  // namespace nvpes
