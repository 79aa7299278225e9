#pragma once

// Photon correlations: waiting-time density after an emission, the renewal
// equation for the all-emission density, g²(τ), and the Mandel Q parameter.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "nvpes/error.hpp"
#include "nvpes/evolve.hpp"
#include "nvpes/statistics.hpp"
#include "nvpes/validation.hpp"

namespace nvpes {

struct DelayCurve {
  std::vector<double> taus;
  std::vector<double> d1;  // first-emission delay density, 1/µs
  std::vector<double> d;   // all-emission density, 1/µs
  std::vector<double> g2;
  double plateau = 0.0;    // lim D(τ), estimated from the tail
};

inline std::vector<double> uniform_taus(double horizon, double step) {
  if (!(horizon > 0.0) || !(step > 0.0) || step > horizon)
    fail(ErrorKind::grid, "delay grid needs 0 < step <= horizon");
  const auto intervals = static_cast<std::size_t>(std::llround(horizon / step));
  return uniform_grid(intervals * step, intervals + 1);
}

/// −dP(0, τ)/dτ from an arbitrary starting block, evaluated as the exact
/// radiative flux out of the no-emission block. No checks on `start`.
inline std::vector<double> first_emission_density(const RateSet& rates, const DriveSegment& drive,
                                                  const StateBlock& start,
                                                  std::span<const double> taus,
                                                  const Tolerance& tol = {1e-10, 1e-13}) {
  PhotonResolvedState s(0, 0.0);
  s.set_block(0, start);
  DriveSegment seg = drive;
  seg.duration = taus.back() > 0.0 ? taus.back() : 1.0;
  EvolveOptions opts;
  opts.tol = tol;
  opts.auto_extend = false;
  const auto traj = evolve(s, DriveSchedule::constant(seg), rates, taus, opts);
  std::vector<double> d1(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i)
    d1[i] = std::max(0.0, rates.gamma0 * traj[i].block(0).excited());
  return d1;
}

struct DelayDensity {
  std::vector<double> taus;
  std::vector<double> d1;
};

/// Waiting-time density to the first emission from a post-emission state.
inline DelayDensity delay_density(const RateSet& rates, const DriveSegment& drive,
                                  const StateBlock& reset, double horizon, double step = 1e-3) {
  if (std::abs(reset.trace() - 1.0) > 1e-10 || !reset.is_physical())
    fail(ErrorKind::invalid_reset, "reset state must be a unit-trace density matrix");
  if (reset.excited() != 0.0)
    fail(ErrorKind::invalid_reset, "reset state must have no excited-state population");
  DelayDensity out;
  out.taus = uniform_taus(horizon, step);
  out.d1 = first_emission_density(rates, drive, reset, out.taus);
  return out;
}

/// D(τ) = D₁(τ) + ∫₀^τ D(τ′) D₁(τ − τ′) dτ′ by trapezoidal marching.
inline std::vector<double> renewal_solve(std::span<const double> taus, std::span<const double> d1) {
  const std::size_t n = taus.size();
  if (n != d1.size()) fail(ErrorKind::shape, "tau grid and density differ in length");
  if (n < 2) fail(ErrorKind::grid, "renewal solve needs at least two grid points");
  const double h = taus[1] - taus[0];
  if (!(h > 0.0)) fail(ErrorKind::grid, "tau grid must be increasing");
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs((taus[i] - taus[i - 1]) - h) > 1e-9 * std::max(h, std::abs(taus[i])))
      fail(ErrorKind::grid, "renewal solve requires a uniform tau grid");

  std::vector<double> d(n);
  d[0] = d1[0];
  const double diag = 1.0 - 0.5 * h * d1[0];
  for (std::size_t i = 1; i < n; ++i) {
    double conv = 0.5 * d[0] * d1[i];
    for (std::size_t j = 1; j < i; ++j) conv += d[j] * d1[i - j];
    d[i] = (d1[i] + h * conv) / diag;
  }
  return d;
}

/// Normalized post-emission state: the radiative jump map applied to the
/// stationary state (excited populations move to their ground partners).
inline StateBlock post_emission_state(const StateBlock& stationary) {
  const double excited = stationary.excited();
  if (!(excited > 0.0))
    fail(ErrorKind::invalid_argument, "stationary state does not emit; g2 is undefined");
  StateBlock b;
  b.p0 = stationary.pe0 / excited;
  b.p1 = stationary.pe1 / excited;
  b.pm1 = stationary.pem1 / excited;
  return b;
}

inline constexpr double plateau_fraction = 0.1;
inline constexpr double plateau_drift_limit = 1e-3;

/// g²(τ) = D(τ)/D(∞) under constant drive, starting from the stationary
/// post-emission state. D(∞) is the mean over the last 10% of the horizon.
inline DelayCurve g2(const RateSet& rates, const DriveSegment& drive, double horizon,
                     double step = 1e-3) {
  const StateBlock reset = post_emission_state(steady_state(rates, drive).state);
  auto dd = delay_density(rates, drive, reset, horizon, step);
  DelayCurve out;
  out.taus = std::move(dd.taus);
  out.d1 = std::move(dd.d1);
  out.d = renewal_solve(out.taus, out.d1);

  const std::size_t n = out.taus.size();
  const std::size_t first =
      std::min(n - 2, static_cast<std::size_t>(std::floor((1.0 - plateau_fraction) * (n - 1))));
  const std::size_t count = n - first;
  double mx = 0, my = 0;
  for (std::size_t i = first; i < n; ++i) {
    mx += out.taus[i];
    my += out.d[i];
  }
  mx /= count;
  my /= count;
  double sxy = 0, sxx = 0;
  for (std::size_t i = first; i < n; ++i) {
    sxy += (out.taus[i] - mx) * (out.d[i] - my);
    sxx += (out.taus[i] - mx) * (out.taus[i] - mx);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  const double window = out.taus.back() - out.taus[first];
  if (!(my > 0.0) || std::abs(slope) * window > plateau_drift_limit * my) {
    std::ostringstream msg;
    msg << "D(tau) has not plateaued within " << horizon
        << " us (relative drift over the tail window " << std::abs(slope) * window / my
        << "); use a longer horizon";
    fail(ErrorKind::horizon, msg.str());
  }
  out.plateau = my;
  out.g2.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.g2[i] = out.d[i] / my;
  return out;
}

/// First τ at which g² reaches `level` (linear interpolation); the width of
/// the antibunching dip for level = 0.5.
inline double rise_time(const DelayCurve& c, double level = 0.5) {
  for (std::size_t i = 1; i < c.g2.size(); ++i)
    if (c.g2[i] >= level) {
      const double f = (level - c.g2[i - 1]) / (c.g2[i] - c.g2[i - 1]);
      return c.taus[i - 1] + f * (c.taus[i] - c.taus[i - 1]);
    }
  return std::numeric_limits<double>::quiet_NaN();
}

struct MandelCurve {
  std::vector<double> times;
  std::vector<double> q;  // NaN where ⟨n⟩ is below the floor
  double t_min = std::numeric_limits<double>::quiet_NaN();
  double q_min = std::numeric_limits<double>::quiet_NaN();
  double t_zero = std::numeric_limits<double>::quiet_NaN();  // NaN: no crossing after t_min
};

inline constexpr double mandel_floor = 1e-9;

/// Q(t) = Var(n)/⟨n⟩ − 1, with t_min = argmin Q and t₀ the first upward zero
/// crossing after t_min.
inline MandelCurve mandel_q(const CountingDistribution& dist) {
  MandelCurve c;
  std::size_t best = dist.size();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    c.times.push_back(dist.time(i));
    const double mean = mean_at(dist, i);
    if (mean <= mandel_floor) {
      c.q.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    c.q.push_back(variance_at(dist, i) / mean - 1.0);
    if (best == dist.size() || c.q.back() < c.q[best]) best = i;
  }
  if (best == dist.size()) fail(ErrorKind::empty_curve, "mean count never rises above the Mandel floor");
  c.t_min = c.times[best];
  c.q_min = c.q[best];
  for (std::size_t i = best + 1; i < c.q.size(); ++i) {
    if (c.q[i - 1] < 0.0 && c.q[i] >= 0.0) {
      const double f = -c.q[i - 1] / (c.q[i] - c.q[i - 1]);
      c.t_zero = c.times[i - 1] + f * (c.times[i] - c.times[i - 1]);
      break;
    }
  }
  return c;
}

}  // namespace nvpes
