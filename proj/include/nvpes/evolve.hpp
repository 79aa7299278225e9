#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "nvpes/dopri5.hpp"
#include "nvpes/generator.hpp"
#include "nvpes/model.hpp"
#include "nvpes/state.hpp"

namespace nvpes {

struct EvolveOptions {
  Tolerance tol{};
  double tail_tol = 1e-10;         // top-block trace that triggers cutoff growth
  std::size_t max_cutoff = 4096;   // hard cap on n_max
  bool auto_extend = true;
  bool operator==(const EvolveOptions&) const = default;
};

/// Starting cutoff: max(16, ⌈3·Γ₀·T⌉), capped at `max_cutoff`.
inline std::size_t default_cutoff(const RateSet& rates, double duration,
                                  std::size_t max_cutoff = 4096) {
  const double guess = std::ceil(3.0 * rates.gamma0 * duration);
  const auto n = static_cast<std::size_t>(std::max(16.0, std::min(guess, 1e9)));
  return std::min(n, max_cutoff);
}

inline void validate_grid(std::span<const double> grid, double t_end) {
  if (grid.empty()) fail(ErrorKind::grid, "output grid is empty");
  if (!(grid.front() >= 0.0)) fail(ErrorKind::grid, "output grid starts before t = 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) fail(ErrorKind::grid, "output grid must be strictly increasing");
  if (grid.back() > t_end * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "output grid ends at " << grid.back() << " us, after the schedule end " << t_end
        << " us";
    fail(ErrorKind::grid, msg.str());
  }
}

/// Uniform grid of `points` samples on [0, t_end].
inline std::vector<double> uniform_grid(double t_end, std::size_t points) {
  if (points < 2) fail(ErrorKind::grid, "a grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = t_end * static_cast<double>(i) / static_cast<double>(points - 1);
  g.back() = t_end;
  return g;
}

/// Integrates the photon-resolved hierarchy through `schedule`, sampling at
/// the grid times (µs, measured from the schedule start). The initial state
/// is taken to sit at t = 0.
inline std::vector<PhotonResolvedState> evolve(const PhotonResolvedState& initial,
                                               const DriveSchedule& schedule,
                                               const RateSet& rates, std::span<const double> grid,
                                               const EvolveOptions& opts = {}) {
  rates.validate();
  schedule.validate();
  const double t_end = schedule.total_duration();
  validate_grid(grid, t_end);

  std::size_t n_max = initial.n_max();
  if (n_max > opts.max_cutoff) fail(ErrorKind::cutoff_overflow, "initial n_max exceeds the cutoff cap");

  // Flat blocks followed by the leakage accumulator.
  std::vector<double> y(initial.flat().begin(), initial.flat().end());
  y.push_back(initial.leakage());

  const DriveSegment* current = &schedule.segments().front();
  auto rhs = [&current, &rates](double, std::span<const double> yy, std::span<double> dy) {
    const std::size_t nb = yy.size() - 1;
    dy[nb] = derivative(yy.first(nb), dy.first(nb), *current, rates);
  };
  Dopri5<decltype(rhs)> stepper(rhs, opts.tol);

  std::vector<PhotonResolvedState> out;
  out.reserve(grid.size());
  std::size_t next = 0;
  std::vector<double> buf;

  auto emit = [&](double t, std::span<const double> v) {
    PhotonResolvedState s(v.size() / slot::count - 1, t);
    std::copy(v.begin(), v.end() - 1, s.flat().begin());
    s.set_leakage(v.back());
    out.push_back(std::move(s));
  };

  while (next < grid.size() && grid[next] <= 0.0) emit(grid[next++], y);

  double seg_start = 0.0;
  for (const auto& seg : schedule.segments()) {
    current = &seg;
    const bool last = &seg == &schedule.segments().back();
    const double seg_end = last ? std::max(t_end, grid.back()) : seg_start + seg.duration;
    stepper.reset(seg_start, y);
    while (stepper.time() < seg_end && next < grid.size()) {
      stepper.step(seg_end);
      const double t = stepper.time();
      const auto state = stepper.state();
      while (next < grid.size() && grid[next] <= t * (1.0 + 1e-14)) {
        const double g = grid[next++];
        if (std::abs(g - t) <= 1e-13 * std::max(1.0, t)) {
          emit(g, state);
        } else {
          buf.resize(state.size());
          stepper.dense(g, buf);
          emit(g, buf);
        }
      }
      y.assign(state.begin(), state.end());

      if (!opts.auto_extend) continue;
      const std::size_t top = n_max * slot::count;
      const double top_trace = y[top + slot::p0] + y[top + slot::p1] + y[top + slot::pm1] +
                               y[top + slot::pe0] + y[top + slot::pe1] + y[top + slot::pem1] +
                               y[top + slot::ps];
      if (top_trace > opts.tail_tol) {
        if (n_max >= opts.max_cutoff) {
          std::ostringstream msg;
          msg << "photon cutoff would exceed the cap of " << opts.max_cutoff << " at t = " << t
              << " us";
          fail(ErrorKind::cutoff_overflow, msg.str());
        }
        const std::size_t grown = std::min(2 * n_max, opts.max_cutoff);
        const double leak = y.back();
        y.pop_back();
        y.resize((grown + 1) * slot::count, 0.0);
        y.push_back(leak);
        n_max = grown;
        stepper.reset(t, y, false);
      }
    }
    if (next >= grid.size()) break;
    seg_start += seg.duration;
  }
  return out;
}

/// Propagates the photon-number-blind 9-component state through a schedule
/// and returns it at the end.
inline StateBlock evolve_summed(const StateBlock& initial, const DriveSchedule& schedule,
                                const RateSet& rates, const Tolerance& tol = {}) {
  rates.validate();
  schedule.validate();
  const DriveSegment* current = &schedule.segments().front();
  auto rhs = [&current, &rates](double, std::span<const double> yy, std::span<double> dy) {
    summed_derivative(yy, dy, *current, rates);
  };
  Dopri5<decltype(rhs)> stepper(rhs, tol);
  auto a = initial.to_array();
  std::vector<double> y(a.begin(), a.end());
  double t = 0.0;
  for (const auto& seg : schedule.segments()) {
    current = &seg;
    stepper.reset(t, y);
    const double end = t + seg.duration;
    while (stepper.time() < end) stepper.step(end);
    y.assign(stepper.state().begin(), stepper.state().end());
    t = end;
  }
  return StateBlock::from_span(y);
}

}  // namespace nvpes
