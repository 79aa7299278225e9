#pragma once

// Figure-level experiments built on the core model: Chernoff maps, Rabi
// readout, saturation and cwODMR sweeps. Sweep points run through
// parallel_map and come back in input order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvpes/evolve.hpp"
#include "nvpes/fit.hpp"
#include "nvpes/parallel.hpp"
#include "nvpes/statistics.hpp"
#include "nvpes/validation.hpp"

namespace nvpes {

struct Series {
  std::string name;
  std::string unit;
  std::vector<double> values;
};

struct ExperimentResult {
  std::string name;
  std::string x_name;
  std::string x_unit;
  std::vector<double> x;
  std::vector<Series> series;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  void add(std::string series_name, std::string unit, std::vector<double> values) {
    if (values.size() != x.size())
      fail(ErrorKind::shape, "series '" + series_name + "' does not match the x axis");
    series.push_back({std::move(series_name), std::move(unit), std::move(values)});
  }

  const Series& at(const std::string& series_name) const {
    for (const auto& s : series)
      if (s.name == series_name) return s;
    fail(ErrorKind::invalid_argument, "no series named '" + series_name + "'");
  }

  bool has(const std::string& series_name) const {
    return std::any_of(series.begin(), series.end(),
                       [&](const Series& s) { return s.name == series_name; });
  }
};

/// Worst normalization defect |Σₙ P(n,t) + leakage − 1| and worst leakage seen.
struct InvariantSummary {
  double max_norm_deviation = 0.0;
  double max_leakage = 0.0;

  void absorb(const CountingDistribution& d) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      double total = d.leakage(i);
      for (double p : d.raw_column(i)) total += p;
      max_norm_deviation = std::max(max_norm_deviation, std::abs(total - 1.0));
      max_leakage = std::max(max_leakage, d.leakage(i));
    }
  }
  void absorb(const InvariantSummary& o) {
    max_norm_deviation = std::max(max_norm_deviation, o.max_norm_deviation);
    max_leakage = std::max(max_leakage, o.max_leakage);
  }
};

struct SimulationSettings {
  EvolveOptions evolve{};
  std::size_t grid_points = 301;
  std::size_t workers = 1;
};

struct SweepSpec {
  std::string axis;
  std::vector<double> values;
  RateSet rates{};
  DriveSegment drive{};
  SimulationSettings sim{};
  double horizon = 3.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (values.empty()) fail(ErrorKind::invalid_argument, "sweep '" + axis + "' has no values");
    for (double v : values)
      if (!std::isfinite(v)) fail(ErrorKind::invalid_argument, "sweep '" + axis + "' has a non-finite value");
  }
};

namespace detail {

template <class Fn>
auto annotated(const std::string& label, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), label + ": " + e.what());
  }
}

inline std::string label(const char* what, double v) {
  std::ostringstream os;
  os << what << " = " << v;
  return os.str();
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Photon-count distribution of a laser pulse starting from `start`, with the
/// photon index at zero when the pulse begins.
inline CountingDistribution readout_distribution(const StateBlock& start, const RateSet& rates,
                                                 double pump_rate, std::span<const double> grid,
                                                 const EvolveOptions& opts = {}) {
  const double duration = grid.back();
  PhotonResolvedState s(default_cutoff(rates, duration, opts.max_cutoff), 0.0);
  s.set_block(0, start);
  const auto traj =
      evolve(s, DriveSchedule::constant({duration, pump_rate, 0.0, 0.0}), rates, grid, opts);
  return pes(traj, rates);
}

inline StateBlock ket_block(InitialKind kind) { return initial_state(kind, 1).block(0); }

// ---------------------------------------------------------------------------
// Chernoff map

struct MicrowaveContext {
  double rabi = 0.0;
  double detuning = 0.0;
};

struct ChernoffMap {
  ExperimentResult curves;   // C(t), one series per pump rate
  ExperimentResult summary;  // max C and t_max against pump rate
  InvariantSummary invariants;
};

/// The MW context only enters the metadata: |0⟩ and |1⟩ readouts are laser-only.
inline ChernoffMap chernoff_map(const RateSet& rates, const std::vector<double>& pump_rates,
                                double horizon, const MicrowaveContext& mw = {},
                                const SimulationSettings& sim = {}) {
  if (pump_rates.empty()) fail(ErrorKind::invalid_argument, "chernoff map needs at least one pump rate");
  const auto grid = uniform_grid(horizon, sim.grid_points);
  struct Point {
    std::vector<double> c;
    InvariantSummary inv;
  };
  auto points = parallel_map(pump_rates.size(), sim.workers, [&](std::size_t k) {
    return detail::annotated(detail::label("pump_rate", pump_rates[k]), [&] {
      const auto d0 = readout_distribution(ket_block(InitialKind::ket0), rates, pump_rates[k], grid, sim.evolve);
      const auto d1 = readout_distribution(ket_block(InitialKind::ket1), rates, pump_rates[k], grid, sim.evolve);
      Point p;
      p.inv.absorb(d0);
      p.inv.absorb(d1);
      p.c.resize(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) p.c[i] = chernoff(d0, d1, grid[i]).information;
      return p;
    });
  });

  ChernoffMap out;
  out.curves.name = "chernoff_curves";
  out.curves.x_name = "t";
  out.curves.x_unit = "us";
  out.curves.x = grid;
  out.summary.name = "chernoff_summary";
  out.summary.x_name = "pump_rate";
  out.summary.x_unit = "MHz";
  out.summary.x = pump_rates;
  std::vector<double> max_c, t_max;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& c = points[k].c;
    const auto it = std::max_element(c.begin(), c.end());
    max_c.push_back(*it);
    t_max.push_back(grid[static_cast<std::size_t>(it - c.begin())]);
    std::ostringstream name;
    name << "C_pump_" << pump_rates[k];
    out.curves.add(name.str(), "1", c);
    out.invariants.absorb(points[k].inv);
  }
  out.summary.add("max_C", "1", max_c);
  out.summary.add("t_max", "us", t_max);
  for (auto* r : {&out.curves, &out.summary}) {
    r->metadata["mw_context"] = {{"rabi", mw.rabi}, {"detuning", mw.detuning}};
    r->metadata["horizon_us"] = horizon;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rabi readout

struct RabiSpec {
  double rabi = 10.0;
  double detuning = 0.0;
  std::vector<double> taus;        // MW pulse durations, µs
  double polarization_pump = 20.0;
  double polarization_duration = 2.0;
  double readout_pump = 20.0;
  double readout_duration = 0.3;
  std::size_t shots = 0;           // 0: exact means only
  std::uint64_t seed = 0;
};

struct RabiResult {
  ExperimentResult result;
  InvariantSummary invariants;
  double bright = 0.0;  // mean readout count right after polarization
};

inline RabiResult rabi_experiment(const RateSet& rates, const RabiSpec& spec,
                                  const SimulationSettings& sim = {}) {
  if (spec.taus.empty()) fail(ErrorKind::invalid_argument, "rabi experiment needs at least one tau");
  for (double tau : spec.taus)
    if (!(tau >= 0.0) || !std::isfinite(tau)) fail(ErrorKind::invalid_argument, "MW pulse durations must be >= 0");
  if (!(spec.readout_duration > 0.0)) fail(ErrorKind::invalid_argument, "readout duration must be > 0");

  const StateBlock polarized =
      evolve_summed(ket_block(InitialKind::thermal),
                    DriveSchedule::constant({spec.polarization_duration, spec.polarization_pump, 0.0, 0.0}),
                    rates, sim.evolve.tol);
  const std::vector<double> grid{0.0, spec.readout_duration};

  struct Point {
    double mean = 0.0, sampled = 0.0, stderr_ = 0.0;
    InvariantSummary inv;
  };
  auto measure = [&](const StateBlock& start, std::size_t index) {
    const auto dist = readout_distribution(start, rates, spec.readout_pump, grid, sim.evolve);
    Point p;
    p.inv.absorb(dist);
    p.mean = mean_at(dist, 1);
    if (spec.shots > 0) {
      const auto counts = sample_counts(dist, spec.readout_duration, spec.shots,
                                        detail::splitmix64(spec.seed ^ detail::splitmix64(index)));
      double s = 0.0, s2 = 0.0;
      for (auto c : counts) {
        s += static_cast<double>(c);
        s2 += static_cast<double>(c) * static_cast<double>(c);
      }
      const double n = static_cast<double>(spec.shots);
      p.sampled = s / n;
      const double var = spec.shots > 1 ? (s2 - n * p.sampled * p.sampled) / (n - 1.0) : 0.0;
      p.stderr_ = std::sqrt(std::max(0.0, var) / n);
    }
    return p;
  };

  RabiResult out;
  const Point bright = measure(polarized, spec.taus.size());
  out.bright = bright.mean;
  out.invariants.absorb(bright.inv);

  auto points = parallel_map(spec.taus.size(), sim.workers, [&](std::size_t k) {
    return detail::annotated(detail::label("tau", spec.taus[k]), [&] {
      StateBlock s = polarized;
      if (spec.taus[k] > 0.0)
        s = evolve_summed(s, DriveSchedule::constant({spec.taus[k], 0.0, spec.rabi, spec.detuning}),
                          rates, sim.evolve.tol);
      return measure(s, k);
    });
  });

  auto& r = out.result;
  r.name = "rabi";
  r.x_name = "tau";
  r.x_unit = "us";
  r.x = spec.taus;
  std::vector<double> mean, norm, sampled, se, norm_sampled;
  for (const auto& p : points) {
    out.invariants.absorb(p.inv);
    mean.push_back(p.mean);
    norm.push_back(p.mean / out.bright);
    sampled.push_back(p.sampled);
    se.push_back(p.stderr_);
    norm_sampled.push_back(p.sampled / out.bright);
  }
  r.add("mean_counts", "photons", mean);
  r.add("normalized_mean", "1", norm);
  if (spec.shots > 0) {
    r.add("sampled_mean", "photons", sampled);
    r.add("sampled_stderr", "photons", se);
    r.add("normalized_sampled", "1", norm_sampled);
  }
  r.metadata["bright_level"] = out.bright;
  r.metadata["shots"] = spec.shots;
  return out;
}

// ---------------------------------------------------------------------------
// Saturation

inline ExperimentResult saturation_curve(const RateSet& rates, const std::vector<double>& powers_uw,
                                         double collection_scale, double background_slope,
                                         std::size_t workers = 1) {
  if (!(collection_scale >= 0.0) || !std::isfinite(collection_scale))
    fail(ErrorKind::config, "collection scale must be >= 0");
  if (!(background_slope >= 0.0) || !std::isfinite(background_slope))
    fail(ErrorKind::config, "background slope must be >= 0");
  if (powers_uw.empty()) fail(ErrorKind::invalid_argument, "saturation curve needs at least one power");
  for (double p : powers_uw)
    if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorKind::invalid_argument, "laser powers must be >= 0");

  auto flux = parallel_map(powers_uw.size(), workers, [&](std::size_t k) {
    return detail::annotated(detail::label("power", powers_uw[k]), [&] {
      if (powers_uw[k] == 0.0) return 0.0;
      const auto seg = DriveSegment::from_laser_power(1.0, powers_uw[k], rates);
      return emission_rate(steady_state(rates, seg).state, rates);
    });
  });

  ExperimentResult r;
  r.name = "saturation";
  r.x_name = "laser_power";
  r.x_unit = "uW";
  r.x = powers_uw;
  std::vector<double> pump, nv, bg, total;
  for (std::size_t k = 0; k < powers_uw.size(); ++k) {
    pump.push_back(rates.c_laser * powers_uw[k]);
    nv.push_back(collection_scale * flux[k]);
    bg.push_back(background_slope * powers_uw[k]);
    total.push_back(nv.back() + bg.back());
  }
  r.add("pump_rate", "MHz", pump);
  r.add("nv_counts", "1/us", nv);
  r.add("background", "1/us", bg);
  r.add("total", "1/us", total);
  r.metadata["collection_scale"] = collection_scale;
  r.metadata["background_slope"] = background_slope;
  return r;
}

// ---------------------------------------------------------------------------
// cwODMR

/// Δ = 2πν − ω₊ for MW frequencies ν in MHz at field B (mT).
inline std::vector<double> detunings_from_frequencies(const std::vector<double>& frequencies_mhz,
                                                      double b_field_mt, const RateSet& rates) {
  const double upper = resonance_frequencies(b_field_mt, rates).upper;
  std::vector<double> out;
  out.reserve(frequencies_mhz.size());
  for (double nu : frequencies_mhz) out.push_back(two_pi * nu - upper);
  return out;
}

inline std::vector<double> symmetric_detunings(double half_span, std::size_t points) {
  if (!(half_span > 0.0) || points < 2) fail(ErrorKind::grid, "detuning grid needs a positive span and >= 2 points");
  std::vector<double> d(points);
  for (std::size_t i = 0; i < points; ++i)
    d[i] = -half_span + 2.0 * half_span * static_cast<double>(i) / static_cast<double>(points - 1);
  return d;
}

struct OdmrResult {
  ExperimentResult spectrum;
  std::optional<LorentzFit> fit;
  double contrast = std::numeric_limits<double>::quiet_NaN();  // NaN when the fit failed
};

inline OdmrResult cwodmr_sweep(const RateSet& rates, const std::vector<double>& detunings,
                               double rabi, double pump_rate, std::size_t workers = 1) {
  if (detunings.empty()) fail(ErrorKind::invalid_argument, "ODMR sweep needs at least one detuning");
  auto intensity = parallel_map(detunings.size(), workers, [&](std::size_t k) {
    return detail::annotated(detail::label("detuning", detunings[k]), [&] {
      return emission_rate(steady_state(rates, {1.0, pump_rate, rabi, detunings[k]}).state, rates);
    });
  });

  OdmrResult out;
  auto& r = out.spectrum;
  r.name = "odmr";
  r.x_name = "detuning";
  r.x_unit = "MHz";
  r.x = detunings;
  r.add("fluorescence", "1/us", intensity);
  try {
    out.fit = lorentzian_fit(detunings, intensity);
    out.contrast = out.fit->baseline > 0.0 ? out.fit->depth / out.fit->baseline
                                           : std::numeric_limits<double>::quiet_NaN();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::fit_failure) throw;
    warn(std::string("ODMR contrast unavailable: ") + e.what());
  }
  r.metadata["rabi"] = rabi;
  r.metadata["pump_rate"] = pump_rate;
  r.metadata["contrast_available"] = std::isfinite(out.contrast);
  if (std::isfinite(out.contrast)) {
    r.metadata["contrast"] = out.contrast;
    r.metadata["linewidth_hwhm"] = out.fit->width;
    r.metadata["center"] = out.fit->center;
    r.metadata["fit_residual_rms"] = out.fit->residual;
  }
  return out;
}

/// Fitted ODMR contrast and linewidth against laser power (µW) at fixed Ω.
inline ExperimentResult contrast_vs_power(const RateSet& rates, const std::vector<double>& powers_uw,
                                          double rabi, const std::vector<double>& detunings,
                                          std::size_t workers = 1) {
  if (powers_uw.empty()) fail(ErrorKind::invalid_argument, "contrast sweep needs at least one power");
  auto fits = parallel_map(powers_uw.size(), workers, [&](std::size_t k) {
    return detail::annotated(detail::label("power", powers_uw[k]), [&] {
      const auto o = cwodmr_sweep(rates, detunings, rabi, rates.c_laser * powers_uw[k]);
      return std::pair{o.contrast, o.fit ? o.fit->width : std::numeric_limits<double>::quiet_NaN()};
    });
  });
  ExperimentResult r;
  r.name = "odmr_contrast";
  r.x_name = "laser_power";
  r.x_unit = "uW";
  r.x = powers_uw;
  std::vector<double> c, w;
  for (const auto& [ck, wk] : fits) {
    c.push_back(ck);
    w.push_back(wk);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < c.size(); ++k)
    if (std::isfinite(c[k]) && (!std::isfinite(c[best]) || c[k] > c[best])) best = k;
  r.add("contrast", "1", c);
  r.add("linewidth_hwhm", "MHz", w);
  r.metadata["rabi"] = rabi;
  r.metadata["argmax_power_uw"] = powers_uw[best];
  return r;
}

// ---------------------------------------------------------------------------
// Randomized self-check: hierarchy vs counting-field oracle

struct RandomCase {
  RateSet rates;
  DriveSegment drive;
};

/// Rates scaled 0.5–2× from the defaults, Γ_P ∈ [1, 50], Ω ∈ [0, 30], Δ ∈ [−20, 20].
inline RandomCase random_case(std::mt19937_64& rng, double duration) {
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); };
  RandomCase c;
  for (double* rate : {&c.rates.gamma0, &c.rates.gamma_f0, &c.rates.gamma_f1, &c.rates.gamma_s0,
                       &c.rates.gamma_s1, &c.rates.gamma1, &c.rates.gamma2})
    *rate *= between(0.5, 2.0);
  c.drive.duration = duration;
  c.drive.pump_rate = between(1.0, 50.0);
  c.drive.rabi = between(0.0, 30.0);
  c.drive.detuning = between(-20.0, 20.0);
  return c;
}

inline constexpr double oracle_tolerance = 1e-6;
inline constexpr double normalization_tolerance = 1e-8;

struct ValidationReport {
  ExperimentResult result;
  InvariantSummary invariants;
  double worst_oracle_difference = 0.0;
  bool passed = false;
};

inline ValidationReport validation_sweep(std::uint64_t seed, std::size_t sets,
                                         std::vector<double> times, std::size_t phase_points = 256,
                                         const SimulationSettings& sim = {}) {
  if (sets == 0) fail(ErrorKind::invalid_argument, "validation needs at least one parameter set");
  if (times.empty()) fail(ErrorKind::invalid_argument, "validation needs at least one time");
  std::sort(times.begin(), times.end());
  std::mt19937_64 rng(seed);
  std::vector<RandomCase> cases;
  for (std::size_t k = 0; k < sets; ++k) cases.push_back(random_case(rng, times.back()));
  const StateBlock thermal = ket_block(InitialKind::thermal);

  struct Point {
    double diff = 0.0;
    InvariantSummary inv;
  };
  auto points = parallel_map(sets, sim.workers, [&](std::size_t k) {
    return detail::annotated(detail::label("set", static_cast<double>(k)), [&] {
      const auto& c = cases[k];
      const auto sched = DriveSchedule::constant(c.drive);
      const auto traj = evolve(initial_state(InitialKind::thermal,
                                             default_cutoff(c.rates, times.back(), sim.evolve.max_cutoff)),
                               sched, c.rates, times, sim.evolve);
      const auto dist = pes(traj, c.rates);
      Point p;
      p.inv.absorb(dist);
      for (std::size_t i = 0; i < times.size(); ++i) {
        const auto oracle = counting_field_pmf(thermal, sched, c.rates, times[i], phase_points);
        const std::size_t top = std::max(oracle.size(), dist.n_max() + 1);
        for (std::size_t n = 0; n < top; ++n) {
          const double o = n < oracle.size() ? oracle[n] : 0.0;
          p.diff = std::max(p.diff, std::abs(o - dist.pmf(n, i)));
        }
      }
      return p;
    });
  });

  ValidationReport out;
  auto& r = out.result;
  r.name = "validate";
  r.x_name = "set";
  r.x_unit = "1";
  std::vector<double> diff, norm, pump, rabi, det, g0;
  for (std::size_t k = 0; k < sets; ++k) {
    r.x.push_back(static_cast<double>(k));
    diff.push_back(points[k].diff);
    norm.push_back(points[k].inv.max_norm_deviation);
    pump.push_back(cases[k].drive.pump_rate);
    rabi.push_back(cases[k].drive.rabi);
    det.push_back(cases[k].drive.detuning);
    g0.push_back(cases[k].rates.gamma0);
    out.invariants.absorb(points[k].inv);
    out.worst_oracle_difference = std::max(out.worst_oracle_difference, points[k].diff);
  }
  r.add("max_oracle_difference", "1", diff);
  r.add("max_norm_deviation", "1", norm);
  r.add("pump_rate", "MHz", pump);
  r.add("rabi", "MHz", rabi);
  r.add("detuning", "MHz", det);
  r.add("gamma0", "MHz", g0);
  out.passed = out.worst_oracle_difference < oracle_tolerance &&
               out.invariants.max_norm_deviation < normalization_tolerance;
  r.metadata["times_us"] = times;
  r.metadata["phase_points"] = phase_points;
  r.metadata["worst_oracle_difference"] = out.worst_oracle_difference;
  r.metadata["oracle_tolerance"] = oracle_tolerance;
  r.metadata["passed"] = out.passed;
  return out;
}

}  // namespace nvpes
