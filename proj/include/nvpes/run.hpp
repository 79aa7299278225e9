#pragma once

// Executes a RunConfig and writes its results: one CSV (and/or JSON) file per
// ExperimentResult plus a `<type>.meta.json` sidecar with the effective
// config and the invariant summary.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvpes/config.hpp"
#include "nvpes/correlation.hpp"
#include "nvpes/experiments.hpp"

#ifndef NVPES_VERSION
#define NVPES_VERSION "0.0.0"
#endif

namespace nvpes {

struct RunOptions {
  std::size_t workers = 1;
  bool record_timing = false;
};

struct RunOutcome {
  std::vector<ExperimentResult> results;
  InvariantSummary invariants;
  std::vector<std::filesystem::path> files;
  bool invariants_ok = true;
  bool checks_passed = true;  // the validate experiment's own verdict
};

namespace run_detail {

inline SimulationSettings settings(const RunConfig& c, std::size_t workers) {
  SimulationSettings s;
  s.grid_points = c.simulation.grid_points;
  s.evolve.tol = {c.simulation.rel_tol, c.simulation.abs_tol};
  s.evolve.tail_tol = c.simulation.tail_tol;
  s.evolve.max_cutoff = c.simulation.max_cutoff;
  s.workers = workers;
  return s;
}

inline std::string number(double v) { return config_detail::format_double(v); }

inline std::string series_label(const std::string& name, const std::string& unit) {
  return name + " [" + unit + "]";
}

inline std::string csv_text(const ExperimentResult& r) {
  std::string out = series_label(r.x_name, r.x_unit);
  for (const auto& s : r.series) out += "," + series_label(s.name, s.unit);
  out += "\n";
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    out += number(r.x[i]);
    for (const auto& s : r.series) out += "," + number(s.values[i]);
    out += "\n";
  }
  return out;
}

inline nlohmann::ordered_json result_json(const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["x"] = {{"name", r.x_name}, {"unit", r.x_unit}, {"values", r.x}};
  j["series"] = nlohmann::ordered_json::array();
  for (const auto& s : r.series)
    j["series"].push_back({{"name", s.name}, {"unit", s.unit}, {"values", s.values}});
  j["metadata"] = r.metadata;
  return j;
}

inline void write_file(const std::filesystem::path& p, const std::string& text,
                       std::vector<std::filesystem::path>& written) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open " + p.string() + " for writing");
  written.push_back(p);
  f << text;
  f.close();
  if (!f) fail(ErrorKind::io, "failed writing " + p.string());
}

inline InvariantSummary steady_invariants(const StateBlock& s) {
  InvariantSummary inv;
  inv.max_norm_deviation = std::abs(s.trace() - 1.0);
  return inv;
}

inline ExperimentResult pes_result(const CountingDistribution& dist) {
  ExperimentResult r;
  r.name = "pes";
  r.x_name = "t";
  r.x_unit = "us";
  r.x.assign(dist.times().begin(), dist.times().end());
  // Columns up to the last photon number carrying any visible probability.
  std::size_t top = 0;
  for (std::size_t n = 0; n <= dist.n_max(); ++n)
    for (std::size_t i = 0; i < dist.size(); ++i)
      if (dist.pmf(n, i) > 1e-15) top = n;
  std::vector<double> tail(dist.size()), mean(dist.size());
  for (std::size_t n = 0; n <= top; ++n) {
    std::vector<double> col(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) col[i] = dist.pmf(n, i);
    r.add("P_" + std::to_string(n), "1", std::move(col));
  }
  for (std::size_t i = 0; i < dist.size(); ++i) {
    double beyond = dist.leakage(i);
    for (std::size_t n = top + 1; n <= dist.n_max(); ++n) beyond += dist.pmf(n, i);
    tail[i] = beyond;
    mean[i] = mean_at(dist, i);
  }
  r.add("tail", "1", tail);
  r.add("mean", "photons", mean);
  return r;
}

inline RunOutcome simulate(const RunConfig& c, const RunOptions& opts) {
  const auto& e = c.experiment;
  const auto sim = settings(c, opts.workers);
  const auto& rates = c.model;
  RunOutcome out;

  if (e.type == "pes") {
    const DriveSchedule sched(c.drive);
    const double t_end = sched.total_duration();
    const auto grid = uniform_grid(t_end, sim.grid_points);
    const auto traj = evolve(initial_state(c.initial, default_cutoff(rates, t_end, sim.evolve.max_cutoff)),
                             sched, rates, grid, sim.evolve);
    const auto dist = pes(traj, rates);
    out.invariants.absorb(dist);
    out.results.push_back(pes_result(dist));
  } else if (e.type == "chernoff-map") {
    auto m = chernoff_map(rates, e.pump_rates, e.horizon, {e.rabi, e.detuning}, sim);
    out.invariants = m.invariants;
    out.results.push_back(std::move(m.curves));
    out.results.push_back(std::move(m.summary));
  } else if (e.type == "rabi") {
    RabiSpec spec;
    spec.rabi = e.rabi;
    spec.detuning = e.detuning;
    spec.taus = e.taus;
    spec.polarization_pump = e.polarization_pump;
    spec.polarization_duration = e.polarization_duration;
    spec.readout_pump = e.readout_pump;
    spec.readout_duration = e.readout_duration;
    spec.shots = e.shots;
    spec.seed = c.output.seed;
    auto r = rabi_experiment(rates, spec, sim);
    out.invariants = r.invariants;
    out.results.push_back(std::move(r.result));
  } else if (e.type == "g2") {
    const DriveSegment drive{e.horizon, e.pump_rate, e.rabi, e.detuning};
    const auto curve = g2(rates, drive, e.horizon, e.tau_step);
    out.invariants = steady_invariants(steady_state(rates, drive).state);
    ExperimentResult r;
    r.name = "g2";
    r.x_name = "tau";
    r.x_unit = "us";
    r.x = curve.taus;
    r.add("d1", "1/us", curve.d1);
    r.add("d", "1/us", curve.d);
    r.add("g2", "1", curve.g2);
    r.metadata["plateau"] = curve.plateau;
    r.metadata["g2_zero"] = curve.g2.front();
    r.metadata["rise_time_half"] = rise_time(curve);
    out.results.push_back(std::move(r));
  } else if (e.type == "mandel") {
    const auto grid = uniform_grid(e.horizon, sim.grid_points);
    auto curves = parallel_map(e.pump_rates.size(), sim.workers, [&](std::size_t k) {
      return detail::annotated(detail::label("pump_rate", e.pump_rates[k]), [&] {
        const auto traj = evolve(initial_state(c.initial, default_cutoff(rates, e.horizon, sim.evolve.max_cutoff)),
                                 DriveSchedule::constant({e.horizon, e.pump_rates[k], 0.0, 0.0}), rates,
                                 grid, sim.evolve);
        const auto dist = pes(traj, rates);
        InvariantSummary inv;
        inv.absorb(dist);
        return std::pair{mandel_q(dist), inv};
      });
    });
    ExperimentResult q, summary;
    q.name = "mandel";
    q.x_name = "t";
    q.x_unit = "us";
    q.x = grid;
    summary.name = "mandel_summary";
    summary.x_name = "pump_rate";
    summary.x_unit = "MHz";
    summary.x = e.pump_rates;
    std::vector<double> t_min, q_min, t_zero;
    for (std::size_t k = 0; k < curves.size(); ++k) {
      const auto& [m, inv] = curves[k];
      q.add("Q_pump_" + number(e.pump_rates[k]), "1", m.q);
      t_min.push_back(m.t_min);
      q_min.push_back(m.q_min);
      t_zero.push_back(m.t_zero);
      out.invariants.absorb(inv);
    }
    summary.add("t_min", "us", t_min);
    summary.add("q_min", "1", q_min);
    summary.add("t_zero", "us", t_zero);
    out.results.push_back(std::move(q));
    out.results.push_back(std::move(summary));
  } else if (e.type == "saturation") {
    out.results.push_back(saturation_curve(rates, e.powers, e.collection_scale, e.background_slope, sim.workers));
  } else if (e.type == "odmr") {
    const bool by_frequency = !e.frequencies.empty();
    const auto detunings = by_frequency ? detunings_from_frequencies(e.frequencies, e.b_field, rates) : e.detunings;
    auto o = cwodmr_sweep(rates, detunings, e.rabi, e.pump_rate, sim.workers);
    if (by_frequency) o.spectrum.add("frequency", "MHz", e.frequencies);
    out.invariants = steady_invariants(steady_state(rates, {1.0, e.pump_rate, e.rabi, 0.0}).state);
    out.results.push_back(std::move(o.spectrum));
    if (!e.contrast_powers.empty())
      out.results.push_back(contrast_vs_power(rates, e.contrast_powers, e.rabi, detunings, sim.workers));
  } else if (e.type == "validate") {
    auto rep = validation_sweep(c.output.seed, e.sets, e.times, e.phase_points, sim);
    out.invariants = rep.invariants;
    out.checks_passed = rep.passed;
    out.results.push_back(std::move(rep.result));
  } else {
    fail(ErrorKind::config, "unknown experiment type '" + e.type + "'");
  }
  out.invariants_ok = out.invariants.max_norm_deviation < normalization_tolerance;
  return out;
}

}  // namespace run_detail

/// Runs the experiment and writes its files. Any failure removes the files
/// written so far and propagates.
inline RunOutcome run(const RunConfig& config, const RunOptions& opts = {}) {
  namespace fs = std::filesystem;
  const auto started = std::chrono::steady_clock::now();
  RunOutcome out = run_detail::simulate(config, opts);

  const fs::path dir(config.output.directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create output directory " + dir.string() + ": " + ec.message());

  const std::string config_text = emit_config(config);
  const bool csv = config.output.format != "json";
  const bool json = config.output.format != "csv";
  try {
    nlohmann::ordered_json meta;
    meta["program"] = "nvpes";
    meta["version"] = NVPES_VERSION;
    meta["experiment"] = config.experiment.type;
    meta["seed"] = config.output.seed;
    meta["config"] = config_text;
    meta["files"] = nlohmann::ordered_json::array();
    meta["results"] = nlohmann::ordered_json::object();
    for (const auto& r : out.results) {
      if (csv) {
        run_detail::write_file(dir / (r.name + ".csv"), run_detail::csv_text(r), out.files);
        meta["files"].push_back(r.name + ".csv");
      }
      if (json) {
        auto j = run_detail::result_json(r);
        j["config"] = config_text;
        run_detail::write_file(dir / (r.name + ".json"), j.dump(2) + "\n", out.files);
        meta["files"].push_back(r.name + ".json");
      }
      meta["results"][r.name] = r.metadata;
    }
    meta["invariants"] = {{"max_norm_deviation", out.invariants.max_norm_deviation},
                          {"max_leakage", out.invariants.max_leakage},
                          {"normalization_tolerance", normalization_tolerance},
                          {"passed", out.invariants_ok}};
    if (config.experiment.type == "validate") meta["checks_passed"] = out.checks_passed;
    if (opts.record_timing)
      meta["wall_time_s"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    run_detail::write_file(dir / (config.experiment.type + ".meta.json"), meta.dump(2) + "\n", out.files);
  } catch (...) {
    for (const auto& p : out.files) fs::remove(p, ec);
    out.files.clear();
    throw;
  }
  return out;
}

}  // namespace nvpes
