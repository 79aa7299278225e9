#pragma once

// Line-oriented run configuration:
//
//   [model]        rate overrides (gamma0 = 63 MHz, ...)
//   [drive]        initial = thermal, repeated `segment = duration: 0.7 us, pump_rate: 10 MHz`
//   [simulation]   grid and tolerances
//   [experiment]   type = pes | chernoff-map | rabi | g2 | mandel | saturation | odmr | validate
//   [output]       directory, format, seed
//
// Values may carry the unit of their field (us, MHz, uW, mT, MHz/uW, MHz/mT);
// any other suffix is an error. Lists are comma separated or linspace(a, b, n).
// Rates, Rabi frequencies and detunings are angular (rad/µs), written as MHz.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nvpes/error.hpp"
#include "nvpes/model.hpp"
#include "nvpes/state.hpp"

namespace nvpes {

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = i + 1 == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

struct SimulationConfig {
  std::size_t grid_points = 301;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double tail_tol = 1e-10;
  std::size_t max_cutoff = 4096;
  bool operator==(const SimulationConfig&) const = default;
};

struct ExperimentConfig {
  std::string type;
  double horizon = 3.0;
  std::vector<double> pump_rates{2, 5, 10, 20, 40};
  double pump_rate = 20.0;
  double rabi = 10.0;
  double detuning = 0.0;
  std::vector<double> taus = linspace(0.0, 2.0, 201);
  double tau_step = 1e-3;
  double polarization_pump = 20.0;
  double polarization_duration = 2.0;
  double readout_pump = 20.0;
  double readout_duration = 0.3;
  std::uint64_t shots = 0;
  std::vector<double> powers = linspace(0.0, 2000.0, 41);
  double collection_scale = 1.0;
  double background_slope = 0.0;
  std::vector<double> detunings = linspace(-150.0, 150.0, 121);
  std::vector<double> frequencies;  // non-empty: frequency mode, detunings unused
  double b_field = 0.0;
  std::vector<double> contrast_powers;
  std::uint64_t sets = 5;
  std::vector<double> times{0.1, 0.7, 3.0};
  std::uint64_t phase_points = 256;
  bool operator==(const ExperimentConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  RateSet model{};
  InitialKind initial = InitialKind::thermal;
  std::vector<DriveSegment> drive;
  SimulationConfig simulation{};
  ExperimentConfig experiment{};
  OutputConfig output{};
  bool operator==(const RunConfig&) const = default;
};

inline const std::vector<std::string>& experiment_types() {
  static const std::vector<std::string> types{"pes",   "chernoff-map", "rabi", "g2",
                                              "mandel", "saturation",   "odmr", "validate"};
  return types;
}

inline std::string_view to_string(InitialKind k) {
  switch (k) {
    case InitialKind::thermal: return "thermal";
    case InitialKind::ket0: return "ket0";
    case InitialKind::ket1: return "ket1";
    case InitialKind::ketm1: return "ketm1";
    case InitialKind::custom: return "custom";
  }
  return "thermal";
}

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

enum class Check { any, nonnegative, positive };

struct Scalar {
  std::string_view unit;
  Check check = Check::any;
};

inline double parse_number(std::string_view text, std::string_view key, const Scalar& spec, int line) {
  text = trim(text);
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr == text.data())
    throw ConfigError(line, "'" + std::string(text) + "' is not a number for " + std::string(key));
  const auto suffix = trim(std::string_view(r.ptr, text.data() + text.size() - r.ptr));
  if (!suffix.empty() && suffix != spec.unit) {
    const std::string expected = spec.unit.empty() ? "no unit" : std::string(spec.unit);
    throw ConfigError(line, "unit mismatch for " + std::string(key) + ": expected " + expected +
                                ", got " + std::string(suffix));
  }
  if (!std::isfinite(v)) throw ConfigError(line, std::string(key) + " must be finite");
  if (spec.check == Check::nonnegative && v < 0.0)
    throw ConfigError(line, std::string(key) + " must be >= 0");
  if (spec.check == Check::positive && !(v > 0.0))
    throw ConfigError(line, std::string(key) + " must be > 0");
  return v;
}

inline std::uint64_t parse_integer(std::string_view text, std::string_view key, int line,
                                   std::uint64_t minimum = 0) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw ConfigError(line, "'" + std::string(text) + "' is not a non-negative integer for " +
                                std::string(key));
  if (v < minimum)
    throw ConfigError(line, std::string(key) + " must be >= " + std::to_string(minimum));
  return v;
}

inline std::vector<double> parse_list(std::string_view text, std::string_view key,
                                      const Scalar& spec, int line) {
  text = trim(text);
  std::vector<double> out;
  if (text.starts_with("linspace(")) {
    if (!text.ends_with(")")) throw ConfigError(line, "unterminated linspace for " + std::string(key));
    const auto args = split(text.substr(9, text.size() - 10), ',');
    if (args.size() != 3) throw ConfigError(line, "linspace needs (start, stop, count)");
    const double a = parse_number(args[0], key, spec, line);
    const double b = parse_number(args[1], key, spec, line);
    return linspace(a, b, parse_integer(args[2], key, line, 2));
  }
  if (text.empty()) return out;
  for (auto item : split(text, ',')) out.push_back(parse_number(item, key, spec, line));
  return out;
}

inline std::string with_unit(double v, std::string_view unit) {
  return unit.empty() ? format_double(v) : format_double(v) + " " + std::string(unit);
}

inline std::string list_text(const std::vector<double>& v, std::string_view unit) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += with_unit(v[i], unit);
  }
  return out;
}

// One key of a section: how to parse it into a RunConfig and how to print it.
struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, std::string_view, int)> parse;
  std::function<std::string(const RunConfig&)> emit;
  std::set<std::string> types;  // experiment types the key applies to; empty = all
};

template <class Get>
Field number_field(std::string section, std::string key, Scalar spec, Get get,
                   std::set<std::string> types = {}) {
  Field f;
  f.section = section;
  f.key = key;
  f.types = std::move(types);
  f.parse = [key, spec, get](RunConfig& c, std::string_view v, int line) {
    get(c) = parse_number(v, key, spec, line);
  };
  f.emit = [spec, get](const RunConfig& c) {
    return with_unit(get(c), spec.unit);
  };
  return f;
}

template <class Get>
Field list_field(std::string section, std::string key, Scalar spec, Get get,
                 std::set<std::string> types = {}) {
  Field f;
  f.section = section;
  f.key = key;
  f.types = std::move(types);
  f.parse = [key, spec, get](RunConfig& c, std::string_view v, int line) {
    get(c) = parse_list(v, key, spec, line);
  };
  f.emit = [spec, get](const RunConfig& c) { return list_text(get(c), spec.unit); };
  return f;
}

template <class Get>
Field integer_field(std::string section, std::string key, std::uint64_t minimum, Get get,
                    std::set<std::string> types = {}) {
  Field f;
  f.section = section;
  f.key = key;
  f.types = std::move(types);
  f.parse = [key, minimum, get](RunConfig& c, std::string_view v, int line) {
    get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(parse_integer(v, key, line, minimum));
  };
  f.emit = [get](const RunConfig& c) { return std::to_string(get(c)); };
  return f;
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    const Scalar rate{"MHz", Check::nonnegative};
    const Scalar signed_rate{"MHz", Check::any};
    const Scalar time{"us", Check::positive};
    const Scalar time_nonneg{"us", Check::nonnegative};
    const Scalar power{"uW", Check::nonnegative};
    const Scalar plain_nonneg{"", Check::nonnegative};
    const Scalar positive_tol{"", Check::positive};
    std::vector<Field> t;

    t.push_back(number_field("model", "gamma0", rate, [](auto& c) -> auto& { return c.model.gamma0; }));
    t.push_back(number_field("model", "gamma_f0", rate, [](auto& c) -> auto& { return c.model.gamma_f0; }));
    t.push_back(number_field("model", "gamma_f1", rate, [](auto& c) -> auto& { return c.model.gamma_f1; }));
    t.push_back(number_field("model", "gamma_s0", rate, [](auto& c) -> auto& { return c.model.gamma_s0; }));
    t.push_back(number_field("model", "gamma_s1", rate, [](auto& c) -> auto& { return c.model.gamma_s1; }));
    t.push_back(number_field("model", "gamma1", rate, [](auto& c) -> auto& { return c.model.gamma1; }));
    t.push_back(number_field("model", "gamma2", rate, [](auto& c) -> auto& { return c.model.gamma2; }));
    t.push_back(number_field("model", "c_laser", {"MHz/uW", Check::positive},
                             [](auto& c) -> auto& { return c.model.c_laser; }));
    t.push_back(number_field("model", "zfs", signed_rate, [](auto& c) -> auto& { return c.model.zfs; }));
    t.push_back(number_field("model", "gyro", {"MHz/mT", Check::any},
                             [](auto& c) -> auto& { return c.model.gyro; }));

    t.push_back(integer_field("simulation", "grid_points", 2,
                              [](auto& c) -> auto& { return c.simulation.grid_points; }));
    t.push_back(number_field("simulation", "rel_tol", positive_tol,
                             [](auto& c) -> auto& { return c.simulation.rel_tol; }));
    t.push_back(number_field("simulation", "abs_tol", positive_tol,
                             [](auto& c) -> auto& { return c.simulation.abs_tol; }));
    t.push_back(number_field("simulation", "tail_tol", positive_tol,
                             [](auto& c) -> auto& { return c.simulation.tail_tol; }));
    t.push_back(integer_field("simulation", "max_cutoff", 1,
                              [](auto& c) -> auto& { return c.simulation.max_cutoff; }));

    using E = std::set<std::string>;
    t.push_back(number_field("experiment", "horizon", time, [](auto& c) -> auto& { return c.experiment.horizon; },
                             E{"chernoff-map", "g2", "mandel"}));
    t.push_back(list_field("experiment", "pump_rates", rate,
                           [](auto& c) -> auto& { return c.experiment.pump_rates; },
                           E{"chernoff-map", "mandel"}));
    t.push_back(number_field("experiment", "pump_rate", rate,
                             [](auto& c) -> auto& { return c.experiment.pump_rate; }, E{"g2", "odmr"}));
    t.push_back(number_field("experiment", "rabi", signed_rate,
                             [](auto& c) -> auto& { return c.experiment.rabi; },
                             E{"chernoff-map", "rabi", "g2", "odmr"}));
    t.push_back(number_field("experiment", "detuning", signed_rate,
                             [](auto& c) -> auto& { return c.experiment.detuning; },
                             E{"chernoff-map", "rabi", "g2"}));
    t.push_back(list_field("experiment", "taus", time_nonneg,
                           [](auto& c) -> auto& { return c.experiment.taus; }, E{"rabi"}));
    t.push_back(number_field("experiment", "tau_step", time,
                             [](auto& c) -> auto& { return c.experiment.tau_step; }, E{"g2"}));
    t.push_back(number_field("experiment", "polarization_pump", rate,
                             [](auto& c) -> auto& { return c.experiment.polarization_pump; }, E{"rabi"}));
    t.push_back(number_field("experiment", "polarization_duration", time,
                             [](auto& c) -> auto& { return c.experiment.polarization_duration; }, E{"rabi"}));
    t.push_back(number_field("experiment", "readout_pump", rate,
                             [](auto& c) -> auto& { return c.experiment.readout_pump; }, E{"rabi"}));
    t.push_back(number_field("experiment", "readout_duration", time,
                             [](auto& c) -> auto& { return c.experiment.readout_duration; }, E{"rabi"}));
    t.push_back(integer_field("experiment", "shots", 0,
                              [](auto& c) -> auto& { return c.experiment.shots; }, E{"rabi"}));
    t.push_back(list_field("experiment", "powers", power,
                           [](auto& c) -> auto& { return c.experiment.powers; },
                           E{"saturation"}));
    t.push_back(number_field("experiment", "collection_scale", plain_nonneg,
                             [](auto& c) -> auto& { return c.experiment.collection_scale; },
                             E{"saturation"}));
    t.push_back(number_field("experiment", "background_slope", {"", Check::nonnegative},
                             [](auto& c) -> auto& { return c.experiment.background_slope; },
                             E{"saturation"}));
    t.push_back(list_field("experiment", "detunings", signed_rate,
                           [](auto& c) -> auto& { return c.experiment.detunings; },
                           E{"odmr"}));
    t.push_back(list_field("experiment", "frequencies", {"MHz", Check::positive},
                           [](auto& c) -> auto& { return c.experiment.frequencies; },
                           E{"odmr"}));
    t.push_back(number_field("experiment", "b_field", {"mT", Check::nonnegative},
                             [](auto& c) -> auto& { return c.experiment.b_field; }, E{"odmr"}));
    t.push_back(list_field("experiment", "contrast_powers", power,
                           [](auto& c) -> auto& { return c.experiment.contrast_powers; },
                           E{"odmr"}));
    t.push_back(integer_field("experiment", "sets", 1,
                              [](auto& c) -> auto& { return c.experiment.sets; }, E{"validate"}));
    t.push_back(list_field("experiment", "times", time,
                           [](auto& c) -> auto& { return c.experiment.times; },
                           E{"validate"}));
    t.push_back(integer_field("experiment", "phase_points", 2,
                              [](auto& c) -> auto& { return c.experiment.phase_points; },
                              E{"validate"}));

    t.push_back(integer_field("output", "seed", 0, [](auto& c) -> auto& { return c.output.seed; }));
    return t;
  }();
  return table;
}

inline InitialKind parse_initial(std::string_view v, int line) {
  for (auto k : {InitialKind::thermal, InitialKind::ket0, InitialKind::ket1, InitialKind::ketm1})
    if (v == to_string(k)) return k;
  throw ConfigError(line, "initial must be one of thermal, ket0, ket1, ketm1; got '" + std::string(v) + "'");
}

inline DriveSegment parse_segment(std::string_view v, int line) {
  DriveSegment seg{0.0, 0.0, 0.0, 0.0};
  std::set<std::string> seen;
  for (auto part : split(v, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string_view::npos)
      throw ConfigError(line, "segment entries are written as name: value, got '" + std::string(part) + "'");
    const std::string name(trim(part.substr(0, colon)));
    const auto value = part.substr(colon + 1);
    if (!seen.insert(name).second) throw ConfigError(line, "segment repeats '" + name + "'");
    if (name == "duration") seg.duration = parse_number(value, name, {"us", Check::positive}, line);
    else if (name == "pump_rate") seg.pump_rate = parse_number(value, name, {"MHz", Check::nonnegative}, line);
    else if (name == "rabi") seg.rabi = parse_number(value, name, {"MHz", Check::any}, line);
    else if (name == "detuning") seg.detuning = parse_number(value, name, {"MHz", Check::any}, line);
    else throw ConfigError(line, "unknown segment field '" + name + "'");
  }
  if (!seen.contains("duration")) throw ConfigError(line, "segment needs a duration");
  return seg;
}

inline std::string segment_text(const DriveSegment& s) {
  return "duration: " + with_unit(s.duration, "us") + ", pump_rate: " + with_unit(s.pump_rate, "MHz") +
         ", rabi: " + with_unit(s.rabi, "MHz") + ", detuning: " + with_unit(s.detuning, "MHz");
}

inline bool applies(const Field& f, const std::string& type) {
  return f.types.empty() || f.types.contains(type);
}

}  // namespace config_detail

/// Parses a config. `default_type` supplies the experiment type when the
/// [experiment] section does not name one (the CLI command).
inline RunConfig parse_config(std::string_view text, const std::string& default_type = {}) {
  using namespace config_detail;
  RunConfig c;
  std::string section;
  std::set<std::string> sections;
  std::map<std::string, int> seen;  // "section.key" -> line
  int type_line = 0;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const auto raw = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known{"model", "drive", "simulation", "experiment", "output"};
      if (!known.contains(section)) throw ConfigError(line_no, "unknown section [" + section + "]");
      if (!sections.insert(section).second) throw ConfigError(line_no, "section [" + section + "] repeated");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(line_no, "key '" + key + "' outside any section");

    if (section == "drive" && key == "segment") {
      c.drive.push_back(parse_segment(value, line_no));
      continue;
    }
    if (!seen.emplace(section + "." + key, line_no).second)
      throw ConfigError(line_no, "key '" + key + "' repeated in [" + section + "]");

    if (section == "drive" && key == "initial") {
      c.initial = parse_initial(value, line_no);
    } else if (section == "experiment" && key == "type") {
      const auto& types = experiment_types();
      if (std::find(types.begin(), types.end(), value) == types.end())
        throw ConfigError(line_no, "unknown experiment type '" + std::string(value) + "'");
      c.experiment.type = std::string(value);
      type_line = line_no;
    } else if (section == "output" && key == "directory") {
      if (value.empty()) throw ConfigError(line_no, "output directory is empty");
      c.output.directory = std::string(value);
    } else if (section == "output" && key == "format") {
      if (value != "csv" && value != "json" && value != "both")
        throw ConfigError(line_no, "format must be csv, json or both");
      c.output.format = std::string(value);
    } else {
      const auto& table = fields();
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw ConfigError(line_no, "unknown key '" + key + "' in [" + section + "]");
      it->parse(c, value, line_no);
    }
  }

  if (c.experiment.type.empty()) {
    if (default_type.empty()) throw ConfigError(0, "missing section [experiment] with a type");
    const auto& types = experiment_types();
    if (std::find(types.begin(), types.end(), default_type) == types.end())
      throw ConfigError(0, "unknown experiment type '" + default_type + "'");
    c.experiment.type = default_type;
  } else if (!default_type.empty() && default_type != c.experiment.type) {
    throw ConfigError(type_line, "config selects experiment '" + c.experiment.type +
                                     "' but the command is '" + default_type + "'");
  }
  for (const auto& f : fields()) {
    const auto it = seen.find(f.section + "." + f.key);
    if (it != seen.end() && !applies(f, c.experiment.type))
      throw ConfigError(it->second, "key '" + f.key + "' does not apply to experiment '" +
                                        c.experiment.type + "'");
  }
  if (c.experiment.type == "pes" && c.drive.empty())
    throw ConfigError(0, "missing section [drive]: the pes experiment needs at least one segment");
  try {
    c.model.validate();
  } catch (const Error& e) {
    throw ConfigError(0, e.what());
  }
  return c;
}

/// The effective config as text; parse_config(emit_config(c)) == c.
inline std::string emit_config(const RunConfig& c) {
  using namespace config_detail;
  std::string out;
  auto section = [&](const std::string& name) {
    out += (out.empty() ? "[" : "\n[") + name + "]\n";
    for (const auto& f : fields())
      if (f.section == name && applies(f, c.experiment.type))
        out += f.key + " = " + f.emit(c) + "\n";
  };
  section("model");
  out += "\n[drive]\ninitial = " + std::string(to_string(c.initial)) + "\n";
  for (const auto& s : c.drive) out += "segment = " + segment_text(s) + "\n";
  section("simulation");
  out += "\n[experiment]\ntype = " + c.experiment.type + "\n";
  for (const auto& f : fields())
    if (f.section == "experiment" && applies(f, c.experiment.type)) out += f.key + " = " + f.emit(c) + "\n";
  out += "\n[output]\ndirectory = " + c.output.directory + "\nformat = " + c.output.format + "\n";
  for (const auto& f : fields())
    if (f.section == "output") out += f.key + " = " + f.emit(c) + "\n";
  return out;
}

}  // namespace nvpes
