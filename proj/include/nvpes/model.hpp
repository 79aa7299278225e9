#pragma once

// Physical parameters and piecewise-constant drive controls of the
// seven-level NV model. Times are in µs, rates in 1/µs (MHz), and the
// microwave quantities (Rabi frequency, detuning, zero-field splitting)
// are angular frequencies in rad/µs.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "nvpes/error.hpp"

namespace nvpes {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct RateSet {
  double gamma0 = 63.0;     // radiative decay e_i -> i
  double gamma_f0 = 12.0;   // e0 -> s
  double gamma_f1 = 80.0;   // ±e1 -> s
  double gamma_s0 = 3.3;    // s -> 0
  double gamma_s1 = 2.4;    // s -> +1 and s -> -1, each
  double gamma1 = 1.0e-3;   // 1/T1
  double gamma2 = 0.1;      // 1/T2
  double c_laser = 0.1;     // MHz per µW
  double zfs = two_pi * 2.87e3;
  double gyro = two_pi * 28.024;  // per mT

  bool operator==(const RateSet&) const = default;

  void validate() const {
    const std::pair<const char*, double> rates[] = {
        {"gamma0", gamma0},     {"gamma_f0", gamma_f0}, {"gamma_f1", gamma_f1},
        {"gamma_s0", gamma_s0}, {"gamma_s1", gamma_s1}, {"gamma1", gamma1},
        {"gamma2", gamma2}};
    for (const auto& [name, value] : rates) {
      if (!std::isfinite(value) || value < 0.0)
        fail(ErrorKind::invalid_argument, std::string(name) + " must be a finite rate >= 0");
    }
    if (!std::isfinite(c_laser) || c_laser <= 0.0)
      fail(ErrorKind::invalid_argument, "c_laser must be > 0");
    if (!std::isfinite(zfs) || !std::isfinite(gyro))
      fail(ErrorKind::invalid_argument, "zfs and gyro must be finite");
  }
};

/// A constant-control interval. `pump_rate` is the optical excitation rate
/// Γ_P; use from_laser_power() to start from a laser power in µW.
struct DriveSegment {
  double duration = 1.0;
  double pump_rate = 0.0;
  double rabi = 0.0;
  double detuning = 0.0;

  bool operator==(const DriveSegment&) const = default;

  static DriveSegment from_laser_power(double duration, double power_uw, const RateSet& rates,
                                       double rabi = 0.0, double detuning = 0.0) {
    return {duration, rates.c_laser * power_uw, rabi, detuning};
  }

  void validate() const {
    if (!(duration > 0.0) || !std::isfinite(duration))
      fail(ErrorKind::invalid_argument, "segment duration must be > 0");
    if (!(pump_rate >= 0.0) || !std::isfinite(pump_rate))
      fail(ErrorKind::invalid_argument, "segment pump_rate must be >= 0");
    if (!std::isfinite(rabi) || !std::isfinite(detuning))
      fail(ErrorKind::invalid_argument, "segment rabi/detuning must be finite");
  }
};

class DriveSchedule {
 public:
  DriveSchedule() = default;
  explicit DriveSchedule(std::vector<DriveSegment> segments) : segments_(std::move(segments)) {
    validate();
  }

  static DriveSchedule constant(const DriveSegment& segment) { return DriveSchedule({segment}); }

  const std::vector<DriveSegment>& segments() const noexcept { return segments_; }

  double total_duration() const noexcept {
    double total = 0.0;
    for (const auto& s : segments_) total += s.duration;
    return total;
  }

  /// Start time of each segment, plus the end time as the last entry.
  std::vector<double> boundaries() const {
    std::vector<double> out{0.0};
    for (const auto& s : segments_) out.push_back(out.back() + s.duration);
    return out;
  }

  void validate() const {
    if (segments_.empty()) fail(ErrorKind::invalid_argument, "drive schedule has no segments");
    for (const auto& s : segments_) s.validate();
  }

  bool operator==(const DriveSchedule&) const = default;

 private:
  std::vector<DriveSegment> segments_;
};

struct ResonancePair {
  double upper;  // D + γ_e B
  double lower;  // D − γ_e B
};

inline ResonancePair resonance_frequencies(double b_field_mt, const RateSet& rates) {
  if (!(b_field_mt >= 0.0)) fail(ErrorKind::invalid_argument, "b_field must be >= 0");
  const double zeeman = rates.gyro * b_field_mt;
  return {rates.zfs + zeeman, rates.zfs - zeeman};
}

}  // namespace nvpes
