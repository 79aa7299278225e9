#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "nvpes/error.hpp"

namespace nvpes {

/// Offsets of the nine real components of one photon-number block in the
/// flat state vector. The 0/+1 coherence is stored as real and imaginary part.
namespace slot {
inline constexpr std::size_t p0 = 0;
inline constexpr std::size_t p1 = 1;
inline constexpr std::size_t pm1 = 2;
inline constexpr std::size_t coh_re = 3;
inline constexpr std::size_t coh_im = 4;
inline constexpr std::size_t pe0 = 5;
inline constexpr std::size_t pe1 = 6;
inline constexpr std::size_t pem1 = 7;
inline constexpr std::size_t ps = 8;
inline constexpr std::size_t count = 9;
}  // namespace slot

inline constexpr double population_slack = 1e-10;

struct StateBlock {
  double p0 = 0.0;
  double p1 = 0.0;
  double pm1 = 0.0;
  std::complex<double> coh01{};
  double pe0 = 0.0;
  double pe1 = 0.0;
  double pem1 = 0.0;
  double ps = 0.0;

  bool operator==(const StateBlock&) const = default;

  double trace() const noexcept { return p0 + p1 + pm1 + pe0 + pe1 + pem1 + ps; }
  double excited() const noexcept { return pe0 + pe1 + pem1; }

  std::array<double, slot::count> to_array() const noexcept {
    return {p0, p1, pm1, coh01.real(), coh01.imag(), pe0, pe1, pem1, ps};
  }

  static StateBlock from_span(std::span<const double> v) {
    return {v[slot::p0],  v[slot::p1],  v[slot::pm1],  {v[slot::coh_re], v[slot::coh_im]},
            v[slot::pe0], v[slot::pe1], v[slot::pem1], v[slot::ps]};
  }

  void write_to(std::span<double> v) const {
    const auto a = to_array();
    std::copy(a.begin(), a.end(), v.begin());
  }

  bool is_physical(double slack = population_slack) const noexcept {
    for (double p : {p0, p1, pm1, pe0, pe1, pem1, ps})
      if (!(p >= -slack)) return false;
    return std::norm(coh01) <= p0 * p1 + slack;
  }
};

/// Density-matrix blocks ρ(n, t) for n = 0..n_max, stored contiguously by n.
/// `leakage` is the probability that has flowed past the top block.
class PhotonResolvedState {
 public:
  PhotonResolvedState() = default;
  PhotonResolvedState(std::size_t n_max, double time)
      : data_((n_max + 1) * slot::count, 0.0), time_(time) {}

  std::size_t n_max() const noexcept { return data_.size() / slot::count - 1; }
  std::size_t block_count() const noexcept { return data_.size() / slot::count; }
  double time() const noexcept { return time_; }
  void set_time(double t) noexcept { time_ = t; }
  double leakage() const noexcept { return leakage_; }
  void set_leakage(double l) noexcept { leakage_ = l; }

  StateBlock block(std::size_t n) const { return StateBlock::from_span(block_span(n)); }
  void set_block(std::size_t n, const StateBlock& b) { b.write_to(block_span(n)); }

  std::span<const double> block_span(std::size_t n) const {
    return std::span<const double>(data_).subspan(n * slot::count, slot::count);
  }
  std::span<double> block_span(std::size_t n) {
    return std::span<double>(data_).subspan(n * slot::count, slot::count);
  }

  std::span<const double> flat() const noexcept { return data_; }
  std::span<double> flat() noexcept { return data_; }

  double block_trace(std::size_t n) const {
    const auto b = block_span(n);
    return b[slot::p0] + b[slot::p1] + b[slot::pm1] + b[slot::pe0] + b[slot::pe1] + b[slot::pem1] +
           b[slot::ps];
  }

  double total_trace() const {
    double sum = 0.0;
    for (std::size_t n = 0; n < block_count(); ++n) sum += block_trace(n);
    return sum;
  }

  /// Σₙ ρ(n): the photon-number-blind density matrix.
  StateBlock summed() const {
    std::array<double, slot::count> acc{};
    for (std::size_t n = 0; n < block_count(); ++n) {
      const auto b = block_span(n);
      for (std::size_t k = 0; k < slot::count; ++k) acc[k] += b[k];
    }
    return StateBlock::from_span(acc);
  }

  void resize(std::size_t n_max) { data_.resize((n_max + 1) * slot::count, 0.0); }

 private:
  std::vector<double> data_;
  double time_ = 0.0;
  double leakage_ = 0.0;
};

enum class InitialKind { thermal, ket0, ket1, ketm1, custom };

inline PhotonResolvedState initial_state(InitialKind kind, std::size_t n_max,
                                         const StateBlock& custom = {}) {
  if (n_max < 1) fail(ErrorKind::invalid_argument, "n_max must be >= 1");
  StateBlock b;
  switch (kind) {
    case InitialKind::thermal: b.p0 = b.p1 = b.pm1 = 1.0 / 3.0; break;
    case InitialKind::ket0: b.p0 = 1.0; break;
    case InitialKind::ket1: b.p1 = 1.0; break;
    case InitialKind::ketm1: b.pm1 = 1.0; break;
    case InitialKind::custom:
      if (std::abs(custom.trace() - 1.0) > 1e-12)
        fail(ErrorKind::invalid_state, "custom initial block must have unit trace");
      if (!custom.is_physical())
        fail(ErrorKind::invalid_state, "custom initial block is not a valid density matrix");
      b = custom;
      break;
  }
  PhotonResolvedState s(n_max, 0.0);
  s.set_block(0, b);
  return s;
}

/// Moves all probability into block 0, restarting the photon count while
/// keeping the internal state. Leakage is folded in as lost probability.
inline PhotonResolvedState reset_photon_count(const PhotonResolvedState& s, std::size_t n_max) {
  PhotonResolvedState out(n_max, s.time());
  out.set_block(0, s.summed());
  out.set_leakage(s.leakage());
  return out;
}

}  // namespace nvpes
