#pragma once

// Independent cross-checks of the photon-resolved hierarchy.
//
// counting_field_pmf() uses the full-counting-statistics construction: the
// photon-number-blind 9x9 generator is "tilted" by multiplying every
// radiative feed term by e^{iχ}, propagated exactly with a matrix
// exponential per constant segment, and P(n, t) is recovered by a discrete
// Fourier inversion over χ. steady_state() solves the untilted generator's
// null space directly.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <vector>

#include "nvpes/error.hpp"
#include "nvpes/evolve.hpp"
#include "nvpes/log.hpp"
#include "nvpes/model.hpp"
#include "nvpes/state.hpp"

namespace nvpes {

using Generator = Eigen::Matrix<std::complex<double>, 9, 9>;
using Vector9c = Eigen::Matrix<std::complex<double>, 9, 1>;

/// Photon-number-blind generator acting on (p0, p1, pm1, Re c, Im c, pe0,
/// pe1, pem1, ps), with the three radiative feed terms weighted by `tilt`.
inline Generator tilted_generator(const DriveSegment& seg, const RateSet& r,
                                  std::complex<double> tilt) {
  Generator L = Generator::Zero();
  enum { P0, P1, PM, CR, CI, E0, E1, EM, S };
  const double om = seg.rabi, det = seg.detuning, pump = seg.pump_rate;
  const double g1 = r.gamma1;

  L(P0, CI) += om;
  L(P1, CI) -= om;
  L(P0, P0) += -g1 - pump;
  L(P0, P1) += g1 / 2;
  L(P0, PM) += g1 / 2;
  L(P1, P0) += g1 / 2;
  L(P1, P1) += -g1 / 2 - pump;
  L(PM, P0) += g1 / 2;
  L(PM, PM) += -g1 / 2 - pump;

  L(P0, E0) += r.gamma0 * tilt;
  L(P1, E1) += r.gamma0 * tilt;
  L(PM, EM) += r.gamma0 * tilt;
  L(P0, S) += r.gamma_s0;
  L(P1, S) += r.gamma_s1;
  L(PM, S) += r.gamma_s1;

  const double decay = g1 / 2 + r.gamma2 / 2 + pump;
  L(CR, CR) -= decay;
  L(CR, CI) -= det;
  L(CI, CI) -= decay;
  L(CI, CR) += det;
  L(CI, P1) += om / 2;
  L(CI, P0) -= om / 2;

  L(E0, P0) += pump;
  L(E0, E0) -= r.gamma0 + r.gamma_f0;
  L(E1, P1) += pump;
  L(E1, E1) -= r.gamma0 + r.gamma_f1;
  L(EM, PM) += pump;
  L(EM, EM) -= r.gamma0 + r.gamma_f1;

  L(S, E0) += r.gamma_f0;
  L(S, E1) += r.gamma_f1;
  L(S, EM) += r.gamma_f1;
  L(S, S) -= r.gamma_s0 + 2 * r.gamma_s1;
  return L;
}

inline Vector9c to_vector(const StateBlock& b) {
  const auto a = b.to_array();
  Vector9c v;
  for (int k = 0; k < 9; ++k) v(k) = a[k];
  return v;
}

inline std::complex<double> trace_of(const Vector9c& v) {
  return v(0) + v(1) + v(2) + v(5) + v(6) + v(7) + v(8);
}

struct TiltedEvaluation {
  std::vector<double> chi;
  std::vector<std::complex<double>> characteristic;  // G(χ, t)
  std::vector<double> pmf;                            // P(n, t), n < M
  double max_imaginary = 0.0;                         // imaginary residue of the inversion
};

/// Characteristic function G(χ, t) = Tr e^{L_χ t} ρ₀ and its inverse
/// transform, for a schedule evaluated at time t (t ≤ total duration).
inline TiltedEvaluation counting_field_evaluation(const StateBlock& initial,
                                                  const DriveSchedule& schedule,
                                                  const RateSet& rates, double t,
                                                  std::size_t phase_points = 256) {
  rates.validate();
  schedule.validate();
  if (phase_points < 2 || (phase_points & (phase_points - 1)) != 0)
    fail(ErrorKind::invalid_argument, "phase point count must be a power of two");
  if (!(t >= 0.0) || t > schedule.total_duration() * (1 + 1e-12))
    fail(ErrorKind::grid, "evaluation time lies outside the schedule");

  const std::size_t M = phase_points;
  TiltedEvaluation out;
  out.chi.resize(M);
  out.characteristic.resize(M);
  const Vector9c rho0 = to_vector(initial);
  for (std::size_t k = 0; k < M; ++k) {
    const double chi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(M);
    out.chi[k] = chi;
    const std::complex<double> tilt = std::polar(1.0, chi);
    Vector9c v = rho0;
    double elapsed = 0.0;
    for (const auto& seg : schedule.segments()) {
      const double dt = std::min(seg.duration, t - elapsed);
      if (dt <= 0.0) break;
      const Generator L = tilted_generator(seg, rates, tilt);
      const Generator prop = (L * dt).exp();
      v = prop * v;
      elapsed += seg.duration;
    }
    out.characteristic[k] = trace_of(v);
  }

  out.pmf.resize(M);
  for (std::size_t n = 0; n < M; ++n) {
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < M; ++k)
      acc += std::polar(1.0, -static_cast<double>((n * k) % M) * 2.0 * std::numbers::pi /
                                  static_cast<double>(M)) *
             out.characteristic[k];
    acc /= static_cast<double>(M);
    out.pmf[n] = acc.real();
    out.max_imaginary = std::max(out.max_imaginary, std::abs(acc.imag()));
  }
  return out;
}

inline constexpr double aliasing_limit = 1e-10;

/// P(n, t) for n < M from the counting-field transform.
inline std::vector<double> counting_field_pmf(const StateBlock& initial,
                                              const DriveSchedule& schedule, const RateSet& rates,
                                              double t, std::size_t phase_points = 256) {
  auto eval = counting_field_evaluation(initial, schedule, rates, t, phase_points);
  if (std::abs(eval.pmf.back()) > aliasing_limit) {
    std::ostringstream msg;
    msg << "counting-field transform is aliased (P(M-1) = " << eval.pmf.back()
        << "); increase the number of phase points above " << phase_points;
    fail(ErrorKind::aliasing, msg.str());
  }
  return std::move(eval.pmf);
}

struct SteadyState {
  StateBlock state;
  double residual = 0.0;      // max-norm of L·ρ
  bool from_evolution = false;
};

inline double emission_rate(const StateBlock& b, const RateSet& r) { return r.gamma0 * b.excited(); }

/// Stationary photon-number-blind state under constant drive. A generator
/// with a degenerate null space (several stationary states) falls back to
/// long-time evolution from `start`.
inline SteadyState steady_state(const RateSet& rates, const DriveSegment& drive,
                                const StateBlock& start = StateBlock{1.0 / 3, 1.0 / 3, 1.0 / 3}) {
  rates.validate();
  const Eigen::Matrix<double, 9, 9> L = tilted_generator(drive, rates, 1.0).real();
  Eigen::Matrix<double, 9, 9> A = L;
  // Replace the singlet row with the trace constraint.
  A.row(8) << 1, 1, 1, 0, 0, 1, 1, 1, 1;
  Eigen::Matrix<double, 9, 1> rhs = Eigen::Matrix<double, 9, 1>::Zero();
  rhs(8) = 1.0;
  Eigen::FullPivLU<Eigen::Matrix<double, 9, 9>> lu(A);
  lu.setThreshold(1e-13);

  SteadyState out;
  if (lu.isInvertible()) {
    const Eigen::Matrix<double, 9, 1> x = lu.solve(rhs);
    out.residual = (L * x).cwiseAbs().maxCoeff();
    std::array<double, 9> a{};
    for (int k = 0; k < 9; ++k) a[k] = x(k);
    out.state = StateBlock::from_span(a);
    if (out.residual < 1e-12) return out;
  }

  warn("steady-state generator is degenerate; falling back to long-time evolution");
  out.from_evolution = true;
  // Exact propagation over doubling horizons until the state stops moving.
  const Eigen::Matrix<double, 9, 9> Lc = L;
  const auto a0 = start.to_array();
  Eigen::Matrix<double, 9, 1> x0;
  for (int k = 0; k < 9; ++k) x0(k) = a0[k];
  Eigen::Matrix<double, 9, 1> prev = x0, x = x0;
  for (double horizon = 100.0; horizon < 1e9; horizon *= 2.0) {
    x = (Lc * horizon).exp() * x0;
    const double change = (x - prev).cwiseAbs().maxCoeff();
    prev = x;
    if (change < 1e-13) break;
  }
  out.residual = (Lc * x).cwiseAbs().maxCoeff();
  std::array<double, 9> s{};
  for (int k = 0; k < 9; ++k) s[k] = x(k);
  out.state = StateBlock::from_span(s);
  return out;
}

}  // namespace nvpes
