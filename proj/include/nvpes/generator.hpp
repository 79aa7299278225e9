#pragma once

// Right-hand side of the photon-number-resolved Bloch equations.
//
// Each block n obeys the same linear rate/Bloch system as the full density
// matrix, except that radiative decay e_i -> i moves probability from block
// n to block n+1 instead of staying in block n. The generator is therefore
// lower block-bidiagonal and a single sweep over n evaluates it.

#include <cstddef>
#include <span>

#include "nvpes/model.hpp"
#include "nvpes/state.hpp"

namespace nvpes {

/// Evaluates d/dt of `blocks` (flat layout, slot::count values per block)
/// into `out`, and returns the probability flux out of the top block, i.e.
/// the rate at which leakage grows.
inline double derivative(std::span<const double> blocks, std::span<double> out,
                         const DriveSegment& seg, const RateSet& r) {
  const std::size_t n_blocks = blocks.size() / slot::count;
  const double om = seg.rabi;
  const double det = seg.detuning;
  const double pump = seg.pump_rate;
  const double half_g1 = 0.5 * r.gamma1;
  const double coh_decay = 0.5 * r.gamma1 + 0.5 * r.gamma2 + pump;
  const double out_e0 = r.gamma0 + r.gamma_f0;
  const double out_e1 = r.gamma0 + r.gamma_f1;
  const double out_s = r.gamma_s0 + 2.0 * r.gamma_s1;

  double feed_e0 = 0.0, feed_e1 = 0.0, feed_em1 = 0.0;
  for (std::size_t n = 0; n < n_blocks; ++n) {
    const double* b = blocks.data() + n * slot::count;
    double* d = out.data() + n * slot::count;
    const double p0 = b[slot::p0], p1 = b[slot::p1], pm1 = b[slot::pm1];
    const double cr = b[slot::coh_re], ci = b[slot::coh_im];
    const double pe0 = b[slot::pe0], pe1 = b[slot::pe1], pem1 = b[slot::pem1];
    const double ps = b[slot::ps];

    d[slot::p0] = om * ci - half_g1 * (p0 - p1) - half_g1 * (p0 - pm1) - pump * p0 +
                  r.gamma0 * feed_e0 + r.gamma_s0 * ps;
    d[slot::p1] = -om * ci + half_g1 * (p0 - p1) - pump * p1 + r.gamma0 * feed_e1 +
                  r.gamma_s1 * ps;
    d[slot::pm1] = half_g1 * (p0 - pm1) - pump * pm1 + r.gamma0 * feed_em1 + r.gamma_s1 * ps;
    d[slot::coh_re] = -coh_decay * cr - det * ci;
    d[slot::coh_im] = -coh_decay * ci + det * cr + 0.5 * om * (p1 - p0);
    d[slot::pe0] = pump * p0 - out_e0 * pe0;
    d[slot::pe1] = pump * p1 - out_e1 * pe1;
    d[slot::pem1] = pump * pm1 - out_e1 * pem1;
    d[slot::ps] = r.gamma_f0 * pe0 + r.gamma_f1 * (pe1 + pem1) - out_s * ps;

    feed_e0 = pe0;
    feed_e1 = pe1;
    feed_em1 = pem1;
  }
  return r.gamma0 * (feed_e0 + feed_e1 + feed_em1);
}

inline PhotonResolvedState derivative(const PhotonResolvedState& state, const DriveSegment& seg,
                                      const RateSet& rates) {
  PhotonResolvedState d(state.n_max(), state.time());
  d.set_leakage(derivative(state.flat(), d.flat(), seg, rates));
  return d;
}

/// Same system with the photon index summed out (radiative decay returns to
/// the same block). Used to propagate the internal state without counting.
inline void summed_derivative(std::span<const double> b, std::span<double> d,
                              const DriveSegment& seg, const RateSet& r) {
  derivative(b, d, seg, r);
  d[slot::p0] += r.gamma0 * b[slot::pe0];
  d[slot::p1] += r.gamma0 * b[slot::pe1];
  d[slot::pm1] += r.gamma0 * b[slot::pem1];
}

}  // namespace nvpes
