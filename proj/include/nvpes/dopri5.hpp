#pragma once

// Adaptive Dormand-Prince 5(4) stepper with Hairer's fourth-order
// continuous extension. The caller drives the step loop so that it can
// inspect or resize the state between accepted steps; reset() must be called
// after any external change to the state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "nvpes/error.hpp"

namespace nvpes {

struct Tolerance {
  double rel = 1e-8;
  double abs = 1e-10;
  bool operator==(const Tolerance&) const = default;
};

namespace dp5 {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace dp5

/// `Rhs` is callable as rhs(t, std::span<const double> y, std::span<double> dydt).
template <class Rhs>
class Dopri5 {
 public:
  Dopri5(Rhs rhs, Tolerance tol) : rhs_(std::move(rhs)), tol_(tol) {}

  /// (Re)starts integration at (t, y). Keeps the previous step size as a hint
  /// unless `fresh_step` is set.
  void reset(double t, std::span<const double> y, bool fresh_step = true) {
    const std::size_t n = y.size();
    t_ = t;
    y_.assign(y.begin(), y.end());
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &r1_, &r2_, &r3_,
                    &r4_, &r5_})
      v->assign(n, 0.0);
    rhs_(t_, y_, k1_);
    if (fresh_step) h_ = 0.0;
  }

  double time() const noexcept { return t_; }
  double last_step_start() const noexcept { return t_prev_; }
  std::span<const double> state() const noexcept { return y_; }
  std::size_t accepted_steps() const noexcept { return accepted_; }
  std::size_t rejected_steps() const noexcept { return rejected_; }

  /// Takes one accepted step that does not pass `t_end`.
  void step(double t_end) {
    const double span = t_end - t_;
    if (!(span > 0.0)) fail(ErrorKind::invalid_argument, "step target must lie ahead");
    if (h_ <= 0.0) h_ = initial_step(span);
    const double h_floor = 1e-14 * std::max(1.0, std::abs(t_));
    const std::size_t n = y_.size();
    bool rejected_before = false;
    for (;;) {
      double h = std::min(h_, span);
      // Avoid leaving a sliver at the end of the interval.
      if (span - h < 1e-3 * h) h = span;
      if (h < h_floor) {
        std::ostringstream msg;
        msg << "step size underflow at t = " << t_ << " us (stiff or singular dynamics)";
        fail(ErrorKind::stiffness, msg.str());
      }
      using namespace dp5;
      for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y_[i] + h * a21 * k1_[i];
      rhs_(t_ + c2 * h, ytmp_, k2_);
      for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y_[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
      rhs_(t_ + c3 * h, ytmp_, k3_);
      for (std::size_t i = 0; i < n; ++i)
        ytmp_[i] = y_[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
      rhs_(t_ + c4 * h, ytmp_, k4_);
      for (std::size_t i = 0; i < n; ++i)
        ytmp_[i] = y_[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
      rhs_(t_ + c5 * h, ytmp_, k5_);
      for (std::size_t i = 0; i < n; ++i)
        ytmp_[i] = y_[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] +
                                a65 * k5_[i]);
      rhs_(t_ + h, ytmp_, k6_);
      for (std::size_t i = 0; i < n; ++i)
        ynew_[i] = y_[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] +
                                a76 * k6_[i]);
      rhs_(t_ + h, ynew_, k7_);

      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                              e6 * k6_[i] + e7 * k7_[i]);
        const double scale = tol_.abs + tol_.rel * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
        err = std::max(err, std::abs(e) / scale);
      }
      if (!std::isfinite(err)) err = 1e10;

      if (err <= 1.0) {
        for (std::size_t i = 0; i < n; ++i) {
          const double diff = ynew_[i] - y_[i];
          const double bspl = h * k1_[i] - diff;
          r1_[i] = y_[i];
          r2_[i] = diff;
          r3_[i] = bspl;
          r4_[i] = diff - h * k7_[i] - bspl;
          r5_[i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] +
                        d7 * k7_[i]);
        }
        t_prev_ = t_;
        h_prev_ = h;
        t_ = (h == span) ? t_end : t_ + h;
        y_.swap(ynew_);
        k1_.swap(k7_);
        ++accepted_;
        double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        factor = std::clamp(factor, 0.2, rejected_before ? 1.0 : 5.0);
        h_ = h * factor;
        return;
      }
      ++rejected_;
      rejected_before = true;
      h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
  }

  /// Interpolates the state at t in [last_step_start(), time()].
  void dense(double t, std::span<double> out) const {
    const double theta = (t - t_prev_) / h_prev_;
    const double theta1 = 1.0 - theta;
    for (std::size_t i = 0; i < r1_.size(); ++i)
      out[i] = r1_[i] + theta * (r2_[i] + theta1 * (r3_[i] + theta * (r4_[i] + theta1 * r5_[i])));
  }

 private:
  double norm_scaled(std::span<const double> v) const {
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      m = std::max(m, std::abs(v[i]) / (tol_.abs + tol_.rel * std::abs(y_[i])));
    return m;
  }

  double initial_step(double span) {
    const double d0 = norm_scaled(y_);
    const double d1 = norm_scaled(k1_);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    for (std::size_t i = 0; i < y_.size(); ++i) ytmp_[i] = y_[i] + h0 * k1_[i];
    rhs_(t_ + h0, ytmp_, k2_);
    double d2 = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i)
      d2 = std::max(d2, std::abs(k2_[i] - k1_[i]) / (tol_.abs + tol_.rel * std::abs(y_[i])));
    d2 /= h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                 : std::pow(0.01 / std::max(d1, d2), 0.2);
    return std::min({100.0 * h0, h1, span});
  }

  Rhs rhs_;
  Tolerance tol_;
  double t_ = 0.0, t_prev_ = 0.0, h_ = 0.0, h_prev_ = 0.0;
  std::size_t accepted_ = 0, rejected_ = 0;
  std::vector<double> y_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_;
  std::vector<double> r1_, r2_, r3_, r4_, r5_;
};

}  // namespace nvpes
