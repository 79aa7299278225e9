#pragma once

// Least-squares fit of an inverted Lorentzian line
//   y(x) = baseline − depth · w² / ((x − x₀)² + w²).
// Baseline and depth enter linearly and are eliminated for each trial
// (x₀, w); the remaining two parameters are refined with GSL's Nelder–Mead
// simplex starting from the best point of a coarse grid.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "nvpes/error.hpp"

namespace nvpes {

struct LorentzFit {
  double center = 0.0;
  double width = 0.0;  // half width at half depth
  double depth = 0.0;
  double baseline = 0.0;
  double residual = 0.0;  // RMS of the fit residuals
};

namespace detail {

struct LinearPart {
  double baseline = 0.0;
  double depth = 0.0;
  double ssr = std::numeric_limits<double>::infinity();
  bool ok = false;
};

inline LinearPart solve_linear_part(std::span<const double> x, std::span<const double> y,
                                    double center, double width) {
  // Normal equations for y ≈ b·1 − d·L(x).
  double s11 = 0, s12 = 0, s22 = 0, t1 = 0, t2 = 0;
  const double w2 = width * width;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - center;
    const double l = w2 / (dx * dx + w2);
    s11 += 1.0;
    s12 += l;
    s22 += l * l;
    t1 += y[i];
    t2 += y[i] * l;
  }
  const double det = s11 * s22 - s12 * s12;
  LinearPart out;
  if (!(std::abs(det) > 1e-14 * s11 * s22)) return out;
  out.baseline = (s22 * t1 - s12 * t2) / det;
  const double slope = (s11 * t2 - s12 * t1) / det;  // coefficient of +L
  out.depth = -slope;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - center;
    const double r = y[i] - (out.baseline - out.depth * w2 / (dx * dx + w2));
    ssr += r * r;
  }
  out.ssr = ssr;
  out.ok = true;
  return out;
}

struct FitData {
  std::span<const double> x, y;
};

inline double objective(const gsl_vector* p, void* params) {
  const auto* d = static_cast<const FitData*>(params);
  const auto lp = solve_linear_part(d->x, d->y, gsl_vector_get(p, 0), std::exp(gsl_vector_get(p, 1)));
  return lp.ok ? lp.ssr : std::numeric_limits<double>::max();
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* s) const { gsl_multimin_fminimizer_free(s); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

inline void silence_gsl() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

}  // namespace detail

inline LorentzFit lorentzian_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::shape, "x and y differ in length");
  if (x.size() < 5) fail(ErrorKind::fit_failure, "Lorentzian fit needs at least 5 points");
  double lo = x[0], hi = x[0];
  for (double v : x) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  if (!(span > 0.0)) fail(ErrorKind::fit_failure, "x values are all equal");

  // Coarse grid: every sample as a centre candidate, log-spaced widths.
  double best_c = x[0], best_w = span, best_ssr = std::numeric_limits<double>::infinity();
  for (double c : x) {
    for (int k = 0; k <= 40; ++k) {
      const double w = span * std::pow(10.0, -3.0 + 3.5 * k / 40.0);
      const auto lp = detail::solve_linear_part(x, y, c, w);
      if (lp.ok && lp.ssr < best_ssr) {
        best_ssr = lp.ssr;
        best_c = c;
        best_w = w;
      }
    }
  }
  if (!std::isfinite(best_ssr)) fail(ErrorKind::fit_failure, "Lorentzian fit is singular");

  detail::silence_gsl();
  detail::FitData data{x, y};
  gsl_multimin_function fn{&detail::objective, 2, &data};
  std::unique_ptr<gsl_vector, detail::VectorDeleter> start(gsl_vector_alloc(2)), step(gsl_vector_alloc(2));
  std::unique_ptr<gsl_multimin_fminimizer, detail::MinimizerDeleter> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2));

  // Restart the simplex a few times: Nelder–Mead can stall on a degenerate simplex.
  double c = best_c, lw = std::log(best_w);
  for (int restart = 0; restart < 4; ++restart) {
    gsl_vector_set(start.get(), 0, c);
    gsl_vector_set(start.get(), 1, lw);
    gsl_vector_set(step.get(), 0, 0.05 * std::exp(lw));
    gsl_vector_set(step.get(), 1, 0.1);
    gsl_multimin_fminimizer_set(s.get(), &fn, start.get(), step.get());
    for (int iter = 0; iter < 5000; ++iter) {
      if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), 1e-13) == GSL_SUCCESS) break;
    }
    c = gsl_vector_get(s->x, 0);
    lw = gsl_vector_get(s->x, 1);
  }

  const double width = std::exp(lw);
  const auto lp = detail::solve_linear_part(x, y, c, width);
  if (!lp.ok || !std::isfinite(c) || !std::isfinite(width))
    fail(ErrorKind::fit_failure, "Lorentzian fit diverged");
  return {c, width, lp.depth, lp.baseline, std::sqrt(lp.ssr / static_cast<double>(x.size()))};
}

}  // namespace nvpes
