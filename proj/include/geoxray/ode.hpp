#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "geoxray/errors.hpp"

namespace geoxray {

template <std::size_t N>
using OdeState = std::array<double, N>;

struct OdeTolerance {
  double atol = 1e-10;
  double rtol = 1e-10;
  int max_steps = 200000;
};

/// Adaptive Dormand-Prince 5(4) integration of y' = f(t, y) from t0 to t1
/// (either direction). Returns the state at t1.
template <std::size_t N, class F>
OdeState<N> integrate_dopri5(F&& f, OdeState<N> y, double t0, double t1, OdeTolerance tol = {}) {
  using S = OdeState<N>;
  if (t1 == t0) return y;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double h = std::min(span, 0.05 * std::max(span, 1e-3));
  double t = t0;

  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  auto axpy = [](const S& base, std::initializer_list<std::pair<double, const S*>> terms,
                 double hh) {
    S out = base;
    for (auto [c, k] : terms)
      for (std::size_t i = 0; i < N; ++i) out[i] += hh * c * (*k)[i];
    return out;
  };

  S k1 = f(t, y);
  for (int step = 0; step < tol.max_steps; ++step) {
    const double remaining = std::abs(t1 - t);
    if (remaining <= 1e-15 * std::max(1.0, std::abs(t1))) return y;
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const double hs = dir * h;
    S k2 = f(t + c2 * hs, axpy(y, {{a21, &k1}}, hs));
    S k3 = f(t + c3 * hs, axpy(y, {{a31, &k1}, {a32, &k2}}, hs));
    S k4 = f(t + c4 * hs, axpy(y, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, hs));
    S k5 = f(t + c5 * hs, axpy(y, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, hs));
    S k6 = f(t + hs, axpy(y, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, hs));
    S y5 = axpy(y, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, hs);
    S k7 = f(t + hs, y5);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                              e7 * k7[i]);
      const double sc = tol.atol + tol.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err = std::max(err, std::abs(ei) / sc);
    }
    if (err <= 1.0) {
      t = last ? t1 : t + hs;
      y = y5;
      k1 = k7;
      if (last) return y;
    }
    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
  }
  throw SolverError("dopri5: step budget exhausted");
}

}  // namespace geoxray
