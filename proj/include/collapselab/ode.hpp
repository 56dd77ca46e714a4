#ifndef COLLAPSELAB_ODE_HPP
#define COLLAPSELAB_ODE_HPP

// Adaptive embedded Runge-Kutta pair (Dormand-Prince 5(4)) with PI step
// control. State lives in fixed-capacity stack storage; right-hand sides are
// callables f(t, y, dy).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <functional>

#include "collapselab/errors.hpp"

namespace collapselab {

constexpr int kMaxState = 72;

struct OdeState {
  int n = 0;
  std::array<double, kMaxState> y{};
  double& operator[](int i) { return y[i]; }
  double operator[](int i) const { return y[i]; }
};

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  double initial_step = 0.0;  // 0 -> heuristic
  double max_step = 0.0;      // 0 -> span
  long max_steps = 400000;
};

// Dormand-Prince coefficients.
namespace dopri5 {
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
}  // namespace dopri5

// Integrates y' = f(t,y) from t0 to t1. `observer`, when provided, is called
// after every accepted step with (t, y); it may return false to stop early.
// Returns the final state.
template <typename Rhs, typename Observer>
OdeState integrate_adaptive(Rhs&& f, OdeState y, double t0, double t1, const OdeOptions& opt,
                            Observer&& observer) {
  using namespace dopri5;
  const int n = y.n;
  const double span = t1 - t0;
  if (span == 0.0) return y;
  const double dir = span > 0 ? 1.0 : -1.0;
  double hmax = opt.max_step > 0 ? opt.max_step : std::fabs(span);

  OdeState k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, ytmp{}, ynew{};
  k1.n = k2.n = k3.n = k4.n = k5.n = k6.n = k7.n = ytmp.n = ynew.n = n;

  f(t0, y, k1);
  double h = opt.initial_step;
  if (h == 0.0) {
    double ynorm = 0, fnorm = 0;
    for (int i = 0; i < n; ++i) {
      ynorm = std::max(ynorm, std::fabs(y[i]));
      fnorm = std::max(fnorm, std::fabs(k1[i]));
    }
    h = (fnorm > 1e-12) ? 0.01 * std::max(ynorm, 1.0) / fnorm : 0.01 * std::fabs(span);
    h = std::min(h, 0.1 * std::fabs(span));
    h = std::max(h, 1e-10 * std::fabs(span));
  }
  h *= dir;

  double t = t0;
  double err_prev = 1.0;
  for (long step = 0; step < opt.max_steps; ++step) {
    if ((t - t1) * dir >= 0.0) return y;
    if ((t + h - t1) * dir > 0.0) h = t1 - t;

    for (int i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    f(t + c2 * h, ytmp, k2);
    for (int i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, ytmp, k3);
    for (int i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, ytmp, k4);
    for (int i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, ytmp, k5);
    for (int i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(t + h, ytmp, k6);
    for (int i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    f(t + h, ynew, k7);

    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      double sc = opt.abs_tol + opt.rel_tol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
      double q = e / sc;
      err += q * q;
    }
    err = std::sqrt(err / n);

    if (err <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;  // FSAL
      if (!observer(t, y)) return y;
      double fac = 0.9 * std::pow(err > 1e-30 ? err : 1e-30, -0.7 / 5.0) *
                   std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 8.0);
      err_prev = err > 1e-30 ? err : 1e-30;
      h *= fac;
      if (std::fabs(h) > hmax) h = hmax * dir;
    } else {
      double fac = std::clamp(0.9 * std::pow(err, -1.0 / 5.0), 0.1, 1.0);
      h *= fac;
      if (std::fabs(h) < 1e-14 * std::fabs(span))
        throw IntegrationError("step size underflow in adaptive integrator");
    }
  }
  throw IntegrationError("adaptive integrator exceeded max step count");
}

template <typename Rhs>
OdeState integrate_adaptive(Rhs&& f, OdeState y, double t0, double t1,
                            const OdeOptions& opt = OdeOptions{}) {
  return integrate_adaptive(std::forward<Rhs>(f), y, t0, t1, opt,
                            [](double, const OdeState&) { return true; });
}

}  // namespace collapselab

#endif
