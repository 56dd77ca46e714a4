#ifndef COLLAPSELAB_DUAL_HPP
#define COLLAPSELAB_DUAL_HPP

// Forward-mode dual numbers with an N-dimensional gradient part. Nesting
// Dual<Dual<double,N>,N> yields exact second derivatives, which is how the
// models hand analytic metric jets to the curvature code.

#include <array>
#include <cmath>
#include <type_traits>
#include <utility>

namespace collapselab {

// make the double overloads visible next to the Dual ones so templated
// model code can call sqrt/sin/cos/... unqualified for any scalar type
using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;

template <typename T, int N>
struct Dual {
  T v{};
  std::array<T, N> d{};

  Dual() = default;
  Dual(T x) : v(std::move(x)) {}  // NOLINT: implicit promotion
  template <typename U = T, typename = std::enable_if_t<!std::is_same_v<U, double>>>
  Dual(double x) : v(x) {}  // NOLINT: promotion from double through nested levels
  static Dual variable(T x, int i) {
    Dual r(x);
    r.d[i] = T(1.0);
    return r;
  }
};

template <typename T, int N>
Dual<T, N> operator+(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r(a.v + b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> operator-(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r(a.v - b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> operator-(const Dual<T, N>& a) {
  Dual<T, N> r(-a.v);
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> operator*(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r(a.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> operator/(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r(a.v / b.v);
  T inv2 = T(1.0) / (b.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv2;
  return r;
}

// mixed double overloads
template <typename T, int N>
Dual<T, N> operator+(double a, const Dual<T, N>& b) { return Dual<T, N>(a) + b; }
template <typename T, int N>
Dual<T, N> operator+(const Dual<T, N>& a, double b) { return a + Dual<T, N>(b); }
template <typename T, int N>
Dual<T, N> operator-(double a, const Dual<T, N>& b) { return Dual<T, N>(a) - b; }
template <typename T, int N>
Dual<T, N> operator-(const Dual<T, N>& a, double b) { return a - Dual<T, N>(b); }
template <typename T, int N>
Dual<T, N> operator*(double a, const Dual<T, N>& b) { return Dual<T, N>(a) * b; }
template <typename T, int N>
Dual<T, N> operator*(const Dual<T, N>& a, double b) { return a * Dual<T, N>(b); }
template <typename T, int N>
Dual<T, N> operator/(double a, const Dual<T, N>& b) { return Dual<T, N>(a) / b; }
template <typename T, int N>
Dual<T, N> operator/(const Dual<T, N>& a, double b) { return a / Dual<T, N>(b); }

// chain rule application for unary functions: f, with derivative df
template <typename T, int N, typename F, typename DF>
Dual<T, N> apply_unary(const Dual<T, N>& x, F f, DF df) {
  Dual<T, N> r(f(x.v));
  T s = df(x.v);
  for (int i = 0; i < N; ++i) r.d[i] = s * x.d[i];
  return r;
}

inline double dsqrt(double x) { return std::sqrt(x); }
inline double dsin(double x) { return std::sin(x); }
inline double dcos(double x) { return std::cos(x); }
inline double dexp(double x) { return std::exp(x); }
inline double dlog(double x) { return std::log(x); }

template <typename T, int N>
Dual<T, N> sqrt(const Dual<T, N>& x) {
  using std::sqrt;
  return apply_unary(x, [](const T& t) { return sqrt(t); },
                     [](const T& t) { return 0.5 / sqrt(t); });
}
template <typename T, int N>
Dual<T, N> sin(const Dual<T, N>& x) {
  using std::cos;
  using std::sin;
  return apply_unary(x, [](const T& t) { return sin(t); }, [](const T& t) { return cos(t); });
}
template <typename T, int N>
Dual<T, N> cos(const Dual<T, N>& x) {
  using std::cos;
  using std::sin;
  return apply_unary(x, [](const T& t) { return cos(t); }, [](const T& t) { return -sin(t); });
}
template <typename T, int N>
Dual<T, N> exp(const Dual<T, N>& x) {
  using std::exp;
  return apply_unary(x, [](const T& t) { return exp(t); }, [](const T& t) { return exp(t); });
}
template <typename T, int N>
Dual<T, N> log(const Dual<T, N>& x) {
  using std::log;
  return apply_unary(x, [](const T& t) { return log(t); }, [](const T& t) { return 1.0 / t; });
}

// value extraction through arbitrary nesting depth
inline double scalar_value(double x) { return x; }
template <typename T, int N>
double scalar_value(const Dual<T, N>& x) { return scalar_value(x.v); }

using Jet1 = Dual<double, 4>;        // value + gradient
using Jet2 = Dual<Dual<double, 4>, 4>;  // value + gradient + hessian

inline Jet2 jet2_variable(double x, int i) {
  Jet2 r;
  r.v = Jet1::variable(x, i);
  r.d[i] = Jet1(1.0);
  return r;
}

}  // namespace collapselab

#endif
