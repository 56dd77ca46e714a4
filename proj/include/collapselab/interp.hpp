#ifndef COLLAPSELAB_INTERP_HPP
#define COLLAPSELAB_INTERP_HPP

// Cubic interpolation helpers: a 1-d natural cubic spline on a uniform grid
// (Taub-NUT profile cache) and a separable Catmull-Rom interpolant on a 4-d
// box grid (lifted-ball map caches).

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "collapselab/errors.hpp"
#include "collapselab/linalg.hpp"

namespace collapselab {

class UniformSpline {
public:
  UniformSpline() = default;
  // natural ends by default; pass end slopes for a clamped spline
  UniformSpline(double x0, double dx, std::vector<double> values)
      : x0_(x0), dx_(dx), y_(std::move(values)) {
    build(false, 0, 0);
  }
  UniformSpline(double x0, double dx, std::vector<double> values, double d_left, double d_right)
      : x0_(x0), dx_(dx), y_(std::move(values)) {
    build(true, d_left, d_right);
  }

  double operator()(double x) const {
    int n = int(y_.size());
    double s = (x - x0_) / dx_;
    int i = int(std::floor(s));
    if (i < 0) i = 0;
    if (i > n - 2) i = n - 2;
    double u = s - i;
    double h = dx_;
    double a = (m_[i + 1] - m_[i]) / (6 * h);
    double b = m_[i] / 2;
    double c = (y_[i + 1] - y_[i]) / h - (m_[i + 1] + 2 * m_[i]) * h / 6;
    double t = u * h;
    return y_[i] + t * (c + t * (b + t * a));
  }

  double x_min() const { return x0_; }
  double x_max() const { return x0_ + dx_ * double(y_.size() - 1); }

private:
  void build(bool clamped, double d_left, double d_right) {
    int n = int(y_.size());
    m_.assign(n, 0.0);
    if (n < 3) return;
    // tridiagonal system for the second derivatives m_i
    std::vector<double> sub(n, 1.0), diag(n, 4.0), sup(n, 1.0), b(n, 0.0);
    for (int i = 1; i + 1 < n; ++i)
      b[i] = 6.0 * (y_[i + 1] - 2 * y_[i] + y_[i - 1]) / (dx_ * dx_);
    if (clamped) {
      diag[0] = 2.0;
      sup[0] = 1.0;
      b[0] = 6.0 * ((y_[1] - y_[0]) / dx_ - d_left) / dx_;
      diag[n - 1] = 2.0;
      sub[n - 1] = 1.0;
      b[n - 1] = 6.0 * (d_right - (y_[n - 1] - y_[n - 2]) / dx_) / dx_;
    } else {
      diag[0] = 1.0;
      sup[0] = 0.0;
      b[0] = 0.0;
      diag[n - 1] = 1.0;
      sub[n - 1] = 0.0;
      b[n - 1] = 0.0;
    }
    for (int i = 1; i < n; ++i) {
      double w = sub[i] / diag[i - 1];
      diag[i] -= w * sup[i - 1];
      b[i] -= w * b[i - 1];
    }
    m_[n - 1] = b[n - 1] / diag[n - 1];
    for (int i = n - 2; i >= 0; --i) m_[i] = (b[i] - sup[i] * m_[i + 1]) / diag[i];
  }

  double x0_ = 0, dx_ = 1;
  std::vector<double> y_, m_;
};

// Separable Catmull-Rom interpolation of an R^m-valued function sampled on a
// uniform 4-d box grid. Clamped at the boundary (queries must stay a cell
// inside the box for full accuracy; the fill code pads accordingly).
class BoxGrid4 {
public:
  BoxGrid4() = default;
  BoxGrid4(const Vec& lo, const Vec& hi, std::array<int, 4> shape, int value_dim)
      : lo_(lo), hi_(hi), shape_(shape), vdim_(value_dim) {
    std::size_t total = 1;
    for (int a = 0; a < 4; ++a) {
      step_[a] = (hi[a] - lo[a]) / double(shape[a] - 1);
      total *= std::size_t(shape[a]);
    }
    data_.assign(total * std::size_t(vdim_), 0.0);
  }

  std::size_t node_count() const {
    std::size_t total = 1;
    for (int a = 0; a < 4; ++a) total *= std::size_t(shape_[a]);
    return total;
  }

  Vec node_coords(std::size_t flat) const {
    std::array<int, 4> idx = unflatten(flat);
    Vec p(4);
    for (int a = 0; a < 4; ++a) p[a] = lo_[a] + step_[a] * idx[a];
    return p;
  }

  void set_node(std::size_t flat, const std::vector<double>& value) {
    for (int c = 0; c < vdim_; ++c) data_[flat * vdim_ + c] = value[c];
  }

  bool contains(const Vec& p, double margin_cells = 0.0) const {
    for (int a = 0; a < 4; ++a) {
      double m = margin_cells * step_[a];
      if (p[a] < lo_[a] + m || p[a] > hi_[a] - m) return false;
    }
    return true;
  }

  std::vector<double> eval(const Vec& p) const {
    std::array<int, 4> base;
    std::array<std::array<double, 4>, 4> w;  // per-axis Catmull-Rom weights
    for (int a = 0; a < 4; ++a) {
      double s = (p[a] - lo_[a]) / step_[a];
      int i = int(std::floor(s));
      if (i < 1) i = 1;
      if (i > shape_[a] - 3) i = shape_[a] - 3;
      double u = s - i;
      base[a] = i - 1;
      w[a][0] = 0.5 * (-u + 2 * u * u - u * u * u);
      w[a][1] = 0.5 * (2 - 5 * u * u + 3 * u * u * u);
      w[a][2] = 0.5 * (u + 4 * u * u - 3 * u * u * u);
      w[a][3] = 0.5 * (-u * u + u * u * u);
    }
    std::vector<double> out(vdim_, 0.0);
    for (int i0 = 0; i0 < 4; ++i0)
      for (int i1 = 0; i1 < 4; ++i1)
        for (int i2 = 0; i2 < 4; ++i2) {
          double w012 = w[0][i0] * w[1][i1] * w[2][i2];
          std::size_t row = index(base[0] + i0, base[1] + i1, base[2] + i2, base[3]);
          std::size_t stride3 = stride_of(3);
          for (int i3 = 0; i3 < 4; ++i3) {
            double ww = w012 * w[3][i3];
            const double* v = &data_[(row + std::size_t(i3) * stride3) * vdim_];
            for (int c = 0; c < vdim_; ++c) out[c] += ww * v[c];
          }
        }
    return out;
  }

private:
  std::size_t stride_of(int axis) const {
    std::size_t s = 1;
    for (int a = axis + 1; a < 4; ++a) s *= std::size_t(shape_[a]);
    return s;
  }
  std::size_t index(int i0, int i1, int i2, int i3) const {
    return ((std::size_t(i0) * shape_[1] + i1) * std::size_t(shape_[2]) + i2) *
               std::size_t(shape_[3]) +
           std::size_t(i3);
  }
  std::array<int, 4> unflatten(std::size_t flat) const {
    std::array<int, 4> idx;
    for (int a = 3; a >= 0; --a) {
      idx[a] = int(flat % std::size_t(shape_[a]));
      flat /= std::size_t(shape_[a]);
    }
    return idx;
  }

  Vec lo_{4}, hi_{4};
  std::array<int, 4> shape_{2, 2, 2, 2};
  std::array<double, 4> step_{1, 1, 1, 1};
  int vdim_ = 1;
  std::vector<double> data_;
};

}  // namespace collapselab

#endif
