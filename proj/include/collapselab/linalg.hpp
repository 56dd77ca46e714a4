#ifndef COLLAPSELAB_LINALG_HPP
#define COLLAPSELAB_LINALG_HPP

// Small dense linear algebra for chart dimensions d <= 4. Vectors and
// matrices carry a runtime dimension but live in fixed-capacity storage, so
// everything stays on the stack inside the ODE right-hand sides.

#include <array>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <vector>

namespace collapselab {

constexpr int kMaxDim = 4;

struct Vec {
  int n = 0;
  std::array<double, kMaxDim> a{};

  Vec() = default;
  explicit Vec(int dim) : n(dim) { a.fill(0.0); }
  Vec(std::initializer_list<double> xs) : n(int(xs.size())) {
    int i = 0;
    for (double x : xs) a[i++] = x;
  }
  static Vec zero(int dim) { return Vec(dim); }
  static Vec basis(int dim, int i) {
    Vec v(dim);
    v[i] = 1.0;
    return v;
  }
  double& operator[](int i) { return a[i]; }
  double operator[](int i) const { return a[i]; }
  std::vector<double> to_std() const { return std::vector<double>(a.begin(), a.begin() + n); }
  static Vec from_std(const std::vector<double>& v) {
    Vec r(int(v.size()));
    for (int i = 0; i < r.n; ++i) r[i] = v[i];
    return r;
  }
};

inline Vec operator+(const Vec& x, const Vec& y) {
  Vec r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = x[i] + y[i];
  return r;
}
inline Vec operator-(const Vec& x, const Vec& y) {
  Vec r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = x[i] - y[i];
  return r;
}
inline Vec operator*(double s, const Vec& x) {
  Vec r(x.n);
  for (int i = 0; i < x.n; ++i) r[i] = s * x[i];
  return r;
}
inline Vec operator-(const Vec& x) { return -1.0 * x; }
inline Vec& operator+=(Vec& x, const Vec& y) {
  for (int i = 0; i < x.n; ++i) x[i] += y[i];
  return x;
}
inline Vec& operator-=(Vec& x, const Vec& y) {
  for (int i = 0; i < x.n; ++i) x[i] -= y[i];
  return x;
}
inline double dot(const Vec& x, const Vec& y) {
  double s = 0;
  for (int i = 0; i < x.n; ++i) s += x[i] * y[i];
  return s;
}
inline double norm(const Vec& x) { return std::sqrt(dot(x, x)); }
inline Vec normalized(const Vec& x) {
  double m = norm(x);
  return (m > 0) ? (1.0 / m) * x : x;
}

struct Mat {
  int n = 0;  // rows == cols == n (square use); rectangular handled ad hoc
  std::array<double, kMaxDim * kMaxDim> a{};

  Mat() = default;
  explicit Mat(int dim) : n(dim) { a.fill(0.0); }
  static Mat identity(int dim) {
    Mat m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
  double& operator()(int i, int j) { return a[i * kMaxDim + j]; }
  double operator()(int i, int j) const { return a[i * kMaxDim + j]; }
};

inline Mat operator+(const Mat& x, const Mat& y) {
  Mat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(i, j) = x(i, j) + y(i, j);
  return r;
}
inline Mat operator-(const Mat& x, const Mat& y) {
  Mat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(i, j) = x(i, j) - y(i, j);
  return r;
}
inline Mat operator*(double s, const Mat& x) {
  Mat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(i, j) = s * x(i, j);
  return r;
}
inline Vec operator*(const Mat& m, const Vec& v) {
  Vec r(m.n);
  for (int i = 0; i < m.n; ++i) {
    double s = 0;
    for (int j = 0; j < m.n; ++j) s += m(i, j) * v[j];
    r[i] = s;
  }
  return r;
}
inline Mat operator*(const Mat& x, const Mat& y) {
  Mat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) {
      double s = 0;
      for (int k = 0; k < x.n; ++k) s += x(i, k) * y(k, j);
      r(i, j) = s;
    }
  return r;
}
inline Mat transpose(const Mat& m) {
  Mat r(m.n);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) r(i, j) = m(j, i);
  return r;
}

inline double frobenius_norm(const Mat& m) {
  double s = 0;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) s += m(i, j) * m(i, j);
  return std::sqrt(s);
}

// Gaussian elimination with partial pivoting; fine at these sizes.
inline bool solve(const Mat& m, const Vec& b, Vec& x) {
  int n = m.n;
  double A[kMaxDim][kMaxDim + 1];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A[i][j] = m(i, j);
    A[i][n] = b[i];
  }
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[p][c])) p = r;
    if (std::fabs(A[p][c]) < 1e-300) return false;
    if (p != c)
      for (int j = c; j <= n; ++j) std::swap(A[p][j], A[c][j]);
    for (int r = c + 1; r < n; ++r) {
      double f = A[r][c] / A[c][c];
      for (int j = c; j <= n; ++j) A[r][j] -= f * A[c][j];
    }
  }
  x = Vec(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = A[i][n];
    for (int j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
    x[i] = s / A[i][i];
  }
  return true;
}

inline bool invert(const Mat& m, Mat& inv) {
  inv = Mat(m.n);
  for (int j = 0; j < m.n; ++j) {
    Vec col;
    if (!solve(m, Vec::basis(m.n, j), col)) return false;
    for (int i = 0; i < m.n; ++i) inv(i, j) = col[i];
  }
  return true;
}

inline double determinant(const Mat& m) {
  int n = m.n;
  double A[kMaxDim][kMaxDim];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A[i][j] = m(i, j);
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[p][c])) p = r;
    if (std::fabs(A[p][c]) == 0.0) return 0.0;
    if (p != c) {
      for (int j = 0; j < n; ++j) std::swap(A[p][j], A[c][j]);
      det = -det;
    }
    det *= A[c][c];
    for (int r = c + 1; r < n; ++r) {
      double f = A[r][c] / A[c][c];
      for (int j = c; j < n; ++j) A[r][j] -= f * A[c][j];
    }
  }
  return det;
}

// Cyclic Jacobi eigenvalue iteration for symmetric matrices. Returns
// eigenvalues ascending; eigenvectors as columns of V.
inline void symmetric_eigen(const Mat& m, Vec& evals, Mat& evecs) {
  int n = m.n;
  Mat A = m;
  Mat V = Mat::identity(n);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(A(p, q)) < 1e-300) continue;
        double theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
        double c = 1.0 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
  }
  evals = Vec(n);
  for (int i = 0; i < n; ++i) evals[i] = A(i, i);
  // selection sort ascending, permuting columns of V alongside
  for (int i = 0; i < n; ++i) {
    int mi = i;
    for (int j = i + 1; j < n; ++j)
      if (evals[j] < evals[mi]) mi = j;
    if (mi != i) {
      std::swap(evals.a[i], evals.a[mi]);
      for (int k = 0; k < n; ++k) std::swap(V(k, i), V(k, mi));
    }
  }
  evecs = V;
}

inline double smallest_eigenvalue(const Mat& m) {
  Vec ev;
  Mat V;
  symmetric_eigen(m, ev, V);
  return ev[0];
}

// Spectral (operator 2-) norm of a square matrix via eigen of M^T M.
inline double spectral_norm(const Mat& m) {
  Mat mtm = transpose(m) * m;
  Vec ev;
  Mat V;
  symmetric_eigen(mtm, ev, V);
  double top = ev[m.n - 1];
  return top > 0 ? std::sqrt(top) : 0.0;
}

// Singular values (descending) of a map R^n -> R^rows stored in the upper
// rows x n block of `rect` (rows <= kMaxDim). Computed from A^T A.
inline std::vector<double> singular_values(const Mat& rect, int rows) {
  int n = rect.n;
  Mat ata(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int r = 0; r < rows; ++r) s += rect(r, i) * rect(r, j);
      ata(i, j) = s;
    }
  Vec ev;
  Mat V;
  symmetric_eigen(ata, ev, V);
  std::vector<double> sv;
  for (int i = n - 1; i >= 0; --i) sv.push_back(ev[i] > 0 ? std::sqrt(ev[i]) : 0.0);
  return sv;
}

// Null direction of a map R^n -> R^rows (eigenvector of A^T A with the
// smallest eigenvalue).
inline Vec null_direction(const Mat& rect, int rows) {
  int n = rect.n;
  Mat ata(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int r = 0; r < rows; ++r) s += rect(r, i) * rect(r, j);
      ata(i, j) = s;
    }
  Vec ev;
  Mat V;
  symmetric_eigen(ata, ev, V);
  Vec dir(n);
  for (int i = 0; i < n; ++i) dir[i] = V(i, 0);
  return dir;
}

// Gram-Schmidt of the coordinate frame against a metric g: returns E with
// columns e_i such that E^T g E = id. Lower-triangular-style construction.
inline Mat orthonormal_frame(const Mat& g) {
  int n = g.n;
  Mat E(n);
  for (int i = 0; i < n; ++i) {
    Vec v = Vec::basis(n, i);
    for (int j = 0; j < i; ++j) {
      Vec ej(n);
      for (int k = 0; k < n; ++k) ej[k] = E(k, j);
      double c = dot(g * v, ej);
      v -= c * ej;
    }
    double len = std::sqrt(dot(g * v, v));
    for (int k = 0; k < n; ++k) E(k, i) = v[k] / len;
  }
  return E;
}

}  // namespace collapselab

#endif
