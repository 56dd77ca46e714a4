#ifndef COLLAPSELAB_CHART_HPP
#define COLLAPSELAB_CHART_HPP

#include <string>

#include "collapselab/linalg.hpp"

namespace collapselab {

// Chart identifiers. Each model declares which of these it provides; a point
// is only meaningful together with its chart.
enum class ChartId {
  cartesian,   // Euclidean / flat covering charts (R^3 or R^4)
  bianchi,     // Taub-NUT radial chart (t, theta, phi, psi)
  monopole,    // (multi-)Taub-NUT chart (x, y, z, tau)
  polar,       // Schwarzschild chart (R, theta, phi, tau)
};

inline const char* chart_name(ChartId c) {
  switch (c) {
    case ChartId::cartesian: return "cartesian";
    case ChartId::bianchi: return "bianchi";
    case ChartId::monopole: return "monopole";
    case ChartId::polar: return "polar";
  }
  return "?";
}

struct ChartPoint {
  ChartId chart = ChartId::cartesian;
  Vec coords;

  ChartPoint() = default;
  ChartPoint(ChartId c, Vec x) : chart(c), coords(std::move(x)) {}
  int dim() const { return coords.n; }
};

struct TangentVec {
  ChartPoint base;
  Vec components;

  TangentVec() = default;
  TangentVec(ChartPoint p, Vec v) : base(std::move(p)), components(std::move(v)) {}
};

}  // namespace collapselab

#endif
