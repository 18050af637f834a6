#pragma once

#include <stdexcept>

#include "sensomap/panel.hpp"
#include "sensomap/types.hpp"

namespace sensomap {

using DistanceMatrix = Eigen::MatrixXd;
using AdjacencyMatrix = Eigen::MatrixXi;

inline DistanceMatrix pairwise_distances(const Eigen::MatrixX2d& pts) {
  const int q = static_cast<int>(pts.rows());
  DistanceMatrix d = DistanceMatrix::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      const double dist = (pts.row(i) - pts.row(j)).norm();
      d(i, j) = dist;
      d(j, i) = dist;
    }
  }
  return d;
}

inline DistanceMatrix pairwise_distances(const Tablecloth& tc, const ProductList& products) {
  return pairwise_distances(tablecloth_coordinates(tc, products));
}

// Gabriel graph: i~j iff the closed disk with segment ij as diameter contains no
// third point, i.e. for all k: d(i,k)^2 + d(j,k)^2 > d(i,j)^2. A point exactly on
// the circle blocks the edge; tie_tolerance (cm^2) absorbs rounding around that
// boundary. O(q^3), which is the intended regime (q stays small).
inline AdjacencyMatrix gabriel_graph(const Eigen::MatrixX2d& pts, double tie_tolerance = 1e-9) {
  const int q = static_cast<int>(pts.rows());
  if (q < 2) throw std::invalid_argument("need at least 2 points");

  Eigen::MatrixXd d2(q, q);
  for (int i = 0; i < q; ++i) {
    d2(i, i) = 0.0;
    for (int j = i + 1; j < q; ++j) {
      const double v = (pts.row(i) - pts.row(j)).squaredNorm();
      if (v == 0.0)
        throw std::invalid_argument("coincident points at rows " + std::to_string(i) + " and " +
                                    std::to_string(j));
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }

  AdjacencyMatrix adj = AdjacencyMatrix::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      bool open = true;
      for (int k = 0; k < q && open; ++k) {
        if (k == i || k == j) continue;
        open = d2(i, k) + d2(j, k) > d2(i, j) + tie_tolerance;
      }
      if (open) {
        adj(i, j) = 1;
        adj(j, i) = 1;
      }
    }
  }
  return adj;
}

inline AdjacencyMatrix gabriel_graph(const Tablecloth& tc, const ProductList& products,
                                     double tie_tolerance = 1e-9) {
  return gabriel_graph(tablecloth_coordinates(tc, products), tie_tolerance);
}

}  // namespace sensomap
