#ifndef FORMCAST_SCATTER_INTERP_HPP
#define FORMCAST_SCATTER_INTERP_HPP

#include <Eigen/Core>

#include <vector>

#include "formcast/geometry.hpp"
#include "formcast/grid.hpp"

namespace formcast {

/// Delaunay triangulation of a planar point set. Points are deduplicated and
/// put in canonical (x, y) order first, so the result does not depend on the
/// input enumeration order.
struct Triangulation {
  Points2 points;                       ///< unique points, canonical order
  std::vector<Eigen::Index> source_of;  ///< input index -> unique point index
  Eigen::Matrix3Xi triangles;           ///< counter-clockwise vertex triples
};

/// Throws std::invalid_argument for fewer than three distinct points or a
/// collinear set.
Triangulation delaunay(const Points2& xy);

/// Linear barycentric interpolation of nodal values onto pixel centers, with a
/// nearest-node fallback for pixels outside the convex hull. The weights are
/// computed once and reused for every field sharing the node set.
class GridInterpolator {
 public:
  GridInterpolator(const Points2& xy, const GridSpec& grid);

  /// `values` holds one entry per input point.
  ImageD apply(const Eigen::VectorXd& values) const;

  const GridSpec& grid() const { return grid_; }
  const Triangulation& triangulation() const { return tri_; }
  /// Pixels resolved by the nearest-node fallback.
  Eigen::Index fallback_pixels() const { return fallback_; }

 private:
  GridSpec grid_;
  Triangulation tri_;
  std::vector<int> multiplicity_;
  Eigen::Matrix<Eigen::Index, 3, Eigen::Dynamic> vertex_;
  Eigen::Matrix3Xd weight_;
  Eigen::Index fallback_ = 0;
};

}  // namespace formcast

#endif  // FORMCAST_SCATTER_INTERP_HPP
