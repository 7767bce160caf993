#ifndef FORMCAST_GEOMETRY_HPP
#define FORMCAST_GEOMETRY_HPP

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>

#include "formcast/params.hpp"

namespace formcast {

using Point2 = Eigen::Vector2d;
using Points2 = Eigen::Matrix2Xd;
using Points3 = Eigen::Matrix3Xd;
using QuadConnectivity = Eigen::Matrix<int, 4, Eigen::Dynamic>;

/// Punch half-width W and flange width F, fixed for every sample (mm).
inline constexpr double kPunchHalfWidth = 500.0;
inline constexpr double kFlangeWidth = 50.0;
/// Width of the linear band standing in for the vertical wall (mm).
inline constexpr double kWallBand = 2.0;
/// Normalization height: the largest design height in the parameter space (mm).
inline constexpr double kHeightScale = 120.0;

/// Signed distance from p to a rounded square centered on the origin
/// (negative inside).
double rounded_square_distance(const Point2& p, double half_width, double corner_radius);

/// Unit vector pointing toward decreasing distance (into the square).
Point2 rounded_square_inward(const Point2& p, double half_width, double corner_radius);

/// Cross-section of the die along the signed distance s to the punch plan outline.
struct DieProfile {
  double r_die;
  double r_punch;
  double r_plan;
  double h_design;
  double w_wall = kWallBand;
  double punch_half_width = kPunchHalfWidth;
  double flange_width = kFlangeWidth;

  static DieProfile from(const ParameterVector& pv);

  double distance(const Point2& p) const {
    return rounded_square_distance(p, punch_half_width, r_plan);
  }
  /// z(s): plateau, punch fillet, wall band, die fillet, flange.
  double height_at(double s) const;
  double height(const Point2& p) const { return height_at(distance(p)); }

  /// Half-width of the refined band around the punch outline.
  double band_half_width() const { return r_die + r_punch + w_wall; }
  /// Distance at which the flange plane starts.
  double flange_start() const { return w_wall + r_die; }
};

double die_height(double x, double y, const ParameterVector& pv);

/// Quarter blank: square of half-length L with one rounded corner of radius r,
/// spanning [0, L]^2 in the quarter-model frame. Vertices are counter-clockwise,
/// the closing edge is implicit.
struct BlankOutline {
  Points2 vertices;
  double half_length = 0.0;
  double corner_radius = 0.0;

  double polygon_area() const;
  /// Area of the exact rounded square quarter.
  double exact_area() const;
  /// Even-odd test; points on the boundary count as inside.
  bool contains(const Point2& p) const;
};

/// Rounded-square quarter outline with arc steps of at most 1 degree.
BlankOutline rounded_square_outline(double half_length, double corner_radius);

/// Blank outline for a sample: L = W + H + F scaled by A, r = r_plan + H + F
/// scaled by B.
BlankOutline blank_outline(const ParameterVector& pv);

/// Die surface as a point cloud: jittered quasi-uniform scatter at `spacing`
/// plus offset contours of the punch outline (at half spacing along and across)
/// through the refined band, so every profile knot is resolved.
Points3 die_point_cloud(const ParameterVector& pv, double spacing, std::uint64_t seed = 0);

/// Plain-text node/element mesh ("n id x y z", "e id n1 n2 n3 n4"), ids from 1.
struct FqmMesh {
  Points3 nodes;
  QuadConnectivity elements;
};

void write_fqm(std::ostream& os, const Points3& nodes, const QuadConnectivity& elements);
FqmMesh read_fqm(std::istream& is);

}  // namespace formcast

#endif  // FORMCAST_GEOMETRY_HPP
