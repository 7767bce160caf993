#ifndef FORMCAST_RASTER_TARGET_HPP
#define FORMCAST_RASTER_TARGET_HPP

#include <Eigen/Core>

#include "formcast/geometry.hpp"
#include "formcast/grid.hpp"
#include "formcast/oracle.hpp"
#include "formcast/raster_input.hpp"
#include "json.hpp"

namespace formcast {

/// Flag limits for implausible thinning (c1) and thickening (c2, negative).
struct ClipThresholds {
  double c1 = 0.40;
  double c2 = -0.40;

  void check() const;
  nlohmann::json to_json() const { return {{"c1", c1}, {"c2", c2}}; }
  static ClipThresholds from_json(const nlohmann::json& j);
};

struct TargetStack {
  GridSpec grid;
  StackArray thinning;      ///< 1 x n^2, fraction
  StackArray displacement;  ///< 3 x n^2, mm / kHeightScale
  Image mask;
  bool flagged = false;
};

/// Mean of the values of all elements incident to each node.
Eigen::VectorXd elemental_to_nodal(const Eigen::VectorXd& elemental,
                                   const QuadConnectivity& elements, Eigen::Index node_count);

/// Percentile with linear interpolation between order statistics
/// (rank p/100 * (n-1)).
double percentile(const Eigen::VectorXd& values, double p);

struct ClipResult {
  Eigen::VectorXd field;
  bool flagged = false;
};

/// If max > c1 or min < c2, values beyond the 0.5th / 99.5th percentiles are
/// pulled back to them; otherwise the field is returned unchanged.
ClipResult detect_and_clip(const Eigen::VectorXd& field, const ClipThresholds& thresholds);

/// Undeformed coordinates d0 = d - delta.
Points3 undeform(const Points3& deformed, const Points3& displacement);

/// Nodal values at undeformed positions onto the grid, zeroed outside the mask.
ImageD grid_interpolate(const Points2& undeformed_xy, const Eigen::VectorXd& values,
                        const Image& mask, const GridSpec& grid);

/// Averaging, clipping, undeforming and interpolation of one forming result.
TargetStack assemble_targets(const FormingResult& result, const Image& mask,
                             const GridSpec& grid, const ClipThresholds& thresholds);

}  // namespace formcast

#endif  // FORMCAST_RASTER_TARGET_HPP
