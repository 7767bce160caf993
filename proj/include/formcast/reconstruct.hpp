#ifndef FORMCAST_RECONSTRUCT_HPP
#define FORMCAST_RECONSTRUCT_HPP

#include <Eigen/Core>

#include <iosfwd>

#include "formcast/geometry.hpp"
#include "formcast/grid.hpp"
#include "formcast/params.hpp"
#include "formcast/raster_input.hpp"
#include "json.hpp"

namespace formcast {

/// Pixel grid deformed by the displacement images: one vertex per in-mask
/// pixel, one quad per 2x2 block of in-mask pixels.
struct AsFormedMesh {
  Points3 vertices;          ///< mm
  QuadConnectivity faces;    ///< 0-based vertex indices, counter-clockwise in the plane
  Eigen::VectorXd thinning;  ///< per vertex
  Eigen::VectorXi pixel;     ///< row-major pixel index of each vertex
};

/// vertex = (pixel center + (dx, dy) * 120, dz * 120). Throws on an empty mask
/// or on stacks that do not match the grid.
AsFormedMesh as_formed_mesh(const StackArray& displacement, const StackArray& thinning, const Image& mask,
                            const GridSpec& grid);

void write_fqm(std::ostream& os, const AsFormedMesh& mesh);

/// Formed height (mm) on the undeformed pixel grid, zero outside the mask.
ImageD formed_height(const StackArray& displacement, const Image& mask, const GridSpec& grid);

/// In-mask pixels whose formed position (center plus in-plane displacement)
/// lies on the flange plane of the die profile (s > w_wall + r_die).
Image flange_band(const ParameterVector& pv, const StackArray& displacement, const Image& mask,
                  const GridSpec& grid);

/// Deviation of z from its window x window moving average taken over band
/// pixels only, with the band mean removed; zero off the band. The window must
/// be odd, at least 3 and no larger than the grid.
ImageD wrinkle_height(const ImageD& z, const Image& band, int window = 15);

/// Ripple crests along the corner arc: the arc about the plan-corner center
/// with the largest ripple energy is sampled and crests above half its peak
/// (and above 0.1 mm) are counted.
int wrinkle_count(const ImageD& wrinkle, const Image& band, const ParameterVector& pv, const GridSpec& grid);

struct ReconstructSummary {
  double max_thinning = 0.0;
  double mean_thinning = 0.0;
  double max_wrinkle_height_mm = 0.0;
  int wrinkle_count = 0;

  nlohmann::json to_json() const;
};

/// Summary of one predicted or simulated sample.
ReconstructSummary summarize(const StackArray& displacement, const StackArray& thinning, const Image& mask,
                             const ParameterVector& pv, const GridSpec& grid, int window = 15);

}  // namespace formcast

#endif  // FORMCAST_RECONSTRUCT_HPP
