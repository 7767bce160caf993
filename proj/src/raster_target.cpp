#include "formcast/raster_target.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "formcast/scatter_interp.hpp"

namespace formcast {

void ClipThresholds::check() const {
  if (!(c1 > 0.0 && 0.0 > c2)) throw std::invalid_argument("clip thresholds need c1 > 0 > c2");
}

ClipThresholds ClipThresholds::from_json(const nlohmann::json& j) {
  ClipThresholds t;
  t.c1 = j.value("c1", t.c1);
  t.c2 = j.value("c2", t.c2);
  t.check();
  return t;
}

Eigen::VectorXd elemental_to_nodal(const Eigen::VectorXd& elemental,
                                   const QuadConnectivity& elements, Eigen::Index node_count) {
  if (elemental.size() != elements.cols()) {
    throw std::invalid_argument("elemental_to_nodal: one value per element required");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(node_count);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(node_count);
  for (Eigen::Index e = 0; e < elements.cols(); ++e) {
    for (int k = 0; k < 4; ++k) {
      const int node = elements(k, e);
      if (node < 0 || node >= node_count) {
        throw std::invalid_argument("elemental_to_nodal: connectivity index out of range");
      }
      sum[node] += elemental[e];
      ++count[node];
    }
  }
  for (Eigen::Index i = 0; i < node_count; ++i) {
    if (count[i] == 0) {
      throw std::invalid_argument("elemental_to_nodal: orphan node " + std::to_string(i));
    }
  }
  return sum.array() / count.cast<double>().array();
}

double percentile(const Eigen::VectorXd& values, double p) {
  if (values.size() == 0) throw std::invalid_argument("percentile of an empty field");
  std::vector<double> v(values.data(), values.data() + values.size());
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  const double b = hi == lo ? a : *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (rank - static_cast<double>(lo)) * (b - a);
}

ClipResult detect_and_clip(const Eigen::VectorXd& field, const ClipThresholds& thresholds) {
  if (field.size() == 0) throw std::invalid_argument("detect_and_clip: empty field");
  ClipResult out{field, false};
  out.flagged = field.maxCoeff() > thresholds.c1 || field.minCoeff() < thresholds.c2;
  if (!out.flagged) return out;
  const double upper = percentile(field, 99.5);
  const double lower = percentile(field, 0.5);
  out.field = field.cwiseMin(upper).cwiseMax(lower);
  return out;
}

Points3 undeform(const Points3& deformed, const Points3& displacement) {
  if (deformed.cols() != displacement.cols()) {
    throw std::invalid_argument("undeform: coordinate and displacement counts differ");
  }
  return deformed - displacement;
}

ImageD grid_interpolate(const Points2& undeformed_xy, const Eigen::VectorXd& values,
                        const Image& mask, const GridSpec& grid) {
  const GridInterpolator interp(undeformed_xy, grid);
  return interp.apply(values) * mask.cast<double>();
}

TargetStack assemble_targets(const FormingResult& result, const Image& mask,
                             const GridSpec& grid, const ClipThresholds& thresholds) {
  thresholds.check();
  const int n = grid.n_pixels;
  if (mask.rows() != n || mask.cols() != n) throw std::invalid_argument("assemble_targets: mask/grid mismatch");
  const Points3 d0 = undeform(result.nodes_final, result.displacements);
  const GridInterpolator interp(d0.topRows<2>(), grid);
  const ImageD m = mask.cast<double>();

  TargetStack t;
  t.grid = grid;
  t.mask = mask;
  t.thinning.resize(1, static_cast<Eigen::Index>(n) * n);
  t.displacement.resize(3, static_cast<Eigen::Index>(n) * n);

  const auto store = [&](StackArray& dst, int row, const ImageD& img) {
    const Image f = (img * m).cast<float>();
    dst.row(row) = Eigen::Map<const Eigen::Array<float, 1, Eigen::Dynamic>>(f.data(), f.size());
  };

  // Thinning is element based: average to nodes, then clip if flagged.
  const Eigen::VectorXd nodal =
      elemental_to_nodal(result.elemental_thinning, result.elements, result.nodes_final.cols());
  const ClipResult clipped = detect_and_clip(nodal, thresholds);
  t.flagged = clipped.flagged;
  // The percentile clip alone can leave broad plateaus above c1; the stored
  // target always lies within [c2, c1].
  const Eigen::VectorXd bounded = clipped.field.cwiseMin(thresholds.c1).cwiseMax(thresholds.c2);
  store(t.thinning, 0, interp.apply(bounded));

  for (int c = 0; c < 3; ++c) {
    store(t.displacement, c, interp.apply(result.displacements.row(c).transpose() / kHeightScale));
  }
  return t;
}

}  // namespace formcast
