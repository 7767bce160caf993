#include "formcast/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "formcast/metrics.hpp"

namespace formcast {

namespace {

void check_stack(const StackArray& s, Eigen::Index channels, const GridSpec& grid, const char* what) {
  const Eigen::Index plane = static_cast<Eigen::Index>(grid.n_pixels) * grid.n_pixels;
  if (s.rows() != channels || s.cols() != plane) throw std::invalid_argument(std::string(what) + " stack does not match the grid");
}

void check_mask(const Image& mask, const GridSpec& grid) {
  if (mask.rows() != grid.n_pixels || mask.cols() != grid.n_pixels) {
    throw std::invalid_argument("mask does not match the grid");
  }
}

}  // namespace

AsFormedMesh as_formed_mesh(const StackArray& displacement, const StackArray& thinning, const Image& mask,
                            const GridSpec& grid) {
  check_stack(displacement, 3, grid, "displacement");
  check_stack(thinning, 1, grid, "thinning");
  check_mask(mask, grid);
  const int n = grid.n_pixels;
  const Eigen::Index count = (mask > 0.5f).count();
  if (count == 0) throw std::invalid_argument("as-formed mesh needs a non-empty mask");

  AsFormedMesh mesh;
  mesh.vertices.resize(3, count);
  mesh.thinning.resize(count);
  mesh.pixel.resize(count);
  Eigen::VectorXi vertex_of = Eigen::VectorXi::Constant(static_cast<Eigen::Index>(n) * n, -1);
  Eigen::Index v = 0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (mask(r, c) <= 0.5f) continue;
      const Eigen::Index k = static_cast<Eigen::Index>(r) * n + c;
      mesh.vertices.col(v) << grid.center(c) + displacement(0, k) * kHeightScale,
          grid.center(r) + displacement(1, k) * kHeightScale, displacement(2, k) * kHeightScale;
      mesh.thinning[v] = thinning(0, k);
      mesh.pixel[v] = static_cast<int>(k);
      vertex_of[k] = static_cast<int>(v);
      ++v;
    }
  }
  std::vector<Eigen::Vector4i> faces;
  for (int r = 0; r + 1 < n; ++r) {
    for (int c = 0; c + 1 < n; ++c) {
      const Eigen::Vector4i q(vertex_of[r * n + c], vertex_of[r * n + c + 1], vertex_of[(r + 1) * n + c + 1],
                              vertex_of[(r + 1) * n + c]);
      if ((q.array() >= 0).all()) faces.push_back(q);
    }
  }
  mesh.faces.resize(4, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t f = 0; f < faces.size(); ++f) mesh.faces.col(static_cast<Eigen::Index>(f)) = faces[f];
  return mesh;
}

void write_fqm(std::ostream& os, const AsFormedMesh& mesh) { write_fqm(os, mesh.vertices, mesh.faces); }

ImageD formed_height(const StackArray& displacement, const Image& mask, const GridSpec& grid) {
  check_stack(displacement, 3, grid, "displacement");
  check_mask(mask, grid);
  return stack_plane(displacement, 2, grid.n_pixels) * kHeightScale * mask.cast<double>();
}

Image flange_band(const ParameterVector& pv, const StackArray& displacement, const Image& mask,
                  const GridSpec& grid) {
  check_stack(displacement, 3, grid, "displacement");
  check_mask(mask, grid);
  const DieProfile die = DieProfile::from(pv);
  const int n = grid.n_pixels;
  Image band = Image::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Eigen::Index k = static_cast<Eigen::Index>(r) * n + c;
      const Point2 p(grid.center(c) + displacement(0, k) * kHeightScale, grid.center(r) + displacement(1, k) * kHeightScale);
      if (mask(r, c) > 0.5f && die.distance(p) > die.flange_start()) {
        band(r, c) = 1.0f;
      }
    }
  }
  return band;
}

ImageD wrinkle_height(const ImageD& z, const Image& band, int window) {
  if (z.rows() != band.rows() || z.cols() != band.cols()) throw std::invalid_argument("z and band shapes differ");
  if (window < 3 || window % 2 == 0) throw std::invalid_argument("wrinkle window must be odd and at least 3");
  if (window > z.rows() || window > z.cols()) throw std::invalid_argument("wrinkle window larger than the grid");
  const Eigen::Index rows = z.rows();
  const Eigen::Index cols = z.cols();
  const ImageD in_band = (band > 0.5f).cast<double>();
  const ImageD zb = z * in_band;

  // Summed-area tables give the band-restricted box average in O(1) per pixel.
  ImageD sum_z = ImageD::Zero(rows + 1, cols + 1);
  ImageD sum_w = ImageD::Zero(rows + 1, cols + 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      sum_z(r + 1, c + 1) = zb(r, c) + sum_z(r, c + 1) + sum_z(r + 1, c) - sum_z(r, c);
      sum_w(r + 1, c + 1) = in_band(r, c) + sum_w(r, c + 1) + sum_w(r + 1, c) - sum_w(r, c);
    }
  }
  const Eigen::Index half = window / 2;
  ImageD dev = ImageD::Zero(rows, cols);
  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (in_band(r, c) == 0.0) continue;
      const Eigen::Index r0 = std::max<Eigen::Index>(0, r - half);
      const Eigen::Index r1 = std::min(rows, r + half + 1);
      const Eigen::Index c0 = std::max<Eigen::Index>(0, c - half);
      const Eigen::Index c1 = std::min(cols, c + half + 1);
      const double s = sum_z(r1, c1) - sum_z(r0, c1) - sum_z(r1, c0) + sum_z(r0, c0);
      const double w = sum_w(r1, c1) - sum_w(r0, c1) - sum_w(r1, c0) + sum_w(r0, c0);
      dev(r, c) = z(r, c) - s / w;
      total += dev(r, c);
      ++count;
    }
  }
  if (count > 0) {
    const double mean = total / static_cast<double>(count);
    dev -= mean * in_band;
  }
  return dev;
}

int wrinkle_count(const ImageD& wrinkle, const Image& band, const ParameterVector& pv, const GridSpec& grid) {
  check_mask(band, grid);
  const DieProfile die = DieProfile::from(pv);
  const Point2 center = Point2::Constant(die.punch_half_width - die.r_plan);
  constexpr int kArcPoints = 361;
  const double pitch = grid.pitch();

  Eigen::VectorXd best;
  double best_energy = 0.0;
  for (double s = die.flange_start() + pitch; s < grid.frame_mm; s += pitch) {
    const double radius = die.r_plan + s;
    Eigen::VectorXd profile(kArcPoints);
    double energy = 0.0;
    bool inside = true;
    for (int k = 0; k < kArcPoints && inside; ++k) {
      const double theta = 0.5 * std::numbers::pi * k / (kArcPoints - 1);
      const Point2 p = center + radius * Point2(std::cos(theta), std::sin(theta));
      const int c = static_cast<int>(p.x() / pitch);
      const int r = static_cast<int>(p.y() / pitch);
      if (c < 0 || r < 0 || c >= grid.n_pixels || r >= grid.n_pixels || band(r, c) <= 0.5f) {
        inside = false;
        break;
      }
      profile[k] = sample_bilinear(wrinkle, grid, p);
      energy += profile[k] * profile[k];
    }
    if (inside && energy > best_energy) {
      best_energy = energy;
      best = profile;
    }
  }
  if (best.size() == 0) return 0;
  const double peak = best.maxCoeff();
  return count_local_maxima(best, std::max(0.1, 0.5 * peak));
}

nlohmann::json ReconstructSummary::to_json() const {
  return {{"max_thinning", max_thinning},
          {"mean_thinning", mean_thinning},
          {"max_wrinkle_height_mm", max_wrinkle_height_mm},
          {"wrinkle_count", wrinkle_count}};
}

ReconstructSummary summarize(const StackArray& displacement, const StackArray& thinning, const Image& mask,
                             const ParameterVector& pv, const GridSpec& grid, int window) {
  check_stack(thinning, 1, grid, "thinning");
  const ImageD t = stack_plane(thinning, 0, grid.n_pixels);
  ReconstructSummary s;
  s.max_thinning = field_statistic(t, mask, FieldStatistic::max);
  s.mean_thinning = field_statistic(t, mask, FieldStatistic::mean);
  const Image band = flange_band(pv, displacement, mask, grid);
  if ((band > 0.5f).count() > 0) {
    const ImageD w = wrinkle_height(formed_height(displacement, mask, grid), band, window);
    s.max_wrinkle_height_mm = w.abs().maxCoeff();
    s.wrinkle_count = wrinkle_count(w, band, pv, grid);
  }
  return s;
}

}  // namespace formcast
