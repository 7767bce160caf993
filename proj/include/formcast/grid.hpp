#ifndef FORMCAST_GRID_HPP
#define FORMCAST_GRID_HPP

#include <Eigen/Core>

#include <stdexcept>

namespace formcast {

/// Side length (mm) of the fixed physical frame shared by every sample.
inline constexpr double kFrameMm = 740.0;

/// Row-major image: row index is the y pixel, column index the x pixel.
using Image = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ImageD = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GridSpec {
  int n_pixels = 256;
  double frame_mm = kFrameMm;

  double pitch() const { return frame_mm / n_pixels; }
  double center(int i) const { return (i + 0.5) * pitch(); }

  void check() const {
    if (n_pixels < 8) throw std::invalid_argument("grid needs at least 8 pixels per side");
    if (!(frame_mm > 0.0)) throw std::invalid_argument("grid frame must be positive");
  }

  bool operator==(const GridSpec&) const = default;
};

}  // namespace formcast

#endif  // FORMCAST_GRID_HPP
