#ifndef FORMCAST_RASTER_INPUT_HPP
#define FORMCAST_RASTER_INPUT_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "formcast/geometry.hpp"
#include "formcast/grid.hpp"
#include "formcast/params.hpp"

namespace formcast {

/// C x (n*n) row-major block; each row is one channel image flattened
/// row-major, i.e. the CHW layout of one network sample.
using StackArray = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline const std::array<std::string, 4> kInputChannels = {"die_height", "t_spacer", "t_init",
                                                          "speed"};

/// Checksum of an ordered channel list, stored with every input stack.
std::uint32_t channel_order_checksum(const std::vector<std::string>& names);

struct InputStack {
  GridSpec grid;
  StackArray data;  ///< 4 x n^2
  Image mask;       ///< blank binary map
  std::vector<std::string> channel_order;
  std::uint32_t order_checksum = 0;

  Image channel(int c) const;
};

/// Channel c of a C x n^2 stack as an n x n double image.
ImageD stack_plane(const StackArray& stack, int c, int n);

/// Throws std::invalid_argument if the stack is not in canonical channel order.
void verify_channel_order(const InputStack& stack);

/// Die heights interpolated onto the grid and divided by kHeightScale.
Image rasterize_die(const Points3& cloud, const GridSpec& grid);

/// 1 where the pixel center is inside the outline (boundary included).
Image rasterize_blank(const BlankOutline& outline, const GridSpec& grid);

/// Affine map of a process scalar onto [0.1, 1.0].
double scalar_norm(double value, double lower, double upper);

/// Spacer thickness, initial temperature and speed, each as mask * scalar_norm.
std::array<Image, 3> scalar_channels(const Image& mask, const ParameterVector& pv,
                                     const ParameterBounds& bounds);

InputStack assemble_input(const Image& die, const std::array<Image, 3>& scalars,
                          const Image& mask);

/// Named-channel variant; any order other than kInputChannels is rejected.
InputStack assemble_input(const std::vector<std::pair<std::string, Image>>& named,
                          const Image& mask);

/// Full input pipeline for one sample: die cloud, blank map, scalar images.
InputStack make_input(const ParameterVector& pv, const GridSpec& grid,
                      const ParameterBounds& bounds, double die_spacing,
                      std::uint64_t seed = 0);

}  // namespace formcast

#endif  // FORMCAST_RASTER_INPUT_HPP
