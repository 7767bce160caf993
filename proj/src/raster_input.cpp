#include "formcast/raster_input.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/crc.hpp>

#include "formcast/scatter_interp.hpp"

namespace formcast {

std::uint32_t channel_order_checksum(const std::vector<std::string>& names) {
  boost::crc_32_type crc;
  for (const auto& n : names) {
    crc.process_bytes(n.data(), n.size());
    crc.process_byte('\n');
  }
  return crc.checksum();
}

Image InputStack::channel(int c) const {
  const int n = grid.n_pixels;
  return Eigen::Map<const Image>(data.row(c).data(), n, n);
}

void verify_channel_order(const InputStack& stack) {
  const std::vector<std::string> canonical(kInputChannels.begin(), kInputChannels.end());
  if (stack.channel_order != canonical ||
      stack.order_checksum != channel_order_checksum(canonical) ||
      stack.order_checksum != channel_order_checksum(stack.channel_order)) {
    throw std::invalid_argument("input stack channel order does not match the canonical order");
  }
}

Image rasterize_die(const Points3& cloud, const GridSpec& grid) {
  if (cloud.cols() == 0) throw std::invalid_argument("rasterize_die: empty point cloud");
  const GridInterpolator interp(cloud.topRows<2>(), grid);
  return (interp.apply(cloud.row(2).transpose()) / kHeightScale).cast<float>();
}

Image rasterize_blank(const BlankOutline& outline, const GridSpec& grid) {
  grid.check();
  const Points2& v = outline.vertices;
  const Eigen::Index m = v.cols();
  if (m < 3 || !(outline.polygon_area() > 0.0)) {
    throw std::invalid_argument("rasterize_blank: outline is not a closed polygon");
  }
  const int n = grid.n_pixels;
  Image mask = Image::Zero(n, n);
  std::vector<double> xs;
  for (int j = 0; j < n; ++j) {
    const double y = grid.center(j);
    xs.clear();
    for (Eigen::Index a = 0, b = m - 1; a < m; b = a++) {
      const double ya = v(1, a), yb = v(1, b);
      if (ya == y && yb == y) {
        // Horizontal edge through the row: its pixels are boundary pixels.
        const double lo = std::min(v(0, a), v(0, b)), hi = std::max(v(0, a), v(0, b));
        for (int i = 0; i < n; ++i) {
          const double x = grid.center(i);
          if (x >= lo && x <= hi) mask(j, i) = 1.0f;
        }
        continue;
      }
      if ((ya > y) != (yb > y)) {
        xs.push_back(v(0, a) + (y - ya) * (v(0, b) - v(0, a)) / (yb - ya));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      for (int i = 0; i < n; ++i) {
        const double x = grid.center(i);
        if (x >= xs[k] && x <= xs[k + 1]) mask(j, i) = 1.0f;
      }
    }
  }
  return mask;
}

double scalar_norm(double value, double lower, double upper) {
  if (!(value >= lower && value <= upper)) {
    throw std::out_of_range("process scalar outside its bounds");
  }
  return 0.1 + 0.9 * (value - lower) / (upper - lower);
}

std::array<Image, 3> scalar_channels(const Image& mask, const ParameterVector& pv,
                                     const ParameterBounds& bounds) {
  if (((mask != 0.0f) && (mask != 1.0f)).any()) {
    throw std::invalid_argument("scalar_channels: mask must be binary");
  }
  constexpr std::array<Param, 3> kScalars = {Param::t_spacer, Param::t_init, Param::speed};
  std::array<Image, 3> out;
  for (std::size_t k = 0; k < kScalars.size(); ++k) {
    const auto i = static_cast<std::size_t>(kScalars[k]);
    const auto value = static_cast<float>(scalar_norm(pv[kScalars[k]], bounds.lower[i], bounds.upper[i]));
    out[k] = mask * value;
  }
  return out;
}

InputStack assemble_input(const Image& die, const std::array<Image, 3>& scalars,
                          const Image& mask) {
  const Eigen::Index n = die.rows();
  if (die.cols() != n || mask.rows() != n || mask.cols() != n) {
    throw std::invalid_argument("assemble_input: image dimensions differ");
  }
  for (const auto& s : scalars) {
    if (s.rows() != n || s.cols() != n) throw std::invalid_argument("assemble_input: image dimensions differ");
  }
  InputStack stack;
  stack.grid.n_pixels = static_cast<int>(n);
  stack.data.resize(4, n * n);
  stack.data.row(0) = Eigen::Map<const Eigen::Array<float, 1, Eigen::Dynamic>>(die.data(), n * n);
  for (int k = 0; k < 3; ++k) {
    stack.data.row(k + 1) = Eigen::Map<const Eigen::Array<float, 1, Eigen::Dynamic>>(scalars[k].data(), n * n);
  }
  stack.mask = mask;
  stack.channel_order.assign(kInputChannels.begin(), kInputChannels.end());
  stack.order_checksum = channel_order_checksum(stack.channel_order);
  return stack;
}

InputStack assemble_input(const std::vector<std::pair<std::string, Image>>& named,
                          const Image& mask) {
  if (named.size() != kInputChannels.size()) {
    throw std::invalid_argument("assemble_input: expected 4 named channels");
  }
  std::vector<std::string> order;
  for (const auto& [name, img] : named) order.push_back(name);
  const std::vector<std::string> canonical(kInputChannels.begin(), kInputChannels.end());
  if (channel_order_checksum(order) != channel_order_checksum(canonical)) {
    throw std::invalid_argument("assemble_input: channel order checksum mismatch");
  }
  return assemble_input(named[0].second, {named[1].second, named[2].second, named[3].second}, mask);
}

InputStack make_input(const ParameterVector& pv, const GridSpec& grid,
                      const ParameterBounds& bounds, double die_spacing, std::uint64_t seed) {
  const Image die = rasterize_die(die_point_cloud(pv, die_spacing, seed), grid);
  const Image mask = rasterize_blank(blank_outline(pv), grid);
  InputStack stack = assemble_input(die, scalar_channels(mask, pv, bounds), mask);
  stack.grid = grid;
  return stack;
}

ImageD stack_plane(const StackArray& stack, int c, int n) {
  if (c < 0 || c >= stack.rows() || stack.cols() != static_cast<Eigen::Index>(n) * n) {
    throw std::invalid_argument("stack plane out of range");
  }
  ImageD img(n, n);
  for (Eigen::Index k = 0; k < img.size(); ++k) img.data()[k] = stack(c, k);
  return img;
}

}  // namespace formcast
