#include "formcast/scatter_interp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <boost/polygon/voronoi.hpp>

namespace formcast {

namespace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using RPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using RValue = std::pair<RPoint, Eigen::Index>;

// Voronoi construction runs on integer input; 2^-16 mm resolution.
constexpr double kQuantum = 65536.0;
constexpr double kMaxCoord = 30000.0;

std::int32_t quantize(double v) {
  if (!std::isfinite(v) || std::abs(v) > kMaxCoord) {
    throw std::invalid_argument("triangulation: coordinate out of supported range");
  }
  return static_cast<std::int32_t>(std::llround(v * kQuantum));
}

double cross(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

}  // namespace

Triangulation delaunay(const Points2& xy) {
  const Eigen::Index n = xy.cols();
  std::vector<std::pair<std::int32_t, std::int32_t>> q(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) q[i] = {quantize(xy(0, i)), quantize(xy(1, i))};

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return q[a] < q[b]; });

  Triangulation tri;
  tri.source_of.assign(static_cast<std::size_t>(n), 0);
  std::vector<boost::polygon::point_data<std::int32_t>> sites;
  std::vector<Point2> unique;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Eigen::Index i = order[k];
    if (k == 0 || q[i] != q[order[k - 1]]) {
      sites.emplace_back(q[i].first, q[i].second);
      unique.emplace_back(xy.col(i));
    }
    tri.source_of[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(unique.size()) - 1;
  }
  if (unique.size() < 3) throw std::invalid_argument("triangulation: fewer than 3 distinct points");

  tri.points.resize(2, static_cast<Eigen::Index>(unique.size()));
  for (std::size_t k = 0; k < unique.size(); ++k) tri.points.col(static_cast<Eigen::Index>(k)) = unique[k];

  boost::polygon::voronoi_diagram<double> vd;
  boost::polygon::construct_voronoi(sites.begin(), sites.end(), &vd);

  // Each Voronoi vertex is dual to a Delaunay cell; cells of degree > 3
  // (co-circular sites) are fan-triangulated.
  std::vector<Eigen::Vector3i> faces;
  std::vector<int> ring;
  for (const auto& v : vd.vertices()) {
    ring.clear();
    const auto* e = v.incident_edge();
    do {
      ring.push_back(static_cast<int>(e->cell()->source_index()));
      e = e->rot_next();
    } while (e != v.incident_edge());
    for (std::size_t k = 1; k + 1 < ring.size(); ++k) {
      Eigen::Vector3i f(ring[0], ring[k], ring[k + 1]);
      const double area = cross(unique[f[0]], unique[f[1]], unique[f[2]]);
      if (area == 0.0) continue;
      if (area < 0.0) std::swap(f[1], f[2]);
      faces.push_back(f);
    }
  }
  if (faces.empty()) throw std::invalid_argument("triangulation: degenerate (collinear) point set");

  tri.triangles.resize(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t k = 0; k < faces.size(); ++k) tri.triangles.col(static_cast<Eigen::Index>(k)) = faces[k];
  return tri;
}

GridInterpolator::GridInterpolator(const Points2& xy, const GridSpec& grid)
    : grid_(grid), tri_(delaunay(xy)) {
  grid_.check();
  const int n = grid_.n_pixels;
  const Eigen::Index pixels = static_cast<Eigen::Index>(n) * n;
  multiplicity_.assign(static_cast<std::size_t>(tri_.points.cols()), 0);
  for (Eigen::Index u : tri_.source_of) ++multiplicity_[static_cast<std::size_t>(u)];

  vertex_.setConstant(3, pixels, -1);
  weight_.setZero(3, pixels);
  const double pitch = grid_.pitch();

  for (Eigen::Index t = 0; t < tri_.triangles.cols(); ++t) {
    const Point2 a = tri_.points.col(tri_.triangles(0, t));
    const Point2 b = tri_.points.col(tri_.triangles(1, t));
    const Point2 c = tri_.points.col(tri_.triangles(2, t));
    const double area = cross(a, b, c);
    if (!(area > 0.0)) continue;
    const double x_lo = std::min({a.x(), b.x(), c.x()}), x_hi = std::max({a.x(), b.x(), c.x()});
    const double y_lo = std::min({a.y(), b.y(), c.y()}), y_hi = std::max({a.y(), b.y(), c.y()});
    const int i0 = std::max(0, static_cast<int>(std::ceil(x_lo / pitch - 0.5)));
    const int i1 = std::min(n - 1, static_cast<int>(std::floor(x_hi / pitch - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::ceil(y_lo / pitch - 0.5)));
    const int j1 = std::min(n - 1, static_cast<int>(std::floor(y_hi / pitch - 0.5)));
    const double tol = -1e-12 * area;
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const Eigen::Index pix = static_cast<Eigen::Index>(j) * n + i;
        if (vertex_(0, pix) >= 0) continue;
        const Point2 p(grid_.center(i), grid_.center(j));
        const double wa = cross(b, c, p), wb = cross(c, a, p), wc = cross(a, b, p);
        if (wa < tol || wb < tol || wc < tol) continue;
        vertex_.col(pix) = tri_.triangles.col(t).cast<Eigen::Index>();
        weight_.col(pix) = Eigen::Vector3d(wa, wb, wc) / area;
      }
    }
  }

  std::vector<RValue> entries;
  entries.reserve(static_cast<std::size_t>(tri_.points.cols()));
  for (Eigen::Index k = 0; k < tri_.points.cols(); ++k) {
    entries.emplace_back(RPoint(tri_.points(0, k), tri_.points(1, k)), k);
  }
  const bgi::rtree<RValue, bgi::quadratic<16>> tree(entries.begin(), entries.end());
  for (Eigen::Index pix = 0; pix < pixels; ++pix) {
    if (vertex_(0, pix) >= 0) continue;
    const int i = static_cast<int>(pix % n), j = static_cast<int>(pix / n);
    std::vector<RValue> hit;
    tree.query(bgi::nearest(RPoint(grid_.center(i), grid_.center(j)), 1), std::back_inserter(hit));
    vertex_.col(pix).setConstant(hit.front().second);
    weight_.col(pix) = Eigen::Vector3d(1.0, 0.0, 0.0);
    ++fallback_;
  }
}

ImageD GridInterpolator::apply(const Eigen::VectorXd& values) const {
  if (values.size() != static_cast<Eigen::Index>(tri_.source_of.size())) {
    throw std::invalid_argument("interpolation: one value per input point required");
  }
  Eigen::VectorXd merged = Eigen::VectorXd::Zero(tri_.points.cols());
  for (std::size_t i = 0; i < tri_.source_of.size(); ++i) merged[tri_.source_of[i]] += values[static_cast<Eigen::Index>(i)];
  for (Eigen::Index k = 0; k < merged.size(); ++k) merged[k] /= multiplicity_[static_cast<std::size_t>(k)];

  const int n = grid_.n_pixels;
  ImageD out(n, n);
  for (Eigen::Index pix = 0; pix < vertex_.cols(); ++pix) {
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (weight_(k, pix) != 0.0) acc += weight_(k, pix) * merged[vertex_(k, pix)];
    }
    out(pix / n, pix % n) = acc;
  }
  return out;
}

}  // namespace formcast
