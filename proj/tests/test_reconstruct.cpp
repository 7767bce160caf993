#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "formcast/reconstruct.hpp"
#include "formcast/raster_target.hpp"

using namespace formcast;

namespace {

struct OracleCase {
  ParameterVector pv;
  GridSpec grid;
  FormingResult result;
  TargetStack target;
};

OracleCase oracle_case(double t_spacer, int n, double spacing) {
  OracleCase c;
  c.pv.t_spacer = t_spacer;
  c.grid.n_pixels = n;
  c.result = simulate(c.pv, spacing, 1);
  const Image mask = rasterize_blank(blank_outline(c.pv), c.grid);
  c.target = assemble_targets(c.result, mask, c.grid, {});
  return c;
}

// Closest point on triangle abc to p.
Eigen::Vector3d closest_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                    const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

// Distance from p to the surface of the quad mesh, each quad split in two.
double surface_distance(const AsFormedMesh& m, const Eigen::Vector3d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index f = 0; f < m.faces.cols(); ++f) {
    const Eigen::Vector3d v0 = m.vertices.col(m.faces(0, f)), v1 = m.vertices.col(m.faces(1, f));
    const Eigen::Vector3d v2 = m.vertices.col(m.faces(2, f)), v3 = m.vertices.col(m.faces(3, f));
    const Eigen::Vector3d lo = v0.cwiseMin(v1).cwiseMin(v2).cwiseMin(v3);
    const Eigen::Vector3d hi = v0.cwiseMax(v1).cwiseMax(v2).cwiseMax(v3);
    if ((p - p.cwiseMax(lo).cwiseMin(hi)).norm() >= best) continue;
    best = std::min({best, (p - closest_on_triangle(p, v0, v1, v2)).norm(), (p - closest_on_triangle(p, v0, v2, v3)).norm()});
  }
  return best;
}

}  // namespace

TEST_SUITE("reconstruct") {
  TEST_CASE("zero displacement gives the flat pixel grid") {
    const GridSpec grid{16};
    Image mask = Image::Zero(16, 16);
    mask.block(0, 0, 10, 12) = 1.0f;
    const StackArray disp = StackArray::Zero(3, 256);
    const StackArray thin = StackArray::Constant(1, 256, 0.1f);
    const AsFormedMesh m = as_formed_mesh(disp, thin, mask, grid);
    CHECK(m.vertices.cols() == 120);
    CHECK(m.faces.cols() == 9 * 11);
    CHECK(m.vertices.row(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.vertices(0, 0) == doctest::Approx(grid.center(0)));
    CHECK(m.vertices(1, 13) == doctest::Approx(grid.center(1)));
    CHECK(m.thinning.minCoeff() == doctest::Approx(0.1));
    // Counter-clockwise faces in the plane.
    for (Eigen::Index f = 0; f < m.faces.cols(); ++f) {
      double twice = 0;
      for (int k = 0; k < 4; ++k) {
        const auto a = m.vertices.col(m.faces(k, f));
        const auto b = m.vertices.col(m.faces((k + 1) % 4, f));
        twice += a.x() * b.y() - b.x() * a.y();
      }
      CHECK(twice > 0);
    }
    std::stringstream ss;
    write_fqm(ss, m);
    const FqmMesh back = read_fqm(ss);
    CHECK(back.nodes.cols() == 120);
    CHECK_THROWS(as_formed_mesh(disp, thin, Image::Zero(16, 16), grid));
  }

  TEST_CASE("uniform vertical displacement lifts a plane") {
    const GridSpec grid{16};
    const Image mask = Image::Ones(16, 16);
    StackArray disp = StackArray::Zero(3, 256);
    disp.row(2).setConstant(static_cast<float>(10.0 / kHeightScale));
    const AsFormedMesh m = as_formed_mesh(disp, StackArray::Zero(1, 256), mask, grid);
    CHECK(((m.vertices.row(2).array() - 10.0).abs() < 1e-5).all());
    CHECK(((formed_height(disp, mask, grid) - 10.0).abs() < 1e-5).all());
  }

  TEST_CASE("oracle targets reproduce the formed nodes") {
    // Distance to the reconstructed surface: the near-vertical wall falls
    // between two pixel rows, so vertices alone cannot sample it.
    const OracleCase c = oracle_case(6.0, 64, 6.0);
    const AsFormedMesh m = as_formed_mesh(c.target.displacement, c.target.thinning, c.target.mask, c.grid);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < c.result.nodes_final.cols(); ++i) {
      worst = std::max(worst, surface_distance(m, c.result.nodes_final.col(i)));
    }
    MESSAGE("worst node-to-surface distance " << worst << " mm, pitch " << c.grid.pitch() << " mm");
    CHECK(worst < 2.0 * c.grid.pitch());
  }

  TEST_CASE("wrinkle height of simple surfaces") {
    const int n = 64;
    const Image band = Image::Ones(n, n);
    CHECK((wrinkle_height(ImageD::Constant(n, n, 7.0), band, 15).abs() < 1e-12).all());

    // Sinusoid with a 4-pixel period under a 15-pixel window.
    const double a = 2.0;
    ImageD z(n, n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) z(r, c) = 30.0 + 0.1 * r + a * std::sin(2 * std::numbers::pi * c / 4.0 + 0.3);
    }
    const ImageD w = wrinkle_height(z, band, 15);
    const double recovered = w.block(10, 10, n - 20, n - 20).abs().maxCoeff();
    CHECK(std::abs(recovered - a) < 0.1 * a);

    CHECK_THROWS(wrinkle_height(z, band, 4));
    CHECK_THROWS(wrinkle_height(z, band, 1));
    CHECK_THROWS(wrinkle_height(z, band, 65));
  }

  TEST_CASE("smooth sample has no wrinkles") {
    const OracleCase c = oracle_case(2.0, 128, 4.0);
    const ImageD z = formed_height(c.target.displacement, c.target.mask, c.grid);
    const Image band = flange_band(c.pv, c.target.displacement, c.target.mask, c.grid);
    REQUIRE((band > 0.5f).count() > 0);
    CHECK(wrinkle_height(z, band).abs().maxCoeff() < 0.5);
    const ReconstructSummary s = summarize(c.target.displacement, c.target.thinning, c.target.mask, c.pv, c.grid);
    CHECK(s.wrinkle_count == 0);
  }

  TEST_CASE("wrinkled sample summary") {
    const OracleCase c = oracle_case(10.0, 128, 4.0);
    const ReconstructSummary s = summarize(c.target.displacement, c.target.thinning, c.target.mask, c.pv, c.grid);
    CHECK(s.max_wrinkle_height_mm > 1.0);
    CHECK(s.wrinkle_count == 3);
    CHECK(s.max_thinning > s.mean_thinning);
    const nlohmann::json j = s.to_json();
    CHECK(j["wrinkle_count"] == 3);
  }
}
