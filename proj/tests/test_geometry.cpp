#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "formcast/geometry.hpp"
#include "formcast/grid.hpp"

using namespace formcast;

TEST_SUITE("geometry") {
  TEST_CASE("blank outline dimensions follow the blank formula") {
    ParameterVector pv;
    pv.h_design = 60;
    pv.r_plan = 60;
    pv.a_scale = 1;
    pv.b_scale = 1;
    const BlankOutline o = blank_outline(pv);
    CHECK(o.half_length == doctest::Approx(610.0));
    CHECK(o.corner_radius == doctest::Approx(170.0));
    CHECK(o.vertices.row(0).maxCoeff() == doctest::Approx(610.0));
    CHECK(o.vertices.row(1).maxCoeff() == doctest::Approx(610.0));
  }

  TEST_CASE("zero corner radius gives a square corner") {
    const BlankOutline o = rounded_square_outline(600.0, 0.0);
    CHECK(o.polygon_area() == doctest::Approx(600.0 * 600.0).epsilon(1e-12));
    CHECK(o.contains(Point2(599.9, 599.9)));
    CHECK_FALSE(o.contains(Point2(600.1, 300.0)));
  }

  TEST_CASE("discretized outline area matches the closed-form area") {
    for (double r : {10.0, 100.0, 170.0, 400.0}) {
      const BlankOutline o = rounded_square_outline(610.0, r);
      const double exact = 610.0 * 610.0 - (1.0 - std::numbers::pi / 4.0) * r * r;
      CHECK(o.exact_area() == doctest::Approx(exact).epsilon(1e-12));
      CHECK(std::abs(o.polygon_area() - exact) / exact < 1e-3);
    }
  }

  TEST_CASE("outline containment near the rounded corner") {
    const BlankOutline o = rounded_square_outline(600.0, 200.0);
    const Point2 c(400.0, 400.0);
    const Point2 diag(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));
    CHECK(o.contains(c + 190.0 * diag));
    CHECK_FALSE(o.contains(c + 210.0 * diag));
    CHECK(o.contains(Point2(0.0, 0.0)));
  }

  TEST_CASE("rounded square signed distance") {
    CHECK(rounded_square_distance(Point2(0, 0), 500, 90) == doctest::Approx(-500));
    CHECK(rounded_square_distance(Point2(600, 0), 500, 90) == doctest::Approx(100));
    CHECK(rounded_square_distance(Point2(500, 10), 500, 90) == doctest::Approx(0).epsilon(1e-12));
    const Point2 center(410, 410);
    const Point2 diag(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));
    CHECK(rounded_square_distance(center + 100 * diag, 500, 90) == doctest::Approx(10));
    const Point2 in = rounded_square_inward(center + 100 * diag, 500, 90);
    CHECK(in.x() == doctest::Approx(-diag.x()));
    CHECK(in.y() == doctest::Approx(-diag.y()));
  }

  TEST_CASE("die profile plateau, flange and knots") {
    ParameterVector pv;
    pv.r_die = 12;
    pv.r_punch = 18;
    pv.h_design = 80;
    const DieProfile d = DieProfile::from(pv);
    CHECK(d.height(Point2(10, 10)) == 80.0);
    CHECK(d.height(Point2(700, 700)) == 0.0);
    CHECK(d.height_at(d.w_wall + d.r_die) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.height_at(d.w_wall) == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(d.height_at(0.0) == doctest::Approx(80.0 - 18.0).epsilon(1e-12));
    CHECK(d.height_at(-18.0) == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(die_height(10, 10, pv) == 80.0);
    // Monotone non-increasing along s.
    double prev = d.height_at(-40);
    for (double s = -40; s <= 40; s += 0.01) {
      const double z = d.height_at(s);
      CHECK(z <= prev + 1e-12);
      prev = z;
    }
  }

  TEST_CASE("die profile rejects a missing wall") {
    ParameterVector pv;
    pv.r_die = 25;
    pv.r_punch = 25;
    pv.h_design = 49;
    CHECK_THROWS_AS(DieProfile::from(pv), std::invalid_argument);
  }

  TEST_CASE("die point cloud range, density and determinism") {
    ParameterVector pv;
    pv.r_die = 10;
    pv.r_punch = 10;
    pv.h_design = 70;
    const double spacing = 8.0;
    const Points3 a = die_point_cloud(pv, spacing, 3);
    const Points3 b = die_point_cloud(pv, spacing, 3);
    REQUIRE(a.cols() == b.cols());
    CHECK((a.array() == b.array()).all());
    CHECK(a.row(2).minCoeff() >= 0.0);
    CHECK(a.row(2).maxCoeff() <= pv.h_design);
    CHECK(a.row(0).minCoeff() >= 0.0);
    CHECK(a.row(0).maxCoeff() <= kFrameMm);

    // Node density in the refined band against the flange, areas by fine sampling.
    const DieProfile d = DieProfile::from(pv);
    const double band = d.band_half_width();
    double band_area = 0, flange_area = 0;
    const double h = 0.5;
    for (double y = h / 2; y < kFrameMm; y += h) {
      for (double x = h / 2; x < kFrameMm; x += h) {
        const double s = d.distance(Point2(x, y));
        if (std::abs(s) <= band) band_area += h * h;
        else if (s > band) flange_area += h * h;
      }
    }
    double band_nodes = 0, flange_nodes = 0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      const double s = d.distance(a.col(i).head<2>());
      if (std::abs(s) <= band) ++band_nodes;
      else if (s > band) ++flange_nodes;
    }
    CHECK(band_nodes / band_area >= 2.0 * flange_nodes / flange_area);
    CHECK_THROWS_AS(die_point_cloud(pv, 0.0), std::invalid_argument);
  }

  TEST_CASE("fqm mesh round trip") {
    Points3 nodes(3, 4);
    nodes << 0, 1, 1, 0, 0, 0, 1, 1, 0.5, 0.25, 0.125, 1e-7;
    QuadConnectivity el(4, 1);
    el << 0, 1, 2, 3;
    std::stringstream ss;
    write_fqm(ss, nodes, el);
    const FqmMesh m = read_fqm(ss);
    CHECK((m.nodes.array() == nodes.array()).all());
    CHECK((m.elements.array() == el.array()).all());
  }
}
