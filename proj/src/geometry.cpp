#include "formcast/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "formcast/grid.hpp"

namespace formcast {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

// Points along the quarter contour {s = level} of the punch outline, from the
// x axis to the y axis. Every level uses the same straight-edge positions and
// arc angles, so neighbouring contours pair up node by node.
void append_contour(std::vector<Eigen::Vector3d>& out, const DieProfile& die, double level,
                    double step, double outer_level) {
  const double straight = die.punch_half_width - die.r_plan;
  const double radius = die.r_plan + level;
  const double offset = die.punch_half_width + level;
  const int straight_segments = std::max(1, static_cast<int>(std::ceil(straight / step)));
  const int arc_segments =
      std::max(1, static_cast<int>(std::ceil(kHalfPi * (die.r_plan + outer_level) / step)));
  const double z = die.height_at(level);
  const auto emit = [&](Point2 p) {
    p = p.cwiseMax(0.0);
    out.emplace_back(p.x(), p.y(), z);
  };
  for (int k = 0; k < straight_segments; ++k) emit({offset, straight * k / straight_segments});
  for (int k = 0; k <= arc_segments; ++k) {
    const double phi = kHalfPi * k / arc_segments;
    emit({straight + radius * std::cos(phi), straight + radius * std::sin(phi)});
  }
  for (int k = straight_segments - 1; k >= 0; --k) emit({straight * k / straight_segments, offset});
}

}  // namespace

double rounded_square_distance(const Point2& p, double half_width, double corner_radius) {
  const Point2 q = p.cwiseAbs().array() - (half_width - corner_radius);
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0) - corner_radius;
}

Point2 rounded_square_inward(const Point2& p, double half_width, double corner_radius) {
  const Point2 q = p.cwiseAbs().array() - (half_width - corner_radius);
  const Point2 sign(p.x() < 0.0 ? -1.0 : 1.0, p.y() < 0.0 ? -1.0 : 1.0);
  Point2 grad;
  if (q.x() > 0.0 && q.y() > 0.0) {
    grad = q.normalized();
  } else if (q.x() >= q.y()) {
    grad = {1.0, 0.0};
  } else {
    grad = {0.0, 1.0};
  }
  return -grad.cwiseProduct(sign);
}

DieProfile DieProfile::from(const ParameterVector& pv) {
  DieProfile d{pv.r_die, pv.r_punch, pv.r_plan, pv.h_design};
  if (!(d.h_design - d.r_punch > d.r_die)) {
    throw std::invalid_argument("die profile needs h_design - r_punch > r_die");
  }
  if (d.r_plan > d.punch_half_width) {
    throw std::invalid_argument("die profile needs r_plan <= punch half-width");
  }
  return d;
}

double DieProfile::height_at(double s) const {
  if (s <= -r_punch) return h_design;
  if (s <= 0.0) {
    const double u = s + r_punch;
    return h_design - r_punch + std::sqrt(std::max(0.0, r_punch * r_punch - u * u));
  }
  if (s <= w_wall) {
    const double top = h_design - r_punch;
    return top + (r_die - top) * (s / w_wall);
  }
  if (s <= w_wall + r_die) {
    const double u = s - w_wall - r_die;
    return r_die - std::sqrt(std::max(0.0, r_die * r_die - u * u));
  }
  return 0.0;
}

double die_height(double x, double y, const ParameterVector& pv) {
  return DieProfile::from(pv).height({x, y});
}

double BlankOutline::polygon_area() const {
  double twice = 0.0;
  const Eigen::Index n = vertices.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point2 a = vertices.col(i);
    const Point2 b = vertices.col((i + 1) % n);
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(twice);
}

double BlankOutline::exact_area() const {
  return half_length * half_length - (1.0 - std::numbers::pi / 4.0) * corner_radius * corner_radius;
}

bool BlankOutline::contains(const Point2& p) const {
  const Eigen::Index n = vertices.cols();
  bool inside = false;
  for (Eigen::Index i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = vertices.col(i);
    const Point2 b = vertices.col(j);
    if (segment_distance(p, a, b) <= 1e-9) return true;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

BlankOutline rounded_square_outline(double half_length, double corner_radius) {
  if (!(corner_radius >= 0.0)) throw std::invalid_argument("negative blank corner radius");
  if (!(half_length > corner_radius)) {
    throw std::invalid_argument("degenerate blank outline: corner radius exceeds half-length");
  }
  std::vector<Point2> pts{{0.0, 0.0}, {half_length, 0.0}};
  if (corner_radius > 0.0) {
    constexpr int kArcSteps = 90;  // 1 degree
    const double c = half_length - corner_radius;
    for (int k = 0; k <= kArcSteps; ++k) {
      const double phi = kHalfPi * k / kArcSteps;
      pts.emplace_back(c + corner_radius * std::cos(phi), c + corner_radius * std::sin(phi));
    }
  } else {
    pts.emplace_back(half_length, half_length);
  }
  pts.emplace_back(0.0, half_length);

  BlankOutline out;
  out.half_length = half_length;
  out.corner_radius = corner_radius;
  out.vertices.resize(2, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) out.vertices.col(static_cast<Eigen::Index>(i)) = pts[i];
  return out;
}

BlankOutline blank_outline(const ParameterVector& pv) {
  const double l_blank = kPunchHalfWidth + pv.h_design + kFlangeWidth;
  const double r_blank = pv.r_plan + pv.h_design + kFlangeWidth;
  const double half_length = l_blank * pv.a_scale;
  const double radius = r_blank * pv.b_scale;
  if (radius > half_length) {
    throw std::invalid_argument("degenerate blank outline: r_blank*B exceeds L_blank*A");
  }
  if (half_length > kFrameMm) throw std::invalid_argument("blank outline exceeds the frame");
  return rounded_square_outline(half_length, radius);
}

Points3 die_point_cloud(const ParameterVector& pv, double spacing, std::uint64_t seed) {
  if (!(spacing > 0.0)) throw std::invalid_argument("point cloud spacing must be positive");
  if (spacing > kFrameMm) throw std::invalid_argument("point cloud spacing exceeds the frame");
  const DieProfile die = DieProfile::from(pv);
  const double band = die.band_half_width();
  const double fine = 0.5 * spacing;

  std::vector<Eigen::Vector3d> nodes;

  // Offset contours through the band: uniform levels at half spacing on the
  // flat parts, equal angle steps on the two fillets so the vertical tangents
  // are resolved. Nodes sit at full spacing along each contour.
  std::vector<double> levels;
  const auto uniform_levels = [&](double a, double b) {
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / fine)));
    for (int k = 0; k <= n; ++k) levels.push_back(a + (b - a) * k / n);
  };
  const auto fillet_steps = [&](double radius) {
    return std::max(8, static_cast<int>(std::ceil(kHalfPi * radius / fine)));
  };
  uniform_levels(-band, -die.r_punch);
  for (int k = 0, n = fillet_steps(die.r_punch); k <= n; ++k) {
    levels.push_back(-die.r_punch + die.r_punch * std::sin(kHalfPi * k / n));
  }
  uniform_levels(0.0, die.w_wall);
  for (int k = 0, n = fillet_steps(die.r_die); k <= n; ++k) {
    levels.push_back(die.w_wall + die.r_die - die.r_die * std::cos(kHalfPi * k / n));
  }
  uniform_levels(die.flange_start(), band);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-9; }),
               levels.end());
  for (double level : levels) append_contour(nodes, die, level, spacing, band);

  // Jittered scatter outside the band; frame-boundary nodes stay on the boundary.
  const int cells = static_cast<int>(std::ceil(kFrameMm / spacing));
  const double step = kFrameMm / cells;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.25 * step, 0.25 * step);
  for (int j = 0; j <= cells; ++j) {
    for (int i = 0; i <= cells; ++i) {
      Point2 p(i * step, j * step);
      const double jx = jitter(rng), jy = jitter(rng);
      if (i > 0 && i < cells) p.x() += jx;
      if (j > 0 && j < cells) p.y() += jy;
      const double s = die.distance(p);
      if (std::abs(s) <= band) continue;
      nodes.emplace_back(p.x(), p.y(), die.height_at(s));
    }
  }

  Points3 cloud(3, static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t k = 0; k < nodes.size(); ++k) cloud.col(static_cast<Eigen::Index>(k)) = nodes[k];
  return cloud;
}

void write_fqm(std::ostream& os, const Points3& nodes, const QuadConnectivity& elements) {
  os.precision(17);
  for (Eigen::Index i = 0; i < nodes.cols(); ++i) {
    os << "n " << i + 1 << ' ' << nodes(0, i) << ' ' << nodes(1, i) << ' ' << nodes(2, i) << '\n';
  }
  for (Eigen::Index e = 0; e < elements.cols(); ++e) {
    os << "e " << e + 1;
    for (int k = 0; k < 4; ++k) os << ' ' << elements(k, e) + 1;
    os << '\n';
  }
}

FqmMesh read_fqm(std::istream& is) {
  std::vector<Eigen::Vector3d> nodes;
  std::vector<Eigen::Vector4i> elems;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    char tag = 0;
    long id = 0;
    ls >> tag >> id;
    if (tag == 'n') {
      Eigen::Vector3d p;
      ls >> p.x() >> p.y() >> p.z();
      if (!ls || id != static_cast<long>(nodes.size()) + 1) {
        throw std::runtime_error("FQM: bad node record at line " + std::to_string(line_no));
      }
      nodes.push_back(p);
    } else if (tag == 'e') {
      Eigen::Vector4i c;
      ls >> c[0] >> c[1] >> c[2] >> c[3];
      if (!ls || id != static_cast<long>(elems.size()) + 1) {
        throw std::runtime_error("FQM: bad element record at line " + std::to_string(line_no));
      }
      elems.push_back(c.array() - 1);
    } else {
      throw std::runtime_error("FQM: unknown record at line " + std::to_string(line_no));
    }
  }
  FqmMesh mesh;
  mesh.nodes.resize(3, static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) mesh.nodes.col(static_cast<Eigen::Index>(i)) = nodes[i];
  mesh.elements.resize(4, static_cast<Eigen::Index>(elems.size()));
  for (std::size_t e = 0; e < elems.size(); ++e) {
    mesh.elements.col(static_cast<Eigen::Index>(e)) = elems[e];
    if ((elems[e].array() < 0).any() ||
        (elems[e].array() >= static_cast<int>(nodes.size())).any()) {
      throw std::runtime_error("FQM: element references an unknown node");
    }
  }
  return mesh;
}

}  // namespace formcast
