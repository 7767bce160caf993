#include "formcast/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace formcast {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1), a pure function of (seed, lattice position, axis).
double lattice_noise(std::uint64_t seed, long ix, long iy, int axis) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix(h ^ (static_cast<std::uint64_t>(iy) << 1));
  h = splitmix(h ^ static_cast<std::uint64_t>(axis));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

struct CornerFrame {
  Point2 center;
  // sin(2 theta) inside the plan-corner sector, 0 elsewhere.
  double proximity(const Point2& p) const {
    const Point2 d = p - center;
    if (d.x() <= 0.0 || d.y() <= 0.0) return 0.0;
    return 2.0 * d.x() * d.y() / d.squaredNorm();
  }
  bool in_sector(const Point2& p) const {
    const Point2 d = p - center;
    return d.x() >= 0.0 && d.y() >= 0.0;
  }
  double angle(const Point2& p) const {
    const Point2 d = p - center;
    return std::atan2(d.y(), d.x());
  }
};

}  // namespace

nlohmann::json OracleConfig::to_json() const {
  return {{"draw_in_gain", draw_in_gain},
          {"peak_thinning", peak_thinning},
          {"peak_reference_radius", peak_reference_radius},
          {"corner_gain", corner_gain},
          {"hoop_thickening", hoop_thickening},
          {"wrinkle_waves", wrinkle_waves},
          {"wrinkle_gain", wrinkle_gain},
          {"wrinkle_gap_offset", wrinkle_gap_offset},
          {"wrinkle_ramp", wrinkle_ramp},
          {"sidewall_gain", sidewall_gain}};
}

OracleConfig OracleConfig::from_json(const nlohmann::json& j) {
  OracleConfig c;
  c.draw_in_gain = j.value("draw_in_gain", c.draw_in_gain);
  c.peak_thinning = j.value("peak_thinning", c.peak_thinning);
  c.peak_reference_radius = j.value("peak_reference_radius", c.peak_reference_radius);
  c.corner_gain = j.value("corner_gain", c.corner_gain);
  c.hoop_thickening = j.value("hoop_thickening", c.hoop_thickening);
  c.wrinkle_waves = j.value("wrinkle_waves", c.wrinkle_waves);
  c.wrinkle_gain = j.value("wrinkle_gain", c.wrinkle_gain);
  c.wrinkle_gap_offset = j.value("wrinkle_gap_offset", c.wrinkle_gap_offset);
  c.wrinkle_ramp = j.value("wrinkle_ramp", c.wrinkle_ramp);
  c.sidewall_gain = j.value("sidewall_gain", c.sidewall_gain);
  return c;
}

double blank_thickness() { return 2.0; }

double temperature_factor(double t_init) { return 0.6 + 0.8 * (t_init - 350.0) / 150.0; }

double speed_factor(double speed) { return 1.3 - 0.6 * (speed - 50.0) / 450.0; }

double wrinkle_amplitude(const ParameterVector& pv, const OracleConfig& cfg) {
  return cfg.wrinkle_gain *
         std::max(0.0, pv.t_spacer - blank_thickness() - cfg.wrinkle_gap_offset);
}

FormingResult simulate(const ParameterVector& pv, double spacing, std::uint64_t seed,
                       const OracleConfig& cfg) {
  if (const auto report = validate(pv); !report.ok()) {
    throw std::invalid_argument("simulate: invalid parameters: " + report.violations.front());
  }
  if (!(spacing > 0.0)) throw std::invalid_argument("simulate: spacing must be positive");

  const DieProfile die = DieProfile::from(pv);
  const BlankOutline outline = blank_outline(pv);
  const double band = die.band_half_width();
  const double fine = 0.5 * spacing;
  const double jitter = 0.08 * spacing;

  // Node positions live on the fine lattice; coarse nodes sit on even indices.
  std::map<std::pair<long, long>, int> node_id;
  std::vector<Point2> positions;
  const auto node_at = [&](long ix, long iy) -> int {
    const auto key = std::pair{ix, iy};
    if (auto it = node_id.find(key); it != node_id.end()) return it->second;
    Point2 p(ix * fine, iy * fine);
    if (ix > 0) p.x() += jitter * lattice_noise(seed, ix, iy, 0);
    if (iy > 0) p.y() += jitter * lattice_noise(seed, ix, iy, 1);
    const int id = static_cast<int>(positions.size());
    positions.push_back(p);
    node_id.emplace(key, id);
    return id;
  };

  std::vector<Eigen::Vector4i> quads;
  const auto try_quad = [&](long ix, long iy, long step) {
    const Eigen::Vector4i q(node_at(ix, iy), node_at(ix + step, iy), node_at(ix + step, iy + step),
                            node_at(ix, iy + step));
    for (int k = 0; k < 4; ++k) {
      if (!outline.contains(positions[static_cast<std::size_t>(q[k])])) return;
    }
    quads.push_back(q);
  };

  const long cells = static_cast<long>(std::ceil(outline.half_length / spacing));
  const double refine_reach = band + spacing * std::numbers::sqrt2 / 2.0;
  for (long j = 0; j < cells; ++j) {
    for (long i = 0; i < cells; ++i) {
      const Point2 center((i + 0.5) * spacing, (j + 0.5) * spacing);
      if (std::abs(die.distance(center)) <= refine_reach) {
        for (long dj = 0; dj < 2; ++dj) {
          for (long di = 0; di < 2; ++di) try_quad(2 * i + di, 2 * j + dj, 1);
        }
      } else {
        try_quad(2 * i, 2 * j, 2);
      }
    }
  }
  if (quads.empty()) throw std::runtime_error("simulate: blank mesh is empty");

  // Keep only nodes referenced by an element, in first-use order.
  std::vector<int> remap(positions.size(), -1);
  std::vector<Point2> used;
  for (auto& q : quads) {
    for (int k = 0; k < 4; ++k) {
      int& r = remap[static_cast<std::size_t>(q[k])];
      if (r < 0) {
        r = static_cast<int>(used.size());
        used.push_back(positions[static_cast<std::size_t>(q[k])]);
      }
      q[k] = r;
    }
  }

  const double f_t = temperature_factor(pv.t_init);
  const double f_s = speed_factor(pv.speed);
  const double amplitude = wrinkle_amplitude(pv, cfg);
  const CornerFrame corner{Point2::Constant(die.punch_half_width - die.r_plan)};
  const double s_flange = die.flange_start();

  const auto ripple = [&](const Point2& p0, double s0) {
    if (amplitude <= 0.0 || s0 <= s_flange || !corner.in_sector(p0)) return 0.0;
    const double ramp = std::min(1.0, (s0 - s_flange) / cfg.wrinkle_ramp);
    return amplitude * std::sin(cfg.wrinkle_waves * corner.angle(p0)) * ramp;
  };

  FormingResult result;
  const auto n_nodes = static_cast<Eigen::Index>(used.size());
  result.nodes_final.resize(3, n_nodes);
  result.displacements.resize(3, n_nodes);
  for (Eigen::Index k = 0; k < n_nodes; ++k) {
    const Point2& p0 = used[static_cast<std::size_t>(k)];
    const double s0 = die.distance(p0);
    Point2 draw = Point2::Zero();
    if (s0 > 0.0) {
      const double g = cfg.draw_in_gain * pv.h_design * f_t * f_s * std::exp(-s0 / pv.h_design);
      draw = g * rounded_square_inward(p0, die.punch_half_width, die.r_plan);
    }
    const double z = die.height(p0 + draw) + ripple(p0, s0);
    result.displacements.col(k) << draw, z;
    result.nodes_final.col(k) << p0 + draw, z;
  }

  const double t_pk = cfg.peak_thinning * std::sqrt(cfg.peak_reference_radius / pv.r_punch);
  const double s_pk = -0.5 * pv.r_punch;
  const double sigma = pv.r_punch + pv.r_die;
  const auto n_elems = static_cast<Eigen::Index>(quads.size());
  result.elements.resize(4, n_elems);
  result.elemental_thinning.resize(n_elems);
  for (Eigen::Index e = 0; e < n_elems; ++e) {
    const Eigen::Vector4i& q = quads[static_cast<std::size_t>(e)];
    result.elements.col(e) = q;
    Point2 c = Point2::Zero();
    for (int k = 0; k < 4; ++k) c += used[static_cast<std::size_t>(q[k])];
    c /= 4.0;
    const double s = die.distance(c);
    const double prox = corner.proximity(c);
    const double x = (s - s_pk) / sigma;
    double t = t_pk * std::exp(-x * x) * f_t * f_s * (1.0 + cfg.corner_gain * prox);
    if (s > s_flange) t -= cfg.hoop_thickening * prox * std::min(1.0, (s - s_flange) / pv.h_design);
    if (amplitude > 0.0 && s > 0.0 && s < pv.r_die && corner.in_sector(c)) {
      const double wave = 0.5 + 0.5 * std::sin(cfg.wrinkle_waves * corner.angle(c));
      t += cfg.sidewall_gain * amplitude * std::sin(std::numbers::pi * s / pv.r_die) * wave;
    }
    // Soft saturation keeps |t| < 1 and preserves every monotone trend.
    result.elemental_thinning[e] = std::tanh(t);
  }
  return result;
}

}  // namespace formcast
