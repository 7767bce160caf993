#include "formcast/params.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace formcast {

namespace {

constexpr double kStratumGuard = 1e-9;

std::size_t idx(Param p) { return static_cast<std::size_t>(p); }

bool wall_ok(double r_die, double r_punch, double h_design) {
  return h_design >= r_die + r_punch + kWallMargin;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

ParamArray ParameterVector::to_array() const {
  ParamArray a;
  a << r_die, r_punch, r_plan, h_design, a_scale, b_scale, t_spacer, t_init, speed;
  return a;
}

ParameterVector ParameterVector::from_array(const ParamArray& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
}

double& ParameterVector::operator[](Param p) {
  switch (p) {
    case Param::r_die: return r_die;
    case Param::r_punch: return r_punch;
    case Param::r_plan: return r_plan;
    case Param::h_design: return h_design;
    case Param::a_scale: return a_scale;
    case Param::b_scale: return b_scale;
    case Param::t_spacer: return t_spacer;
    case Param::t_init: return t_init;
    case Param::speed: return speed;
  }
  throw std::out_of_range("unknown parameter");
}

double ParameterVector::operator[](Param p) const {
  return const_cast<ParameterVector&>(*this)[p];
}

ParameterBounds ParameterBounds::standard() {
  ParameterBounds b;
  b.lower << 5, 5, 60, 60, 0.9, 0.1, 2, 350, 50;
  b.upper << 25, 25, 120, 120, 1.1, 1.1, 10, 500, 500;
  return b;
}

void ParameterBounds::check() const {
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (!(lower[i] < upper[i])) {
      throw std::invalid_argument("bounds for " + std::string(kParamNames[i]) +
                                  " must satisfy lower < upper");
    }
  }
}

ValidationReport validate(const ParameterVector& pv, const ParameterBounds& bounds) {
  ValidationReport report;
  const ParamArray a = pv.to_array();
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (!std::isfinite(a[i]) || a[i] < bounds.lower[i] || a[i] > bounds.upper[i]) {
      report.violations.push_back(std::string(kParamNames[i]) + " out of range [" +
                                  fmt(bounds.lower[i]) + ", " + fmt(bounds.upper[i]) + "]");
    }
  }
  if (!wall_ok(pv.r_die, pv.r_punch, pv.h_design)) {
    report.violations.push_back("wall constraint: h_design must be >= r_die + r_punch + " +
                                fmt(kWallMargin));
  }
  return report;
}

ParamArray to_unit(const ParameterVector& pv, const ParameterBounds& bounds) {
  const ParamArray a = pv.to_array();
  ParamArray u;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (!(a[i] >= bounds.lower[i] && a[i] <= bounds.upper[i])) {
      throw std::out_of_range(std::string(kParamNames[i]) + " = " + fmt(a[i]) +
                              " lies outside its bounds");
    }
    u[i] = (a[i] - bounds.lower[i]) / bounds.span(i);
  }
  return u;
}

ParameterVector from_unit(const ParamArray& unit, const ParameterBounds& bounds) {
  ParamArray a;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (!(unit[i] >= 0.0 && unit[i] <= 1.0)) {
      throw std::out_of_range("unit coordinate " + std::string(kParamNames[i]) +
                              " outside [0, 1]");
    }
    a[i] = bounds.lower[i] + unit[i] * bounds.span(i);
  }
  return ParameterVector::from_array(a);
}

std::vector<ParameterVector> lhs_sample(std::size_t n, const ParameterBounds& bounds,
                                        std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("lhs_sample: empty request (n = 0)");
  bounds.check();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(kStratumGuard, 1.0 - kStratumGuard);

  // strata(i, d) is the stratum index of sample i in dimension d.
  Eigen::Matrix<std::size_t, Eigen::Dynamic, kParamCount> strata(n, kParamCount);
  Eigen::Matrix<double, Eigen::Dynamic, kParamCount> values(n, kParamCount);
  std::vector<std::size_t> perm(n);
  for (std::size_t d = 0; d < kParamCount; ++d) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      strata(i, d) = perm[i];
      const double u = (static_cast<double>(perm[i]) + jitter(rng)) / static_cast<double>(n);
      values(i, d) = bounds.lower[d] + u * bounds.span(d);
    }
  }

  const auto stratum_edges = [&](std::size_t i, std::size_t d) {
    const double w = bounds.span(d) / static_cast<double>(n);
    const double lo = bounds.lower[d] + static_cast<double>(strata(i, d)) * w;
    return std::pair{lo + kStratumGuard * w, lo + (1.0 - kStratumGuard) * w};
  };
  const auto draw_in = [&](double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  };
  const std::size_t die = idx(Param::r_die), punch = idx(Param::r_punch),
                    height = idx(Param::h_design);
  const auto feasible = [&](std::size_t i) {
    return wall_ok(values(i, die), values(i, punch), values(i, height));
  };

  // Swapping one coordinate between two samples keeps every stratum occupied once.
  const auto try_swap = [&](std::size_t i, std::size_t d) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      std::swap(values(i, d), values(j, d));
      if (feasible(i) && feasible(j)) {
        std::swap(strata(i, d), strata(j, d));
        return true;
      }
      std::swap(values(i, d), values(j, d));
    }
    return false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (feasible(i)) continue;
    const double rd = values(i, die), rp = values(i, punch), h = values(i, height);

    auto [h_lo, h_hi] = stratum_edges(i, height);
    if (h_hi >= rd + rp + kWallMargin) {
      values(i, height) = draw_in(std::max(h_lo, rd + rp + kWallMargin), h_hi);
      continue;
    }
    auto [d_lo, d_hi] = stratum_edges(i, die);
    if (d_lo <= h - rp - kWallMargin) {
      values(i, die) = draw_in(d_lo, std::min(d_hi, h - rp - kWallMargin));
      continue;
    }
    auto [p_lo, p_hi] = stratum_edges(i, punch);
    if (p_lo <= h - rd - kWallMargin) {
      values(i, punch) = draw_in(p_lo, std::min(p_hi, h - rd - kWallMargin));
      continue;
    }
    if (try_swap(i, height) || try_swap(i, die) || try_swap(i, punch)) continue;
    throw std::runtime_error("lhs_sample: cannot satisfy the wall constraint within strata");
  }

  std::vector<ParameterVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(ParameterVector::from_array(values.row(static_cast<Eigen::Index>(i)).transpose()));
  }
  return out;
}

nlohmann::json to_json(const ParameterVector& pv) {
  nlohmann::json j = nlohmann::json::object();
  const ParamArray a = pv.to_array();
  for (std::size_t i = 0; i < kParamCount; ++i) j[std::string(kParamNames[i])] = a[i];
  return j;
}

ParameterVector parameter_vector_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("parameter vector must be a JSON object");
  ParamArray a;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const std::string key(kParamNames[i]);
    if (!j.contains(key) || !j.at(key).is_number()) {
      throw std::invalid_argument("missing numeric parameter '" + key + "'");
    }
    a[i] = j.at(key).get<double>();
  }
  return ParameterVector::from_array(a);
}

nlohmann::json to_json(const ParameterBounds& b) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < kParamCount; ++i) {
    j[std::string(kParamNames[i])] = {b.lower[i], b.upper[i]};
  }
  return j;
}

ParameterBounds parameter_bounds_from_json(const nlohmann::json& j) {
  ParameterBounds b = ParameterBounds::standard();
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const std::string key(kParamNames[i]);
    if (!j.contains(key)) continue;
    const auto& pair = j.at(key);
    if (!pair.is_array() || pair.size() != 2) {
      throw std::invalid_argument("bounds for '" + key + "' must be [lower, upper]");
    }
    b.lower[i] = pair[0].get<double>();
    b.upper[i] = pair[1].get<double>();
  }
  b.check();
  return b;
}

nlohmann::json doe_document(const std::vector<ParameterVector>& samples,
                            const ParameterBounds& bounds, std::uint64_t seed) {
  nlohmann::json doc;
  doc["seed"] = seed;
  doc["n"] = samples.size();
  doc["bounds"] = to_json(bounds);
  doc["samples"] = nlohmann::json::array();
  for (const auto& s : samples) doc["samples"].push_back(to_json(s));
  return doc;
}

}  // namespace formcast
