#ifndef FORMCAST_PARAMS_HPP
#define FORMCAST_PARAMS_HPP

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace formcast {

inline constexpr std::size_t kParamCount = 9;

using ParamArray = Eigen::Matrix<double, kParamCount, 1>;

/// Field order used by every array/JSON view of a ParameterVector.
inline constexpr std::array<std::string_view, kParamCount> kParamNames = {
    "r_die", "r_punch", "r_plan", "h_design", "a_scale",
    "b_scale", "t_spacer", "t_init", "speed"};

enum class Param : std::size_t {
  r_die = 0,
  r_punch,
  r_plan,
  h_design,
  a_scale,
  b_scale,
  t_spacer,
  t_init,
  speed
};

/// Design and process scalars of one shrink-corner sample.
/// Lengths in mm, temperature in degC, speed in mm/s, scales dimensionless.
struct ParameterVector {
  double r_die = 15.0;
  double r_punch = 15.0;
  double r_plan = 90.0;
  double h_design = 90.0;
  double a_scale = 1.0;
  double b_scale = 0.6;
  double t_spacer = 6.0;
  double t_init = 425.0;
  double speed = 275.0;

  ParamArray to_array() const;
  static ParameterVector from_array(const ParamArray& a);

  double& operator[](Param p);
  double operator[](Param p) const;

  bool operator==(const ParameterVector&) const = default;
};

struct ParameterBounds {
  ParamArray lower;
  ParamArray upper;

  /// Ranges used throughout the toolkit.
  static ParameterBounds standard();

  double span(std::size_t i) const { return upper[i] - lower[i]; }
  void check() const;
};

/// Minimum vertical wall segment required between die and punch radii (mm).
inline constexpr double kWallMargin = 10.0;

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const ParameterVector& pv,
                          const ParameterBounds& bounds = ParameterBounds::standard());

/// Affine map of each coordinate onto [0, 1]. Throws std::out_of_range when
/// a coordinate lies outside its bounds.
ParamArray to_unit(const ParameterVector& pv, const ParameterBounds& bounds);
ParameterVector from_unit(const ParamArray& unit, const ParameterBounds& bounds);

/// Latin hypercube design: every coordinate range is cut into n equal strata
/// holding exactly one sample each, with uniform jitter inside the stratum.
/// Samples violating the wall constraint are repaired without leaving their
/// strata.
std::vector<ParameterVector> lhs_sample(std::size_t n, const ParameterBounds& bounds,
                                        std::uint64_t seed);

nlohmann::json to_json(const ParameterVector& pv);
ParameterVector parameter_vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParameterBounds& b);
ParameterBounds parameter_bounds_from_json(const nlohmann::json& j);

/// DoE export document {seed, n, bounds, samples}.
nlohmann::json doe_document(const std::vector<ParameterVector>& samples,
                            const ParameterBounds& bounds, std::uint64_t seed);

}  // namespace formcast

#endif  // FORMCAST_PARAMS_HPP
