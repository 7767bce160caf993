#ifndef FORMCAST_ORACLE_HPP
#define FORMCAST_ORACLE_HPP

#include <Eigen/Core>

#include <cstdint>

#include "formcast/geometry.hpp"
#include "formcast/params.hpp"
#include "json.hpp"

namespace formcast {

/// Synthetic forming response. Thinning is positive, thickening negative.
struct FormingResult {
  Points3 nodes_final;
  Points3 displacements;
  QuadConnectivity elements;
  Eigen::VectorXd elemental_thinning;

  Points3 undeformed() const { return nodes_final - displacements; }
};

/// Coefficients of the synthetic oracle. Defaults reproduce the qualitative
/// trends only (thinning grows with temperature, falls with speed and punch
/// radius; flange ripples appear once the spacer gap opens).
struct OracleConfig {
  double draw_in_gain = 0.25;        ///< k_d
  double peak_thinning = 0.18;       ///< thinning peak at the reference punch radius
  double peak_reference_radius = 15.0;
  double corner_gain = 0.8;          ///< c_c
  double hoop_thickening = 0.12;     ///< t_hoop
  int wrinkle_waves = 12;            ///< n_w
  double wrinkle_gain = 0.9;
  double wrinkle_gap_offset = 0.5;   ///< mm of free gap before ripples start
  double wrinkle_ramp = 30.0;        ///< mm over which ripples grow into the flange
  double sidewall_gain = 0.05;       ///< thinning per mm of ripple amplitude

  nlohmann::json to_json() const;
  static OracleConfig from_json(const nlohmann::json& j);
};

/// Blank sheet thickness (mm), the same for every sample.
double blank_thickness();

double temperature_factor(double t_init);
double speed_factor(double speed);
/// Ripple amplitude (mm) from the spacer gap.
double wrinkle_amplitude(const ParameterVector& pv, const OracleConfig& cfg = {});

/// Deterministic forming result on a quad mesh of the flat blank with 2x
/// refinement through the band |s0| <= r_die + r_punch + w_wall. The seed
/// jitters interior node positions.
FormingResult simulate(const ParameterVector& pv, double spacing, std::uint64_t seed,
                       const OracleConfig& cfg = {});

}  // namespace formcast

#endif  // FORMCAST_ORACLE_HPP
