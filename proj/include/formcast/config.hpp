#ifndef FORMCAST_CONFIG_HPP
#define FORMCAST_CONFIG_HPP

#include <cstdint>
#include <string>

#include "formcast/pipeline.hpp"
#include "formcast/resseunet.hpp"
#include "formcast/train.hpp"
#include "json.hpp"

namespace formcast {

/// Everything the command-line tool needs from a config file.
struct ToolkitConfig {
  PipelineConfig pipeline;
  nn::NetConfig net;  ///< out_channels is set per target kind
  TrainConfig train;
  std::uint64_t seed = 0;

  /// Grid and network resolution together.
  void set_resolution(int n);
  nn::NetConfig net_for(TargetKind kind) const;

  nlohmann::json to_json() const;
  /// Requires grid, bounds, oracle, clip_thresholds, net and seed; train,
  /// die_spacing and mesh_spacing are optional. Unknown keys are rejected.
  static ToolkitConfig from_json(const nlohmann::json& j);
  static ToolkitConfig load(const std::string& path);
};

}  // namespace formcast

#endif  // FORMCAST_CONFIG_HPP
