#ifndef FORMCAST_PIPELINE_HPP
#define FORMCAST_PIPELINE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "formcast/grid.hpp"
#include "formcast/oracle.hpp"
#include "formcast/params.hpp"
#include "formcast/raster_input.hpp"
#include "formcast/raster_target.hpp"
#include "json.hpp"

namespace formcast {

/// Everything needed to turn a parameter vector into a training pair.
struct PipelineConfig {
  GridSpec grid;
  ParameterBounds bounds = ParameterBounds::standard();
  OracleConfig oracle;
  ClipThresholds clip;
  double die_spacing = 0.0;   ///< mm, die point cloud; 0 = grid pitch
  double mesh_spacing = 6.0;  ///< mm, oracle blank mesh

  double effective_die_spacing() const { return die_spacing > 0.0 ? die_spacing : grid.pitch(); }
  void check() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static PipelineConfig from_json(const nlohmann::json& j);
};

struct Sample {
  std::string id;
  ParameterVector params;
  InputStack input;
  TargetStack target;
};

/// Oracle plus both rasterizers for one design.
Sample make_sample(const std::string& id, const ParameterVector& pv, const PipelineConfig& cfg,
                   std::uint64_t seed);

std::string sample_id(std::size_t index);

struct Dataset {
  nlohmann::json manifest;
  std::vector<Sample> samples;
};

/// Worker count: FORMCAST_THREADS if set (>= 1), else the hardware concurrency.
unsigned worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. The first
/// exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Samples for the given designs, computed in parallel; sample i uses a seed
/// derived from (seed, i), so the result does not depend on the worker count.
Dataset generate_dataset(const std::vector<ParameterVector>& designs, const PipelineConfig& cfg,
                         std::uint64_t seed);

/// LHS design of n samples followed by generate_dataset.
Dataset generate_dataset(std::size_t n, const PipelineConfig& cfg, std::uint64_t seed);

/// Writes manifest.json and one <id>.fqt per sample (input, mask, thinning,
/// displacement).
void save_dataset(const Dataset& ds, const std::string& dir);
/// Throws std::runtime_error if the directory or any listed file is missing.
Dataset load_dataset(const std::string& dir);

PipelineConfig pipeline_config_of(const Dataset& ds);

}  // namespace formcast

#endif  // FORMCAST_PIPELINE_HPP
