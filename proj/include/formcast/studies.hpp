#ifndef FORMCAST_STUDIES_HPP
#define FORMCAST_STUDIES_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "formcast/pipeline.hpp"
#include "formcast/resseunet.hpp"
#include "formcast/train.hpp"
#include "json.hpp"

namespace formcast {

struct SizeStudyConfig {
  std::vector<int> sizes{8, 16, 32, 64};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Shared by every run; set max_steps so all sizes get the same step budget.
  TrainConfig train;
  /// Called with every trained network before it is scored.
  std::function<void(int size, std::uint64_t seed, const nn::ResSEUNet<float>& net)> on_trained;
};

struct SizeStudyRow {
  int size = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;  ///< masked, averaged over the test samples
  double mre = 0.0;
  double wall_seconds = 0.0;
};

struct SizeStudySummary {
  int size = 0;
  double mean_mse = 0.0;
  double std_mse = 0.0;
  double mean_mre = 0.0;
  double std_mre = 0.0;
};

struct SizeStudyResult {
  std::vector<SizeStudyRow> rows;
  std::vector<SizeStudySummary> summary;  ///< one per size, in the order of the config

  /// "size,seed,mse,mre" plus one line per run.
  std::string csv() const;
  nlohmann::json to_json() const;
};

/// Mean and sample standard deviation of the metric lists.
SizeStudySummary summarize(int size, const std::vector<SizeStudyRow>& rows);

/// Trains one thinning network per (size, seed) on `size` geometries drawn from
/// `pool` (a seeded shuffle, so subsets are nested for a given seed) and scores
/// it on `test`. Throws if a size is out of range or if any test geometry also
/// appears in the pool.
SizeStudyResult size_study(const Dataset& ds, const std::vector<std::size_t>& pool,
                           const std::vector<std::size_t>& test, const nn::NetConfig& net_cfg,
                           const SizeStudyConfig& cfg);

/// True when two designs share the die geometry (r_die, r_punch, r_plan, h_design).
bool same_geometry(const ParameterVector& a, const ParameterVector& b);

struct SweepFrame {
  double t_init = 0.0;
  double speed = 0.0;
  ImageD thinning;
};

struct SweepResult {
  std::vector<SweepFrame> frames;  ///< temperature-major, speeds in the given order
  Image mask;

  /// Largest in-mask pixel change between adjacent speeds of one temperature,
  /// divided by the in-mask value range over the whole sweep.
  double max_adjacent_change_ratio() const;
  nlohmann::json metadata() const;
};

/// Predicted thinning for every (temperature, speed) pair with the other
/// parameters held at `pv`. Speeds must be strictly monotone; `net` must be a
/// loaded one-channel network.
SweepResult speed_sweep(const ParameterVector& pv, const std::vector<double>& speeds,
                        const std::vector<double>& temps, const nn::ResSEUNet<float>* net,
                        const PipelineConfig& cfg);

}  // namespace formcast

#endif  // FORMCAST_STUDIES_HPP
