#ifndef FORMCAST_TRAIN_HPP
#define FORMCAST_TRAIN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "formcast/fqt.hpp"
#include "formcast/optim.hpp"
#include "formcast/pipeline.hpp"
#include "formcast/resseunet.hpp"
#include "json.hpp"

namespace formcast {

enum class TargetKind { thinning, displacement };

int target_channels(TargetKind kind);
std::string to_string(TargetKind kind);
TargetKind target_kind_from(const std::string& name);

/// Network-ready tensors for a list of samples.
struct SampleTensors {
  std::vector<std::string> ids;
  nn::Tensor<float> inputs;   ///< (N, 4, n, n)
  nn::Tensor<float> targets;  ///< (N, C, n, n)
  std::vector<Image> masks;

  Eigen::Index size() const { return static_cast<Eigen::Index>(ids.size()); }
  SampleTensors subset(const std::vector<Eigen::Index>& rows) const;
};

SampleTensors to_tensors(const std::vector<Sample>& samples, TargetKind kind);
SampleTensors to_tensors(const Dataset& ds, const std::vector<std::size_t>& indices, TargetKind kind);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, n); the first round(test_frac * n) indices form the
/// test set.
Split split_indices(std::size_t n, double test_frac, std::uint64_t seed);

struct TrainConfig {
  int epochs = 1500;
  int batch_size = 20;
  int patience = 100;            ///< epochs without test improvement before stopping
  std::int64_t max_steps = 0;    ///< optimizer steps cap, 0 = none
  double target_loss = 0.0;      ///< stop once the epoch train loss is below this, 0 = off
  std::uint64_t seed = 0;        ///< batch shuffling
  nn::AdamConfig adam;
  std::string checkpoint_path;   ///< best-test checkpoint, written when non-empty
  bool verbose = false;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainRun {
  std::vector<double> train_loss;  ///< per epoch
  std::vector<double> test_loss;   ///< per epoch, NaN without a test set
  int best_epoch = -1;
  double best_test_loss = 0.0;
  std::int64_t steps = 0;
  double wall_seconds = 0.0;
  std::string stop_reason;
  std::string checkpoint;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

/// Owns the optimizer of one network; one call of run_epoch is one pass over
/// the training set in seeded random batches.
class Trainer {
 public:
  Trainer(nn::ResSEUNet<float>& net, TrainConfig cfg);

  /// Mean training MSE over the epoch (batches weighted by size).
  double run_epoch(const SampleTensors& train);
  int epoch() const { return epoch_; }
  std::int64_t steps() const { return adam_.steps(); }
  bool step_limit_reached() const;

  /// Network weights, BN statistics, Adam moments and the epoch counter.
  Checkpoint checkpoint(const nlohmann::json& meta = nlohmann::json::object()) const;
  /// Restores a state produced by checkpoint().
  void resume(const Checkpoint& ck);

 private:
  nn::ResSEUNet<float>& net_;
  TrainConfig cfg_;
  std::vector<std::pair<std::string, nn::Var<float>>> params_;
  nn::Adam<float> adam_;
  int epoch_ = 0;
};

/// Eval-mode MSE over every pixel (the training loss), averaged over samples.
double evaluate_loss(const nn::ResSEUNet<float>& net, const SampleTensors& set);

/// One input stack as a (1, 4, n, n) batch.
nn::Tensor<float> input_tensor(const InputStack& stack);

/// Channel c of sample i of an (N, C, n, n) tensor as a double image.
ImageD channel_image(const nn::Tensor<float>& t, Eigen::Index i, Eigen::Index c);

/// Eval-mode predictions, (N, C, n, n).
nn::Tensor<float> predict_batch(const nn::ResSEUNet<float>& net, const nn::Tensor<float>& inputs);

/// Training loop with best-test checkpointing and early stopping. When
/// `resume_from` is given, training continues from that state.
TrainRun train(nn::ResSEUNet<float>& net, const SampleTensors& train_set, const SampleTensors& test_set,
               const TrainConfig& cfg, const Checkpoint* resume_from = nullptr);

}  // namespace formcast

#endif  // FORMCAST_TRAIN_HPP
