#ifndef FORMCAST_RESSEUNET_HPP
#define FORMCAST_RESSEUNET_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "formcast/autodiff.hpp"
#include "formcast/ops.hpp"
#include "formcast/tensor.hpp"
#include "json.hpp"

namespace formcast::nn {

struct LayerSpec {
  int out_channels;
  int kernel;
  int stride;
  int pad;
  bool transposed = false;
};

/// Res-SE-U-Net layout. The defaults are the full-size thinning network.
struct NetConfig {
  int resolution = 256;
  int in_channels = 4;
  std::array<LayerSpec, 4> encoder{{{16, 9, 1, 4}, {32, 8, 2, 3}, {64, 6, 2, 2}, {128, 4, 2, 1}}};
  int bottleneck_layers = 6;
  int se_reduction = 16;
  std::array<LayerSpec, 4> decoder{{{64, 4, 2, 1, true}, {32, 6, 2, 2, true}, {16, 8, 2, 3, true}, {8, 5, 1, 2}}};
  int head_kernel = 5;
  int head_pad = 2;
  int out_channels = 1;

  static NetConfig thinning(int resolution = 256);
  static NetConfig displacement(int resolution = 256);

  void check() const;
  nlohmann::json to_json() const;
  static NetConfig from_json(const nlohmann::json& j);
  bool operator==(const NetConfig& o) const { return to_json() == o.to_json(); }
};

/// Output of one named layer for a single sample.
struct LayerShape {
  std::string id;
  int in_channels;
  int channels;
  int height;
  int width;
};

/// Shape walk through E1..E4, B1..B6, D1..D5. Throws std::logic_error if the
/// decoder input channels differ from upstream + skip channels or if the
/// spatial sizes of a skip pair disagree.
std::vector<LayerShape> layer_shapes(const NetConfig& cfg);

/// Trainable scalar count (convolutions with biases, BN affine terms, SE layers).
std::int64_t count_params(const NetConfig& cfg);

/// Layer ids accepted by dump_feature_maps.
std::vector<std::string> layer_ids(const NetConfig& cfg);

template <typename Scalar>
using NamedTensors = std::vector<std::pair<std::string, Tensor<Scalar>>>;

template <typename Scalar>
using FeatureMaps = std::map<std::string, Tensor<Scalar>>;

/// Convolution (plain or transposed) with optional BN and optional ReLU.
template <typename Scalar>
struct ConvUnit {
  Var<Scalar> weight;
  Var<Scalar> bias;
  ConvGeometry geometry;
  bool transposed = false;
  bool batchnorm = true;
  bool activation = true;
  Var<Scalar> gamma;
  Var<Scalar> beta;
  BatchNormStats<Scalar> stats;

  Var<Scalar> apply(const Var<Scalar>& x, bool training);
};

/// FC1: C -> C/r, FC2: C/r -> 2C.
template <typename Scalar>
struct SEWeights {
  Var<Scalar> fc1_weight, fc1_bias;
  Var<Scalar> fc2_weight, fc2_bias;
};

/// v = sigmoid(e) * u + b, where (e, b) = split(FC2(relu(FC1(gap(u))))).
template <typename Scalar>
Var<Scalar> se_block(const Var<Scalar>& u, const SEWeights<Scalar>& w);

template <typename Scalar>
struct ResSELayer {
  ConvUnit<Scalar> conv1;  ///< conv3x3, BN, ReLU
  ConvUnit<Scalar> conv2;  ///< conv3x3, BN
  SEWeights<Scalar> se;
};

/// y = relu(x + SE(BN(conv(relu(BN(conv(x))))))).
template <typename Scalar>
Var<Scalar> res_se_layer(const Var<Scalar>& x, ResSELayer<Scalar>& layer, bool training);

/// Randomly initialized units: uniform weights in +-sqrt(6 / fan_in), zero
/// biases, unit BN scale.
template <typename Scalar>
ConvUnit<Scalar> make_conv_unit(int in_channels, const LayerSpec& spec, bool batchnorm,
                                bool activation, std::uint64_t seed);
template <typename Scalar>
SEWeights<Scalar> make_se_weights(int channels, int reduction, std::uint64_t seed);
template <typename Scalar>
ResSELayer<Scalar> make_res_se_layer(int channels, int reduction, std::uint64_t seed);

template <typename Scalar>
class ResSEUNet {
 public:
  explicit ResSEUNet(const NetConfig& cfg, std::uint64_t seed = 0);

  const NetConfig& config() const { return cfg_; }

  /// x: (N, in_channels, n, n). Training mode uses batch statistics and
  /// updates the running statistics. `taps` receives every named layer output.
  Var<Scalar> forward(const Var<Scalar>& x, bool training, FeatureMaps<Scalar>* taps = nullptr);

  /// Eval-mode forward without graph recording. Safe to call concurrently.
  Tensor<Scalar> infer(const Tensor<Scalar>& x) const;

  /// Post-activation maps of one layer (E1..E4, B1..B6, D1..D5) in eval mode.
  Tensor<Scalar> dump_feature_maps(const std::string& id, const Tensor<Scalar>& x) const;

  std::vector<std::pair<std::string, Var<Scalar>>> named_parameters() const;
  std::vector<Var<Scalar>> parameters() const;

  /// Parameters followed by BN running statistics.
  NamedTensors<Scalar> state_dict() const;
  /// Every entry of state_dict() must be present with a matching shape.
  void load_state_dict(const NamedTensors<Scalar>& state);

 private:
  std::vector<std::pair<std::string, BatchNormStats<Scalar>*>> bn_stats();

  NetConfig cfg_;
  std::array<ConvUnit<Scalar>, 4> encoder_;
  std::vector<ResSELayer<Scalar>> bottleneck_;
  std::array<ConvUnit<Scalar>, 5> decoder_;
};

}  // namespace formcast::nn

#endif  // FORMCAST_RESSEUNET_HPP
