#include "formcast/resseunet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace formcast::nn {

namespace {

nlohmann::json spec_json(const LayerSpec& s) {
  return {{"out_channels", s.out_channels}, {"kernel", s.kernel}, {"stride", s.stride},
          {"pad", s.pad}, {"transposed", s.transposed}};
}

LayerSpec spec_from_json(const nlohmann::json& j) {
  return {j.at("out_channels").get<int>(), j.at("kernel").get<int>(), j.at("stride").get<int>(),
          j.at("pad").get<int>(), j.value("transposed", false)};
}

std::string enc_id(int i) { return "E" + std::to_string(i + 1); }
std::string bot_id(int i) { return "B" + std::to_string(i + 1); }
std::string dec_id(int i) { return "D" + std::to_string(i + 1); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename Scalar>
Tensor<Scalar> uniform_tensor(const Shape& shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

Index extent_after(const LayerSpec& s, Index in) {
  const ConvGeometry g{s.stride, s.pad};
  return s.transposed ? conv_transpose_out_extent(in, s.kernel, g) : conv_out_extent(in, s.kernel, g);
}

}  // namespace

NetConfig NetConfig::thinning(int resolution) {
  NetConfig c;
  c.resolution = resolution;
  c.out_channels = 1;
  return c;
}

NetConfig NetConfig::displacement(int resolution) {
  NetConfig c;
  c.resolution = resolution;
  c.out_channels = 3;
  return c;
}

void NetConfig::check() const {
  if (resolution < 8 || resolution % 8 != 0) {
    throw std::invalid_argument("network resolution must be a positive multiple of 8");
  }
  if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("network needs input and output channels");
  if (bottleneck_layers < 0 || se_reduction < 1) throw std::invalid_argument("bad bottleneck settings");
  layer_shapes(*this);
}

nlohmann::json NetConfig::to_json() const {
  nlohmann::json enc = nlohmann::json::array(), dec = nlohmann::json::array();
  for (const auto& s : encoder) enc.push_back(spec_json(s));
  for (const auto& s : decoder) dec.push_back(spec_json(s));
  return {{"resolution", resolution}, {"in_channels", in_channels}, {"encoder", enc},
          {"bottleneck_layers", bottleneck_layers}, {"se_reduction", se_reduction},
          {"decoder", dec}, {"head_kernel", head_kernel}, {"head_pad", head_pad},
          {"out_channels", out_channels}};
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
  NetConfig c;
  c.resolution = j.value("resolution", c.resolution);
  c.in_channels = j.value("in_channels", c.in_channels);
  if (j.contains("encoder")) {
    if (j.at("encoder").size() != 4) throw std::invalid_argument("net config: encoder needs 4 layers");
    for (std::size_t i = 0; i < 4; ++i) c.encoder[i] = spec_from_json(j.at("encoder")[i]);
  }
  c.bottleneck_layers = j.value("bottleneck_layers", c.bottleneck_layers);
  c.se_reduction = j.value("se_reduction", c.se_reduction);
  if (j.contains("decoder")) {
    if (j.at("decoder").size() != 4) throw std::invalid_argument("net config: decoder needs 4 layers before the head");
    for (std::size_t i = 0; i < 4; ++i) c.decoder[i] = spec_from_json(j.at("decoder")[i]);
  }
  c.head_kernel = j.value("head_kernel", c.head_kernel);
  c.head_pad = j.value("head_pad", c.head_pad);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.check();
  return c;
}

std::vector<LayerShape> layer_shapes(const NetConfig& cfg) {
  std::vector<LayerShape> out;
  int c = cfg.in_channels;
  Index h = cfg.resolution, w = cfg.resolution;
  std::array<LayerShape, 4> skips;
  for (int i = 0; i < 4; ++i) {
    const LayerSpec& s = cfg.encoder[static_cast<std::size_t>(i)];
    if (s.transposed) throw std::logic_error(enc_id(i) + ": encoder layers are plain convolutions");
    h = extent_after(s, h);
    w = extent_after(s, w);
    skips[static_cast<std::size_t>(i)] = {enc_id(i), c, s.out_channels, static_cast<int>(h), static_cast<int>(w)};
    out.push_back(skips[static_cast<std::size_t>(i)]);
    c = s.out_channels;
  }
  if (cfg.bottleneck_layers > 0 && c % cfg.se_reduction != 0) {
    throw std::logic_error("bottleneck channels not divisible by the SE reduction ratio");
  }
  for (int i = 0; i < cfg.bottleneck_layers; ++i) {
    out.push_back({bot_id(i), c, c, static_cast<int>(h), static_cast<int>(w)});
  }
  for (int i = 0; i < 4; ++i) {
    const LayerShape& skip = skips[static_cast<std::size_t>(3 - i)];
    if (skip.height != h || skip.width != w) {
      throw std::logic_error(dec_id(i) + ": upstream " + std::to_string(h) + "x" + std::to_string(w) +
                             " does not match skip " + skip.id + " " + std::to_string(skip.height) + "x" +
                             std::to_string(skip.width));
    }
    const LayerSpec& s = cfg.decoder[static_cast<std::size_t>(i)];
    const int in = c + skip.channels;
    h = extent_after(s, h);
    w = extent_after(s, w);
    out.push_back({dec_id(i), in, s.out_channels, static_cast<int>(h), static_cast<int>(w)});
    c = s.out_channels;
  }
  h = conv_out_extent(h, cfg.head_kernel, {1, cfg.head_pad});
  w = conv_out_extent(w, cfg.head_kernel, {1, cfg.head_pad});
  if (h != cfg.resolution || w != cfg.resolution) {
    throw std::logic_error("network output " + std::to_string(h) + "x" + std::to_string(w) +
                           " differs from the input resolution");
  }
  out.push_back({dec_id(4), c, cfg.out_channels, static_cast<int>(h), static_cast<int>(w)});
  return out;
}

std::int64_t count_params(const NetConfig& cfg) {
  std::int64_t total = 0;
  const auto shapes = layer_shapes(cfg);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const LayerShape& s = shapes[i];
    const std::int64_t cin = s.in_channels, cout = s.channels;
    if (s.id[0] == 'B') {
      const std::int64_t red = cout / cfg.se_reduction;
      total += 2 * (cin * cout * 9 + cout + 2 * cout);
      total += cout * red + red + red * 2 * cout + 2 * cout;
      continue;
    }
    std::int64_t k = 0;
    if (s.id[0] == 'E') k = cfg.encoder[static_cast<std::size_t>(s.id[1] - '1')].kernel;
    else if (s.id == "D5") k = cfg.head_kernel;
    else k = cfg.decoder[static_cast<std::size_t>(s.id[1] - '1')].kernel;
    total += cin * cout * k * k + cout;
    if (s.id != "D5") total += 2 * cout;
  }
  return total;
}

std::vector<std::string> layer_ids(const NetConfig& cfg) {
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(enc_id(i));
  for (int i = 0; i < cfg.bottleneck_layers; ++i) ids.push_back(bot_id(i));
  for (int i = 0; i < 5; ++i) ids.push_back(dec_id(i));
  return ids;
}

template <typename Scalar>
Var<Scalar> ConvUnit<Scalar>::apply(const Var<Scalar>& x, bool training) {
  Var<Scalar> y = transposed ? conv_transpose2d(x, weight, bias, geometry) : conv2d(x, weight, bias, geometry);
  if (batchnorm) y = batchnorm2d(y, gamma, beta, stats, training);
  if (activation) y = relu(y);
  return y;
}

template <typename Scalar>
Var<Scalar> se_block(const Var<Scalar>& u, const SEWeights<Scalar>& w) {
  const Index channels = u.shape().c();
  const Var<Scalar> squeezed = global_avg_pool(u);
  const Var<Scalar> p = relu(linear(squeezed, w.fc1_weight, w.fc1_bias));
  const Var<Scalar> q = linear(p, w.fc2_weight, w.fc2_bias);
  if (q.shape().c() != 2 * channels) throw std::invalid_argument("se_block: FC2 must emit 2C values");
  return channel_affine(u, sigmoid(slice_channels(q, 0, channels)), slice_channels(q, channels, channels));
}

template <typename Scalar>
Var<Scalar> res_se_layer(const Var<Scalar>& x, ResSELayer<Scalar>& layer, bool training) {
  const Var<Scalar> branch = layer.conv2.apply(layer.conv1.apply(x, training), training);
  return relu(add(x, se_block(branch, layer.se)));
}

template <typename Scalar>
ConvUnit<Scalar> make_conv_unit(int in_channels, const LayerSpec& spec, bool batchnorm, bool activation,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ConvUnit<Scalar> u;
  u.geometry = {spec.stride, spec.pad};
  u.transposed = spec.transposed;
  u.batchnorm = batchnorm;
  u.activation = activation;
  const Index k = spec.kernel;
  // A transposed convolution feeds each output from about (k/stride)^2 taps per input channel.
  const double fan_in = spec.transposed
                            ? static_cast<double>(in_channels * k * k) / (spec.stride * spec.stride)
                            : static_cast<double>(in_channels * k * k);
  const Shape wshape = spec.transposed ? Shape{in_channels, spec.out_channels, k, k}
                                       : Shape{spec.out_channels, in_channels, k, k};
  u.weight = Var<Scalar>::parameter(uniform_tensor<Scalar>(wshape, std::sqrt(6.0 / fan_in), rng));
  u.bias = Var<Scalar>::parameter(Tensor<Scalar>(Shape{spec.out_channels}));
  if (batchnorm) {
    u.gamma = Var<Scalar>::parameter(Tensor<Scalar>(Shape{spec.out_channels}, Scalar(1)));
    u.beta = Var<Scalar>::parameter(Tensor<Scalar>(Shape{spec.out_channels}));
    u.stats = BatchNormStats<Scalar>(spec.out_channels);
  }
  return u;
}

template <typename Scalar>
SEWeights<Scalar> make_se_weights(int channels, int reduction, std::uint64_t seed) {
  if (reduction < 1 || channels % reduction != 0) {
    throw std::invalid_argument("SE block: channels must be divisible by the reduction ratio");
  }
  std::mt19937_64 rng(seed);
  const int mid = channels / reduction;
  SEWeights<Scalar> w;
  w.fc1_weight = Var<Scalar>::parameter(uniform_tensor<Scalar>(Shape{mid, channels}, std::sqrt(6.0 / channels), rng));
  w.fc1_bias = Var<Scalar>::parameter(Tensor<Scalar>(Shape{mid}));
  w.fc2_weight = Var<Scalar>::parameter(uniform_tensor<Scalar>(Shape{2 * channels, mid}, std::sqrt(6.0 / mid), rng));
  w.fc2_bias = Var<Scalar>::parameter(Tensor<Scalar>(Shape{2 * channels}));
  return w;
}

template <typename Scalar>
ResSELayer<Scalar> make_res_se_layer(int channels, int reduction, std::uint64_t seed) {
  const LayerSpec same{channels, 3, 1, 1};
  return {make_conv_unit<Scalar>(channels, same, true, true, mix_seed(seed, 0)),
          make_conv_unit<Scalar>(channels, same, true, false, mix_seed(seed, 1)),
          make_se_weights<Scalar>(channels, reduction, mix_seed(seed, 2))};
}

template <typename Scalar>
ResSEUNet<Scalar>::ResSEUNet(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.check();
  const auto shapes = layer_shapes(cfg_);
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    encoder_[i] = make_conv_unit<Scalar>(shapes[i].in_channels, cfg_.encoder[i], true, true, mix_seed(seed, k++));
  }
  const int bc = cfg_.encoder[3].out_channels;
  for (int i = 0; i < cfg_.bottleneck_layers; ++i) {
    bottleneck_.push_back(make_res_se_layer<Scalar>(bc, cfg_.se_reduction, mix_seed(seed, k++)));
  }
  const std::size_t d0 = 4 + static_cast<std::size_t>(cfg_.bottleneck_layers);
  for (std::size_t i = 0; i < 4; ++i) {
    const LayerShape& s = shapes[d0 + i];
    if (s.in_channels != (i == 0 ? bc : cfg_.decoder[i - 1].out_channels) + cfg_.encoder[3 - i].out_channels) {
      throw std::logic_error(s.id + ": input channels differ from upstream + skip channels");
    }
    decoder_[i] = make_conv_unit<Scalar>(s.in_channels, cfg_.decoder[i], true, true, mix_seed(seed, k++));
  }
  const LayerSpec head{cfg_.out_channels, cfg_.head_kernel, 1, cfg_.head_pad};
  decoder_[4] = make_conv_unit<Scalar>(cfg_.decoder[3].out_channels, head, false, false, mix_seed(seed, k++));
}

template <typename Scalar>
Var<Scalar> ResSEUNet<Scalar>::forward(const Var<Scalar>& x, bool training, FeatureMaps<Scalar>* taps) {
  const Shape& xs = x.shape();
  if (xs.rank() != 4 || xs.c() != cfg_.in_channels || xs.h() != cfg_.resolution || xs.w() != cfg_.resolution) {
    throw std::invalid_argument("network input must be (N, " + std::to_string(cfg_.in_channels) + ", " +
                                std::to_string(cfg_.resolution) + ", " + std::to_string(cfg_.resolution) +
                                "), got " + xs.str());
  }
  const auto tap = [taps](const std::string& id, const Var<Scalar>& v) {
    if (taps) (*taps)[id] = v.value();
  };
  std::array<Var<Scalar>, 4> skips;
  Var<Scalar> h = x;
  for (std::size_t i = 0; i < 4; ++i) {
    h = encoder_[i].apply(h, training);
    skips[i] = h;
    tap(enc_id(static_cast<int>(i)), h);
  }
  for (std::size_t i = 0; i < bottleneck_.size(); ++i) {
    h = res_se_layer(h, bottleneck_[i], training);
    tap(bot_id(static_cast<int>(i)), h);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    h = decoder_[i].apply(concat_channels(h, skips[3 - i]), training);
    tap(dec_id(static_cast<int>(i)), h);
  }
  h = decoder_[4].apply(h, training);
  tap(dec_id(4), h);
  return h;
}

template <typename Scalar>
Tensor<Scalar> ResSEUNet<Scalar>::infer(const Tensor<Scalar>& x) const {
  NoGradGuard guard;
  // Eval mode reads the running statistics without touching them.
  return const_cast<ResSEUNet*>(this)->forward(Var<Scalar>::constant(x), false).value();
}

template <typename Scalar>
Tensor<Scalar> ResSEUNet<Scalar>::dump_feature_maps(const std::string& id, const Tensor<Scalar>& x) const {
  const auto ids = layer_ids(cfg_);
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
    throw std::invalid_argument("unknown layer id '" + id + "'");
  }
  NoGradGuard guard;
  FeatureMaps<Scalar> taps;
  const_cast<ResSEUNet*>(this)->forward(Var<Scalar>::constant(x), false, &taps);
  return taps.at(id);
}

template <typename Scalar>
std::vector<std::pair<std::string, Var<Scalar>>> ResSEUNet<Scalar>::named_parameters() const {
  std::vector<std::pair<std::string, Var<Scalar>>> out;
  const auto unit = [&out](const std::string& p, const ConvUnit<Scalar>& u) {
    out.emplace_back(p + ".weight", u.weight);
    out.emplace_back(p + ".bias", u.bias);
    if (u.batchnorm) {
      out.emplace_back(p + ".bn.weight", u.gamma);
      out.emplace_back(p + ".bn.bias", u.beta);
    }
  };
  for (std::size_t i = 0; i < 4; ++i) unit(enc_id(static_cast<int>(i)), encoder_[i]);
  for (std::size_t i = 0; i < bottleneck_.size(); ++i) {
    const std::string p = bot_id(static_cast<int>(i));
    unit(p + ".conv1", bottleneck_[i].conv1);
    unit(p + ".conv2", bottleneck_[i].conv2);
    out.emplace_back(p + ".se.fc1.weight", bottleneck_[i].se.fc1_weight);
    out.emplace_back(p + ".se.fc1.bias", bottleneck_[i].se.fc1_bias);
    out.emplace_back(p + ".se.fc2.weight", bottleneck_[i].se.fc2_weight);
    out.emplace_back(p + ".se.fc2.bias", bottleneck_[i].se.fc2_bias);
  }
  for (std::size_t i = 0; i < 5; ++i) unit(dec_id(static_cast<int>(i)), decoder_[i]);
  return out;
}

template <typename Scalar>
std::vector<Var<Scalar>> ResSEUNet<Scalar>::parameters() const {
  std::vector<Var<Scalar>> out;
  for (auto& [name, v] : named_parameters()) out.push_back(v);
  return out;
}

template <typename Scalar>
std::vector<std::pair<std::string, BatchNormStats<Scalar>*>> ResSEUNet<Scalar>::bn_stats() {
  std::vector<std::pair<std::string, BatchNormStats<Scalar>*>> out;
  for (std::size_t i = 0; i < 4; ++i) out.emplace_back(enc_id(static_cast<int>(i)) + ".bn", &encoder_[i].stats);
  for (std::size_t i = 0; i < bottleneck_.size(); ++i) {
    const std::string p = bot_id(static_cast<int>(i));
    out.emplace_back(p + ".conv1.bn", &bottleneck_[i].conv1.stats);
    out.emplace_back(p + ".conv2.bn", &bottleneck_[i].conv2.stats);
  }
  for (std::size_t i = 0; i < 4; ++i) out.emplace_back(dec_id(static_cast<int>(i)) + ".bn", &decoder_[i].stats);
  return out;
}

template <typename Scalar>
NamedTensors<Scalar> ResSEUNet<Scalar>::state_dict() const {
  NamedTensors<Scalar> out;
  for (const auto& [name, v] : named_parameters()) out.emplace_back(name, v.value());
  for (const auto& [name, s] : const_cast<ResSEUNet*>(this)->bn_stats()) {
    out.emplace_back(name + ".running_mean", s->running_mean);
    out.emplace_back(name + ".running_var", s->running_var);
  }
  return out;
}

template <typename Scalar>
void ResSEUNet<Scalar>::load_state_dict(const NamedTensors<Scalar>& state) {
  std::unordered_map<std::string, const Tensor<Scalar>*> by_name;
  for (const auto& [name, t] : state) by_name[name] = &t;
  const auto fetch = [&by_name](const std::string& name, const Shape& shape) -> const Tensor<Scalar>& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
    if (!(it->second->shape() == shape)) {
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " + it->second->shape().str() +
                               ", expected " + shape.str());
    }
    return *it->second;
  };
  for (auto& [name, v] : named_parameters()) v.mutable_value() = fetch(name, v.shape());
  for (auto& [name, s] : bn_stats()) {
    s->running_mean = fetch(name + ".running_mean", s->running_mean.shape());
    s->running_var = fetch(name + ".running_var", s->running_var.shape());
  }
}

#define FORMCAST_INSTANTIATE_NET(S)                                                               \
  template struct ConvUnit<S>;                                                                    \
  template Var<S> se_block<S>(const Var<S>&, const SEWeights<S>&);                                \
  template Var<S> res_se_layer<S>(const Var<S>&, ResSELayer<S>&, bool);                           \
  template ConvUnit<S> make_conv_unit<S>(int, const LayerSpec&, bool, bool, std::uint64_t);       \
  template SEWeights<S> make_se_weights<S>(int, int, std::uint64_t);                              \
  template ResSELayer<S> make_res_se_layer<S>(int, int, std::uint64_t);                           \
  template class ResSEUNet<S>;

FORMCAST_INSTANTIATE_NET(float)
FORMCAST_INSTANTIATE_NET(double)

#undef FORMCAST_INSTANTIATE_NET

}  // namespace formcast::nn
