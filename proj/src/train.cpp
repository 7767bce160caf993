#include "formcast/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace formcast {

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

nlohmann::json loss_array(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
  return a;
}

// Batches of `batch` rows; a trailing batch of one is merged into the previous
// one because batch statistics need two samples.
std::vector<std::vector<Eigen::Index>> make_batches(const std::vector<Eigen::Index>& order, int batch) {
  std::vector<std::vector<Eigen::Index>> out;
  for (std::size_t k = 0; k < order.size(); k += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(order.size(), k + static_cast<std::size_t>(batch));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(k), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (out.size() > 1 && out.back().size() < 2) {
    out[out.size() - 2].insert(out[out.size() - 2].end(), out.back().begin(), out.back().end());
    out.pop_back();
  }
  return out;
}

}  // namespace

int target_channels(TargetKind kind) { return kind == TargetKind::thinning ? 1 : 3; }

std::string to_string(TargetKind kind) { return kind == TargetKind::thinning ? "thinning" : "displacement"; }

TargetKind target_kind_from(const std::string& name) {
  if (name == "thinning") return TargetKind::thinning;
  if (name == "displacement") return TargetKind::displacement;
  throw std::invalid_argument("unknown target kind '" + name + "' (expected thinning or displacement)");
}

SampleTensors SampleTensors::subset(const std::vector<Eigen::Index>& rows) const {
  SampleTensors out;
  const auto& is = inputs.shape();
  const auto& ts = targets.shape();
  const Eigen::Index in_size = is.c() * is.h() * is.w();
  const Eigen::Index t_size = ts.c() * ts.h() * ts.w();
  const auto count = static_cast<Eigen::Index>(rows.size());
  out.inputs = nn::Tensor<float>(nn::Shape{count, is.c(), is.h(), is.w()});
  out.targets = nn::Tensor<float>(nn::Shape{count, ts.c(), ts.h(), ts.w()});
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index r = rows[static_cast<std::size_t>(k)];
    if (r < 0 || r >= size()) throw std::out_of_range("sample subset index out of range");
    std::copy_n(inputs.data() + r * in_size, in_size, out.inputs.data() + k * in_size);
    std::copy_n(targets.data() + r * t_size, t_size, out.targets.data() + k * t_size);
    out.ids.push_back(ids[static_cast<std::size_t>(r)]);
    out.masks.push_back(masks[static_cast<std::size_t>(r)]);
  }
  return out;
}

SampleTensors to_tensors(const std::vector<Sample>& samples, TargetKind kind) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  const int n = samples.front().input.grid.n_pixels;
  const Eigen::Index plane = static_cast<Eigen::Index>(n) * n;
  const int channels = target_channels(kind);
  const auto count = static_cast<Eigen::Index>(samples.size());
  SampleTensors out;
  out.inputs = nn::Tensor<float>(nn::Shape{count, 4, n, n});
  out.targets = nn::Tensor<float>(nn::Shape{count, channels, n, n});
  for (Eigen::Index k = 0; k < count; ++k) {
    const Sample& s = samples[static_cast<std::size_t>(k)];
    if (s.input.grid.n_pixels != n) throw std::invalid_argument("samples on different grids");
    verify_channel_order(s.input);
    const StackArray& t = kind == TargetKind::thinning ? s.target.thinning : s.target.displacement;
    if (t.rows() != channels || t.cols() != plane || s.input.data.cols() != plane) {
      throw std::invalid_argument("sample " + s.id + " has unexpected stack shapes");
    }
    std::copy_n(s.input.data.data(), 4 * plane, out.inputs.data() + k * 4 * plane);
    std::copy_n(t.data(), channels * plane, out.targets.data() + k * channels * plane);
    out.ids.push_back(s.id);
    out.masks.push_back(s.input.mask);
  }
  return out;
}

SampleTensors to_tensors(const Dataset& ds, const std::vector<std::size_t>& indices, TargetKind kind) {
  std::vector<Sample> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(ds.samples.at(i));
  return to_tensors(picked, kind);
}

Split split_indices(std::size_t n, double test_frac, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("split: empty dataset");
  if (!(test_frac > 0.0 && test_frac < 1.0)) throw std::invalid_argument("split: test fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
  Split s;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(test), order.end());
  return s;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"patience", patience},
          {"max_steps", max_steps},
          {"target_loss", target_loss},
          {"seed", seed},
          {"learning_rate", adam.learning_rate},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"eps", adam.eps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.target_loss = j.value("target_loss", c.target_loss);
  c.seed = j.value("seed", c.seed);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.eps = j.value("eps", c.adam.eps);
  if (c.epochs < 1 || c.batch_size < 2 || c.patience < 1 || c.max_steps < 0) {
    throw std::invalid_argument("train config: epochs >= 1, batch_size >= 2, patience >= 1, max_steps >= 0");
  }
  return c;
}

nlohmann::json TrainRun::to_json() const {
  return {{"train_loss", loss_array(train_loss)},
          {"test_loss", loss_array(test_loss)},
          {"epochs", train_loss.size()},
          {"best_epoch", best_epoch},
          {"best_test_loss", std::isfinite(best_test_loss) ? nlohmann::json(best_test_loss) : nlohmann::json(nullptr)},
          {"steps", steps},
          {"wall_seconds", wall_seconds},
          {"stop_reason", stop_reason},
          {"checkpoint", checkpoint},
          {"config", config}};
}

Trainer::Trainer(nn::ResSEUNet<float>& net, TrainConfig cfg)
    : net_(net), cfg_(std::move(cfg)), params_(net.named_parameters()), adam_(net.parameters(), cfg_.adam) {}

bool Trainer::step_limit_reached() const { return cfg_.max_steps > 0 && adam_.steps() >= cfg_.max_steps; }

double Trainer::run_epoch(const SampleTensors& train) {
  if (train.size() < 2) throw std::invalid_argument("training needs at least 2 samples");
  const int expected = net_.config().out_channels;
  if (train.targets.shape().c() != expected) {
    throw std::invalid_argument("target channels (" + std::to_string(train.targets.shape().c()) +
                                ") differ from network outputs (" + std::to_string(expected) + ")");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(epoch_seed(cfg_.seed, epoch_));
  std::shuffle(order.begin(), order.end(), rng);

  double weighted = 0.0;
  Eigen::Index seen = 0;
  for (const auto& rows : make_batches(order, cfg_.batch_size)) {
    if (step_limit_reached()) break;
    const SampleTensors batch = train.subset(rows);
    adam_.zero_grad();
    const auto out = net_.forward(nn::Var<float>::constant(batch.inputs), true);
    const auto loss = nn::mse_loss(out, nn::Var<float>::constant(batch.targets));
    nn::backward(loss);
    adam_.step();
    weighted += static_cast<double>(loss.value()[0]) * static_cast<double>(rows.size());
    seen += static_cast<Eigen::Index>(rows.size());
  }
  adam_.zero_grad();
  ++epoch_;
  return seen > 0 ? weighted / static_cast<double>(seen) : std::numeric_limits<double>::quiet_NaN();
}

Checkpoint Trainer::checkpoint(const nlohmann::json& meta) const {
  Checkpoint ck = make_checkpoint(net_, meta);
  ck.meta["epoch"] = epoch_;
  ck.meta["train_config"] = cfg_.to_json();
  AdamState st;
  st.config = adam_.config();
  st.step = adam_.steps();
  const auto& slots = adam_.slots();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& shape = params_[i].second.shape();
    st.m.emplace_back(params_[i].first, slots[i].m.empty() ? nn::Tensor<float>(shape) : slots[i].m);
    st.v.emplace_back(params_[i].first, slots[i].v.empty() ? nn::Tensor<float>(shape) : slots[i].v);
  }
  ck.adam = std::move(st);
  return ck;
}

void Trainer::resume(const Checkpoint& ck) {
  if (!(ck.net == net_.config())) throw std::runtime_error("checkpoint config does not match the network");
  net_.load_state_dict(ck.state);
  epoch_ = ck.meta.value("epoch", 0);
  if (!ck.adam) return;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < params_.size(); ++i) index[params_[i].first] = i;
  auto& slots = adam_.slots();
  const auto restore = [&](const nn::NamedTensors<float>& moments, bool first) {
    for (const auto& [name, t] : moments) {
      const auto it = index.find(name);
      if (it == index.end()) throw std::runtime_error("optimizer state names unknown parameter '" + name + "'");
      if (!(t.shape() == params_[it->second].second.shape())) {
        throw std::runtime_error("optimizer state for '" + name + "' has the wrong shape");
      }
      (first ? slots[it->second].m : slots[it->second].v) = t;
    }
  };
  restore(ck.adam->m, true);
  restore(ck.adam->v, false);
  adam_.set_steps(ck.adam->step);
}

nn::Tensor<float> input_tensor(const InputStack& stack) {
  verify_channel_order(stack);
  const Eigen::Index n = stack.grid.n_pixels;
  nn::Tensor<float> t(nn::Shape{1, stack.data.rows(), n, n});
  std::copy_n(stack.data.data(), stack.data.size(), t.data());
  return t;
}

ImageD channel_image(const nn::Tensor<float>& t, Eigen::Index i, Eigen::Index c) {
  const auto& s = t.shape();
  if (s.rank() != 4 || i < 0 || i >= s.n() || c < 0 || c >= s.c()) {
    throw std::out_of_range("channel_image index out of range for " + s.str());
  }
  ImageD img(s.h(), s.w());
  const float* src = t.data() + (i * s.c() + c) * s.h() * s.w();
  for (Eigen::Index k = 0; k < img.size(); ++k) img.data()[k] = src[k];
  return img;
}

nn::Tensor<float> predict_batch(const nn::ResSEUNet<float>& net, const nn::Tensor<float>& inputs) {
  const auto& s = inputs.shape();
  const int out_c = net.config().out_channels;
  nn::Tensor<float> out(nn::Shape{s.n(), out_c, s.h(), s.w()});
  const Eigen::Index in_size = s.c() * s.h() * s.w();
  const Eigen::Index out_size = out_c * s.h() * s.w();
  constexpr Eigen::Index kChunk = 8;
  for (Eigen::Index k = 0; k < s.n(); k += kChunk) {
    const Eigen::Index m = std::min(kChunk, s.n() - k);
    nn::Tensor<float> x(nn::Shape{m, s.c(), s.h(), s.w()});
    std::copy_n(inputs.data() + k * in_size, m * in_size, x.data());
    const nn::Tensor<float> y = net.infer(x);
    std::copy_n(y.data(), m * out_size, out.data() + k * out_size);
  }
  return out;
}

double evaluate_loss(const nn::ResSEUNet<float>& net, const SampleTensors& set) {
  if (set.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const nn::Tensor<float> pred = predict_batch(net, set.inputs);
  return (pred.array() - set.targets.array()).cast<double>().square().mean();
}

TrainRun train(nn::ResSEUNet<float>& net, const SampleTensors& train_set, const SampleTensors& test_set,
               const TrainConfig& cfg, const Checkpoint* resume_from) {
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(net, cfg);
  if (resume_from) trainer.resume(*resume_from);

  TrainRun run;
  run.config = {{"train", cfg.to_json()}, {"net", net.config().to_json()},
                {"train_samples", train_set.size()}, {"test_samples", test_set.size()}};
  run.best_test_loss = std::numeric_limits<double>::infinity();
  nn::NamedTensors<float> best_state = net.state_dict();
  int since_best = 0;
  run.stop_reason = "epoch limit";
  while (trainer.epoch() < cfg.epochs) {
    const double train_loss = trainer.run_epoch(train_set);
    const double test_loss = evaluate_loss(net, test_set);
    run.train_loss.push_back(train_loss);
    run.test_loss.push_back(test_loss);
    // Without a test set, model selection falls back to the training loss.
    const double score = test_set.size() > 0 ? test_loss : train_loss;
    if (score < run.best_test_loss) {
      run.best_test_loss = score;
      run.best_epoch = trainer.epoch();
      best_state = net.state_dict();
      since_best = 0;
      if (!cfg.checkpoint_path.empty()) {
        save_checkpoint(cfg.checkpoint_path, trainer.checkpoint({{"best_loss", score}}));
        run.checkpoint = cfg.checkpoint_path;
      }
    } else {
      ++since_best;
    }
    if (cfg.verbose) {
      std::cerr << "epoch " << trainer.epoch() << " steps " << trainer.steps() << " train " << train_loss
                << " test " << test_loss << '\n';
    }
    if (cfg.target_loss > 0.0 && train_loss < cfg.target_loss) {
      run.stop_reason = "target loss reached";
      break;
    }
    if (trainer.step_limit_reached()) {
      run.stop_reason = "step limit";
      break;
    }
    if (since_best >= cfg.patience) {
      run.stop_reason = "patience exhausted";
      break;
    }
  }
  net.load_state_dict(best_state);
  run.steps = trainer.steps();
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

}  // namespace formcast
