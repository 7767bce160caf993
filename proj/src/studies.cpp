#include "formcast/studies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "formcast/metrics.hpp"

namespace formcast {

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<ImageD> thinning_images(const nn::Tensor<float>& t) {
  std::vector<ImageD> out;
  for (Eigen::Index i = 0; i < t.shape().n(); ++i) out.push_back(channel_image(t, i, 0));
  return out;
}

}  // namespace

bool same_geometry(const ParameterVector& a, const ParameterVector& b) {
  return a.r_die == b.r_die && a.r_punch == b.r_punch && a.r_plan == b.r_plan && a.h_design == b.h_design;
}

SizeStudySummary summarize(int size, const std::vector<SizeStudyRow>& rows) {
  std::vector<double> mse;
  std::vector<double> rel;
  for (const auto& r : rows) {
    if (r.size == size) {
      mse.push_back(r.mse);
      rel.push_back(r.mre);
    }
  }
  if (mse.empty()) throw std::invalid_argument("no runs for size " + std::to_string(size));
  SizeStudySummary s;
  s.size = size;
  std::tie(s.mean_mse, s.std_mse) = mean_std(mse);
  std::tie(s.mean_mre, s.std_mre) = mean_std(rel);
  return s;
}

std::string SizeStudyResult::csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "size,seed,mse,mre\n";
  for (const auto& r : rows) os << r.size << ',' << r.seed << ',' << r.mse << ',' << r.mre << '\n';
  return os.str();
}

nlohmann::json SizeStudyResult::to_json() const {
  nlohmann::json j = {{"runs", nlohmann::json::array()}, {"summary", nlohmann::json::array()}};
  for (const auto& r : rows) {
    j["runs"].push_back({{"size", r.size}, {"seed", r.seed}, {"mse", r.mse}, {"mre", r.mre},
                         {"wall_seconds", r.wall_seconds}});
  }
  for (const auto& s : summary) {
    j["summary"].push_back({{"size", s.size}, {"mean_mse", s.mean_mse}, {"std_mse", s.std_mse},
                            {"mean_mre", s.mean_mre}, {"std_mre", s.std_mre}});
  }
  return j;
}

SizeStudyResult size_study(const Dataset& ds, const std::vector<std::size_t>& pool,
                           const std::vector<std::size_t>& test, const nn::NetConfig& net_cfg,
                           const SizeStudyConfig& cfg) {
  if (test.empty()) throw std::invalid_argument("size study needs a test set");
  if (cfg.sizes.empty() || cfg.seeds.empty()) throw std::invalid_argument("size study needs sizes and seeds");
  if (net_cfg.out_channels != 1) throw std::invalid_argument("size study trains thinning networks");
  for (const int size : cfg.sizes) {
    if (size < 2 || static_cast<std::size_t>(size) > pool.size()) {
      throw std::invalid_argument("size " + std::to_string(size) + " outside [2, " + std::to_string(pool.size()) +
                                  "]");
    }
  }
  for (const std::size_t t : test) {
    for (const std::size_t p : pool) {
      if (t == p || same_geometry(ds.samples.at(t).params, ds.samples.at(p).params)) {
        throw std::invalid_argument("test geometry " + ds.samples.at(t).id + " also appears in the training pool");
      }
    }
  }

  const SampleTensors test_set = to_tensors(ds, test, TargetKind::thinning);
  std::vector<ImageD> truth;
  for (const std::size_t t : test) truth.push_back(stack_plane(ds.samples[t].target.thinning, 0, net_cfg.resolution));

  SizeStudyResult result;
  for (const int size : cfg.sizes) {
    for (const std::uint64_t seed : cfg.seeds) {
      std::vector<std::size_t> order = pool;
      std::mt19937_64 rng(seed);
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(static_cast<std::size_t>(size));
      const SampleTensors train_set = to_tensors(ds, order, TargetKind::thinning);

      nn::ResSEUNet<float> net(net_cfg, seed);
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      tc.checkpoint_path.clear();
      // Model selection on the training loss keeps the test set unseen.
      const TrainRun run = train(net, train_set, SampleTensors{}, tc);
      if (cfg.on_trained) cfg.on_trained(size, seed, net);

      const std::vector<ImageD> pred = thinning_images(predict_batch(net, test_set.inputs));
      SizeStudyRow row;
      row.size = size;
      row.seed = seed;
      double mse = 0.0;
      for (std::size_t k = 0; k < pred.size(); ++k) mse += masked_mse(pred[k], truth[k], test_set.masks[k]);
      row.mse = mse / static_cast<double>(pred.size());
      row.mre = mre(pred, truth, test_set.masks);
      row.wall_seconds = run.wall_seconds;
      result.rows.push_back(row);
    }
    result.summary.push_back(summarize(size, result.rows));
  }
  return result;
}

double SweepResult::max_adjacent_change_ratio() const {
  if (frames.size() < 2) throw std::invalid_argument("sweep needs at least two frames");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& f : frames) {
    for (Eigen::Index i = 0; i < f.thinning.size(); ++i) {
      if (mask.data()[i] > 0.5f) {
        lo = std::min(lo, f.thinning.data()[i]);
        hi = std::max(hi, f.thinning.data()[i]);
      }
    }
  }
  const double range = hi - lo;
  if (!(range > 0.0)) return 0.0;
  double worst = 0.0;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    if (frames[k].t_init != frames[k - 1].t_init) continue;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      if (mask.data()[i] > 0.5f) {
        worst = std::max(worst, std::abs(frames[k].thinning.data()[i] - frames[k - 1].thinning.data()[i]));
      }
    }
  }
  return worst / range;
}

nlohmann::json SweepResult::metadata() const {
  nlohmann::json j = {{"frames", nlohmann::json::array()}};
  for (std::size_t k = 0; k < frames.size(); ++k) {
    j["frames"].push_back({{"index", k}, {"t_init", frames[k].t_init}, {"speed", frames[k].speed}});
  }
  if (frames.size() >= 2) {
    j["speed_order"] = frames[1].speed > frames[0].speed ? "ascending" : "descending";
  }
  return j;
}

SweepResult speed_sweep(const ParameterVector& pv, const std::vector<double>& speeds,
                        const std::vector<double>& temps, const nn::ResSEUNet<float>* net,
                        const PipelineConfig& cfg) {
  if (net == nullptr) throw std::invalid_argument("speed sweep needs a trained network checkpoint");
  if (net->config().out_channels != 1) throw std::invalid_argument("speed sweep needs a thinning network");
  if (net->config().resolution != cfg.grid.n_pixels) {
    throw std::invalid_argument("network resolution differs from the pipeline grid");
  }
  if (speeds.empty() || temps.empty()) throw std::invalid_argument("speed sweep needs speeds and temperatures");
  if (speeds.size() > 1) {
    const bool up = speeds[1] > speeds[0];
    for (std::size_t k = 1; k < speeds.size(); ++k) {
      if (up ? !(speeds[k] > speeds[k - 1]) : !(speeds[k] < speeds[k - 1])) {
        throw std::invalid_argument("sweep speeds must be strictly monotone");
      }
    }
  }

  SweepResult out;
  for (const double t : temps) {
    for (const double s : speeds) {
      ParameterVector p = pv;
      p.t_init = t;
      p.speed = s;
      const auto report = validate(p, cfg.bounds);
      if (!report.ok()) throw std::invalid_argument("sweep point: " + report.violations.front());
      const InputStack in = make_input(p, cfg.grid, cfg.bounds, cfg.effective_die_spacing());
      if (out.mask.size() == 0) out.mask = in.mask;
      const ImageD field = channel_image(net->infer(input_tensor(in)), 0, 0);
      out.frames.push_back({t, s, field * out.mask.cast<double>()});
    }
  }
  return out;
}

}  // namespace formcast
