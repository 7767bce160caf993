// Acceptance suite: one PASS/FAIL line per criterion. Criterion names given on
// the command line restrict the run to those criteria.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "formcast/metrics.hpp"
#include "formcast/raster_target.hpp"
#include "formcast/service.hpp"
#include "formcast/studies.hpp"
#include "grad_suite.hpp"
#include "httplib.h"

using namespace formcast;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

long env_long(const char* name, long fallback) {
  const char* v = std::getenv(name);
  return v ? std::atol(v) : fallback;
}

// ---------------------------------------------------------------------------
// Closed-form and property criteria

Outcome gradients() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string worst_op;
  std::set<std::string> ops;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& [name, err] : testing::gradient_errors(seed)) {
      ops.insert(name);
      if (err > worst) {
        worst = err;
        worst_op = name + " seed " + std::to_string(seed);
      }
    }
  }
  const double t = seconds_since(start);
  return {worst < 1e-4 && t < 60.0, std::to_string(ops.size()) + " ops x 5 seeds, worst rel. error " + fmt(worst) +
                                         " (" + worst_op + "), " + fmt(t, 3) + " s"};
}

Outcome architecture() {
  struct Row {
    const char* id;
    int in, out, hw;
  };
  const Row table[] = {{"E1", 4, 16, 256},   {"E2", 16, 32, 128},  {"E3", 32, 64, 64},   {"E4", 64, 128, 32},
                       {"B1", 128, 128, 32}, {"B2", 128, 128, 32}, {"B3", 128, 128, 32}, {"B4", 128, 128, 32},
                       {"B5", 128, 128, 32}, {"B6", 128, 128, 32}, {"D1", 256, 64, 64},  {"D2", 128, 32, 128},
                       {"D3", 64, 16, 256},  {"D4", 32, 8, 256}};
  bool ok = true;
  std::string detail;
  for (const int out : {1, 3}) {
    nn::NetConfig cfg = out == 1 ? nn::NetConfig::thinning(256) : nn::NetConfig::displacement(256);
    const auto shapes = nn::layer_shapes(cfg);
    if (shapes.size() != 15) return {false, "expected 15 layers, got " + std::to_string(shapes.size())};
    for (std::size_t i = 0; i < 14; ++i) {
      const auto& s = shapes[i];
      const Row& r = table[i];
      if (s.id != r.id || s.in_channels != r.in || s.channels != r.out || s.height != r.hw || s.width != r.hw) {
        ok = false;
        detail += " mismatch at " + s.id;
      }
    }
    const auto& head = shapes.back();
    ok = ok && head.in_channels == 8 && head.channels == out && head.height == 256;
    const nn::ResSEUNet<float> net(cfg, 1);
    const nn::Tensor<float> x({1, 4, 256, 256}, 0.5f);
    ok = ok && net.infer(x).shape() == nn::Shape({1, out, 256, 256});
    for (const char* id : {"E1", "E2", "E3", "E4", "B6", "D1", "D2", "D3", "D4"}) {
      const auto it = std::find_if(shapes.begin(), shapes.end(), [&](const auto& s) { return s.id == id; });
      const nn::Tensor<float> m = net.dump_feature_maps(id, x);
      ok = ok && m.shape() == nn::Shape({1, it->channels, it->height, it->width});
    }
  }
  // Any layout mismatch aborts construction.
  int aborted = 0;
  nn::NetConfig a = nn::NetConfig::thinning(256);
  a.encoder[2].stride = 1;
  nn::NetConfig b = nn::NetConfig::thinning(256);
  b.decoder[1].kernel = 4;
  nn::NetConfig c = nn::NetConfig::thinning(256);
  c.head_pad = 1;
  for (const auto& bad : {a, b, c}) {
    try {
      nn::ResSEUNet<float> net(bad, 1);
    } catch (const std::logic_error&) {
      ++aborted;
    }
  }
  ok = ok && aborted == 3;
  return {ok, "channels 4-16-32-64-128 | 6x128 | 256-64, 128-32, 64-16, 32-8, 8-{1,3}; spatial 256/256/128/64/32; " +
                  std::to_string(aborted) + "/3 bad layouts aborted" + detail};
}

Outcome round_trip() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(0.0, kFrameMm), z(0.0, 120.0), disp(-60.0, 60.0);
  const Eigen::Index n = 100000;
  Points3 d(3, n), delta(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.col(i) << pos(rng), pos(rng), z(rng);
    delta.col(i) << disp(rng), disp(rng), disp(rng);
  }
  const Points3 d0 = undeform(d, delta);
  const double err = ((d0 + delta) - d).cwiseAbs().maxCoeff();
  return {err < 1e-9, "1e5 nodes, max |(d - delta) + delta - d| = " + fmt(err)};
}

double sorted_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Outcome clipping() {
  std::mt19937_64 rng(77);
  double worst_err = 0.0, worst_changed = 0.0;
  int flagged_ok = 0, unflagged_ok = 0;
  for (int f = 0; f < 100; ++f) {
    // n = 200k + 1 puts both percentile ranks on order statistics.
    const int n = 200 * (3 + static_cast<int>(rng() % 30)) + 1;
    std::normal_distribution<double> g(0.05, 0.08);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = g(rng);
    // Outliers on both sides, at most 0.4% of the entries.
    const int outliers = 1 + static_cast<int>(rng() % static_cast<unsigned>(std::max(1, n / 250)));
    std::uniform_real_distribution<double> hot(0.45, 0.95), cold(-0.95, -0.45);
    for (int k = 0; k < outliers; ++k) v[static_cast<Eigen::Index>(rng() % static_cast<unsigned>(n))] = (k % 2 ? cold : hot)(rng);
    const std::vector<double> raw(v.data(), v.data() + n);
    const ClipResult r = detect_and_clip(v, {});
    const double ref_hi = sorted_percentile(raw, 99.5);
    const double err = std::abs(r.field.maxCoeff() - ref_hi);
    const double changed = static_cast<double>((r.field.array() != v.array()).count()) / n;
    worst_err = std::max(worst_err, err);
    worst_changed = std::max(worst_changed, changed);
    if (r.flagged && err <= 1e-9 && changed <= 0.01) ++flagged_ok;

    std::uniform_real_distribution<double> calm(-0.39, 0.39);
    Eigen::VectorXd u(n);
    for (auto& x : u) x = calm(rng);
    const ClipResult q = detect_and_clip(u, {});
    if (!q.flagged && std::memcmp(q.field.data(), u.data(), sizeof(double) * static_cast<std::size_t>(n)) == 0) {
      ++unflagged_ok;
    }
  }
  return {flagged_ok == 100 && unflagged_ok == 100,
          std::to_string(flagged_ok) + "/100 flagged fields within 1e-9 of the sorted 99.5th percentile (worst " +
              fmt(worst_err) + ", max changed " + fmt(100 * worst_changed, 3) + "%), " + std::to_string(unflagged_ok) +
              "/100 unflagged bit-identical"};
}

Outcome lhs() {
  const auto b = ParameterBounds::standard();
  int good = 0;
  for (const std::size_t n : {5, 50, 500}) {
    for (const std::uint64_t seed : {1, 2, 3}) {
      const auto samples = lhs_sample(n, b, seed);
      bool ok = samples.size() == n;
      for (std::size_t d = 0; d < kParamCount && ok; ++d) {
        std::vector<int> hits(n, 0);
        for (const auto& s : samples) {
          const auto i = static_cast<Eigen::Index>(d);
          const double u = (s.to_array()[i] - b.lower[i]) / b.span(d);
          hits[std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)))]++;
        }
        ok = std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
      }
      good += ok ? 1 : 0;
    }
  }
  return {good == 9, std::to_string(good) + "/9 designs (n in {5, 50, 500} x 3 seeds) have one sample per stratum in all 9 dimensions"};
}

// ---------------------------------------------------------------------------
// Oracle trends

constexpr double kTrendSpacing = 10.0;

double max_thinning(const ParameterVector& pv) { return simulate(pv, kTrendSpacing, 1).elemental_thinning.maxCoeff(); }

// Largest |z| over nodes formed onto the flange plane, where the die height is 0.
double flange_ripple(const ParameterVector& pv) {
  const FormingResult r = simulate(pv, kTrendSpacing, 1);
  const DieProfile die = DieProfile::from(pv);
  double a = 0.0;
  for (Eigen::Index i = 0; i < r.nodes_final.cols(); ++i) {
    const Point2 p = r.nodes_final.col(i).head<2>();
    if (die.distance(p) > die.flange_start()) a = std::max(a, std::abs(r.nodes_final(2, i)));
  }
  return a;
}

Outcome oracle_trends() {
  const auto b = ParameterBounds::standard();
  struct Trend {
    Param p;
    const char* label;
    std::function<bool(double lo_value, double hi_value)> holds;  // response at lower / higher parameter
    std::function<double(const ParameterVector&)> response;
  };
  const std::vector<Trend> trends = {
      {Param::t_init, "thinning up with t_init", [](double lo, double hi) { return hi > lo; }, max_thinning},
      {Param::speed, "thinning down with speed", [](double lo, double hi) { return hi < lo; }, max_thinning},
      {Param::r_punch, "thinning down with r_punch", [](double lo, double hi) { return hi < lo; }, max_thinning},
      {Param::t_spacer, "ripples up with t_spacer",
       [](double lo, double hi) { return hi > lo || (hi == 0.0 && lo == 0.0); }, flange_ripple}};
  std::string detail;
  bool all = true;
  std::uint64_t seed = 500;
  for (const Trend& t : trends) {
    const auto base = lhs_sample(100, b, seed++);
    const auto other = lhs_sample(100, b, seed++);
    const auto i = static_cast<std::size_t>(t.p);
    const double min_gap = 0.1 * b.span(i);
    int ok = 0;
    for (std::size_t k = 0; k < 100; ++k) {
      ParameterVector lo = base[k], hi = base[k];
      double x = base[k][t.p], y = other[k][t.p];
      if (std::abs(x - y) < min_gap) y = x + (x - b.lower[static_cast<Eigen::Index>(i)] > 0.5 * b.span(i) ? -0.5 : 0.5) * b.span(i);
      lo[t.p] = std::min(x, y);
      hi[t.p] = std::max(x, y);
      if (t.holds(t.response(lo), t.response(hi))) ++ok;
    }
    all = all && ok == 100;
    detail += std::string(detail.empty() ? "" : ", ") + t.label + " " + std::to_string(ok) + "/100";
  }
  return {all, detail};
}

// ---------------------------------------------------------------------------
// Training-based criteria share one dataset and the size study's networks.

PipelineConfig study_pipeline() {
  PipelineConfig cfg;
  cfg.grid.n_pixels = 64;
  return cfg;
}

const Dataset& study_dataset() {
  static const Dataset ds = [] {
    const auto start = Clock::now();
    Dataset d = generate_dataset(80, study_pipeline(), 2024);
    std::cerr << "  [dataset] 80 samples at n=64 in " << fmt(seconds_since(start), 3) << " s\n";
    return d;
  }();
  return ds;
}

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v;
  for (std::size_t i = a; i < b; ++i) v.push_back(i);
  return v;
}

TrainConfig study_train_config() {
  TrainConfig tc;
  tc.epochs = 1000000;
  tc.patience = 1000000;
  tc.batch_size = 8;
  tc.max_steps = env_long("FORMCAST_STUDY_STEPS", 800);
  tc.adam.learning_rate = 1e-3;
  return tc;
}

Outcome overfit() {
  const Dataset& ds = study_dataset();
  const SampleTensors set = to_tensors(ds, range(0, 8), TargetKind::thinning);
  nn::ResSEUNet<float> net(nn::NetConfig::thinning(64), 1);
  TrainConfig tc;
  tc.epochs = 2000;
  tc.patience = 2000;
  tc.batch_size = 8;
  tc.max_steps = 2000;
  tc.target_loss = 1e-4;
  tc.adam.learning_rate = 1e-3;
  const auto start = Clock::now();
  const TrainRun run = train(net, set, SampleTensors{}, tc);
  const double t = seconds_since(start);
  const double best = *std::min_element(run.train_loss.begin(), run.train_loss.end());
  const double eval = evaluate_loss(net, set);
  return {best < 1e-4 && t < 1800.0, "train MSE " + fmt(best) + " after " + std::to_string(run.steps) +
                                          " steps (eval-mode " + fmt(eval) + "), " + fmt(t, 4) + " s"};
}

struct StudyOutcome {
  SizeStudyResult result;
  double seconds = 0.0;
  nn::NamedTensors<float> net64;  // size 64, first seed
};

const StudyOutcome& study() {
  static const StudyOutcome out = [] {
    StudyOutcome o;
    const Dataset& ds = study_dataset();
    SizeStudyConfig cfg;
    cfg.train = study_train_config();
    cfg.on_trained = [&o](int size, std::uint64_t seed, const nn::ResSEUNet<float>& net) {
      std::cerr << "  [study] size " << size << " seed " << seed << " trained\n";
      if (size == 64 && seed == 1) o.net64 = net.state_dict();
    };
    const auto start = Clock::now();
    o.result = size_study(ds, range(0, 64), range(64, 80), nn::NetConfig::thinning(64), cfg);
    o.seconds = seconds_since(start);
    return o;
  }();
  return out;
}

nn::ResSEUNet<float> trained_net() {
  nn::ResSEUNet<float> net(nn::NetConfig::thinning(64), 1);
  net.load_state_dict(study().net64);
  return net;
}

Outcome size_trend() {
  const StudyOutcome& s = study();
  bool monotone = true;
  std::string detail;
  for (std::size_t k = 0; k < s.result.summary.size(); ++k) {
    const auto& row = s.result.summary[k];
    if (k > 0 && row.mean_mse > s.result.summary[k - 1].mean_mse) monotone = false;
    detail += std::string(k ? ", " : "") + std::to_string(row.size) + ": " + fmt(row.mean_mse) + " +- " + fmt(row.std_mse, 2);
  }
  return {monotone && s.seconds < 6 * 3600.0,
          "mean test MSE " + detail + " (" + std::to_string(study_train_config().max_steps) + " steps per run), " +
              fmt(s.seconds / 60.0, 4) + " min"};
}

Outcome kld() {
  const Dataset& ds = study_dataset();
  const auto test = range(64, 80);
  const SampleTensors set = to_tensors(ds, test, TargetKind::thinning);
  std::vector<ImageD> gt, pd;
  const nn::Tensor<float> pred = predict_batch(trained_net(), set.inputs);
  for (std::size_t k = 0; k < test.size(); ++k) {
    gt.push_back(stack_plane(ds.samples[test[k]].target.thinning, 0, 64));
    pd.push_back(channel_image(pred, static_cast<Eigen::Index>(k), 0));
  }
  const double self = kld_stats(gt, gt, set.masks, FieldStatistic::max);
  const double d = kld_stats(gt, pd, set.masks, FieldStatistic::max);
  return {self == 0.0 && d < 0.1, "KLD(X, X) = " + fmt(self) + ", KLD(GT || PD) of per-image max thinning on " +
                                      std::to_string(test.size()) + " test geometries = " + fmt(d) + " nats"};
}

Outcome speed_sweep_smoothness() {
  const nn::ResSEUNet<float> net = trained_net();
  std::vector<double> speeds;
  for (int k = 0; k < 10; ++k) speeds.push_back(50.0 + 50.0 * k);
  const auto b = ParameterBounds::standard();
  const ParameterVector pv = ParameterVector::from_array(0.5 * (b.lower + b.upper));
  const SweepResult s = speed_sweep(pv, speeds, {350.0, 500.0}, &net, study_pipeline());
  const double ratio = s.max_adjacent_change_ratio();
  return {s.frames.size() == 20 && ratio <= 0.25,
          std::to_string(s.frames.size()) + " frames, max adjacent change " + fmt(100 * ratio, 3) + "% of the sweep range"};
}

Outcome service_latency() {
  const nn::ResSEUNet<float> thin = trained_net();
  // Latency does not depend on the weight values.
  const nn::ResSEUNet<float> disp(nn::NetConfig::displacement(64), 7);
  Service svc(study_pipeline());
  svc.set_predictor(std::make_shared<const Predictor>(make_checkpoint(thin), make_checkpoint(disp), study_pipeline()));
  HttpServer server(svc, 4);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.run(); });

  const auto designs = lhs_sample(124, ParameterBounds::standard(), 99);
  constexpr int kClients = 4;
  constexpr int kPerClient = 30;
  {
    httplib::Client warm("127.0.0.1", port);
    for (int k = 0; k < 2; ++k) warm.Post("/predict", to_json(designs[120 + k]).dump(), "application/json");
  }
  std::vector<double> latencies;
  std::mutex mutex;
  std::atomic<int> failures{0};
  std::vector<std::thread> clients;
  for (int c = 0; c < kClients; ++c) {
    clients.emplace_back([&, c] {
      httplib::Client client("127.0.0.1", port);
      client.set_read_timeout(60, 0);
      for (int k = 0; k < kPerClient; ++k) {
        const std::string body = to_json(designs[static_cast<std::size_t>(c * kPerClient + k)]).dump();
        const auto t0 = Clock::now();
        const auto res = client.Post("/predict", body, "application/json");
        const double ms = 1000.0 * seconds_since(t0);
        if (!res || res->status != 200) ++failures;
        const std::lock_guard lock(mutex);
        latencies.push_back(ms);
      }
    });
  }
  for (auto& t : clients) t.join();

  // Identical requests, issued concurrently and then serially.
  const std::string same = to_json(designs[123]).dump();
  std::vector<std::string> bodies(kClients + 1);
  std::vector<std::thread> dup;
  for (int c = 0; c < kClients; ++c) {
    dup.emplace_back([&, c] {
      httplib::Client client("127.0.0.1", port);
      client.set_read_timeout(60, 0);
      if (auto res = client.Post("/predict", same, "application/json")) bodies[static_cast<std::size_t>(c)] = res->body;
    });
  }
  for (auto& t : dup) t.join();
  httplib::Client serial("127.0.0.1", port);
  if (auto res = serial.Post("/predict", same, "application/json")) bodies[kClients] = res->body;
  server.stop();
  th.join();

  const bool identical = !bodies[0].empty() && std::all_of(bodies.begin(), bodies.end(), [&](const std::string& s) { return s == bodies[0]; });
  std::sort(latencies.begin(), latencies.end());
  const double p50 = latencies[latencies.size() / 2];
  const double p95 = latencies[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(latencies.size()))) - 1];
  return {p95 < 250.0 && identical && failures == 0,
          "p95 " + fmt(p95) + " ms, p50 " + fmt(p50) + " ms over " + std::to_string(latencies.size()) + " requests from " +
              std::to_string(kClients) + " concurrent clients on " + std::to_string(std::thread::hardware_concurrency()) +
              " hardware thread(s); identical responses byte-identical: " + (identical ? "yes" : "no") +
              "; failures " + std::to_string(failures.load())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient_correctness", gradients},
      {"architecture_fidelity", architecture},
      {"undeform_round_trip", round_trip},
      {"clipping", clipping},
      {"lhs_stratification", lhs},
      {"oracle_trends", oracle_trends},
      {"overfit", overfit},
      {"generalization_trend", size_trend},
      {"kld_sanity", kld},
      {"speed_sweep_smoothness", speed_sweep_smoothness},
      {"service_latency", service_latency},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(seconds_since(start), 4)
              << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
