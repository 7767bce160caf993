#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "formcast/config.hpp"
#include "formcast/fqt.hpp"
#include "formcast/metrics.hpp"
#include "formcast/params.hpp"
#include "formcast/pipeline.hpp"
#include "formcast/reconstruct.hpp"
#include "formcast/service.hpp"
#include "formcast/studies.hpp"
#include "formcast/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace formcast;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> res;
  std::string out = ".";
};

// Resolution a checkpoint must match: only when the user fixed one.
int pinned_resolution(const Common& c, const ToolkitConfig& cfg) {
  return c.res || !c.config_path.empty() ? cfg.pipeline.grid.n_pixels : 0;
}

ToolkitConfig resolve(const Common& c) {
  ToolkitConfig cfg;
  cfg.net.resolution = cfg.pipeline.grid.n_pixels;
  if (!c.config_path.empty()) cfg = ToolkitConfig::load(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.res) cfg.set_resolution(*c.res);
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(is);
}

ParameterVector midpoint(const ParameterBounds& b) {
  return ParameterVector::from_array(0.5 * (b.lower + b.upper));
}

ParameterVector params_from(const std::string& path, const ParameterBounds& bounds) {
  const ParameterVector pv = path.empty() ? midpoint(bounds) : parameter_vector_from_json(read_json(path));
  const auto report = validate(pv, bounds);
  if (!report.ok()) {
    std::string msg = "invalid parameters:";
    for (const auto& v : report.violations) msg += "\n  " + v;
    throw std::invalid_argument(msg);
  }
  return pv;
}

// A resolution of 0 accepts whatever the checkpoint was trained at.
Checkpoint checkpoint_for(const std::string& path, int resolution, int channels, const char* what) {
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " checkpoint '" + path + "' does not exist");
  Checkpoint ck = load_checkpoint(path);
  if (resolution != 0 && ck.net.resolution != resolution) {
    throw std::invalid_argument(std::string(what) + " checkpoint resolution " + std::to_string(ck.net.resolution) +
                                " does not match the configured grid " + std::to_string(resolution));
  }
  if (ck.net.out_channels != channels) {
    throw std::invalid_argument(std::string(what) + " checkpoint has " + std::to_string(ck.net.out_channels) +
                                " output channels, expected " + std::to_string(channels));
  }
  return ck;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stod(item));
  return out;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Seed (overrides the config)");
  app->add_option("--res", c.res, "Grid resolution in pixels per side (overrides the config)");
  app->add_option("--out", c.out, "Output directory");
}

// Dataset-resolution check shared by train and evaluate.
Dataset load_matching(const std::string& dir, const ToolkitConfig& cfg, bool res_given) {
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory '" + dir + "' does not exist");
  Dataset ds = load_dataset(dir);
  const int n = pipeline_config_of(ds).grid.n_pixels;
  if (res_given && n != cfg.pipeline.grid.n_pixels) {
    throw std::invalid_argument("dataset resolution " + std::to_string(n) + " differs from the configured grid " +
                                std::to_string(cfg.pipeline.grid.n_pixels));
  }
  return ds;
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forming-feasibility surrogate toolkit"};
  app.require_subcommand(1);
  Common common;

  // doe
  std::size_t doe_n = 50;
  auto* doe = app.add_subcommand("doe", "Latin hypercube design of experiments");
  add_common(doe, common);
  doe->add_option("--n", doe_n, "Sample count")->required();

  // generate
  std::size_t gen_n = 0;
  std::string gen_doe;
  auto* gen = app.add_subcommand("generate", "Oracle plus rasterization into a dataset directory");
  add_common(gen, common);
  gen->add_option("--n", gen_n, "Sample count (LHS)");
  gen->add_option("--doe", gen_doe, "Use the designs of a doe JSON document instead of a new LHS")
      ->check(CLI::ExistingFile);

  // train
  std::string train_data, train_target = "thinning", train_resume;
  double test_frac = 0.1;
  std::optional<int> epochs, batch;
  std::optional<std::int64_t> max_steps;
  bool verbose = false;
  auto* trn = app.add_subcommand("train", "Train one network on a dataset");
  add_common(trn, common);
  trn->add_option("--data", train_data, "Dataset directory")->required();
  trn->add_option("--target", train_target, "thinning or displacement");
  trn->add_option("--test-frac", test_frac, "Held-out fraction");
  trn->add_option("--epochs", epochs, "Epoch cap");
  trn->add_option("--batch", batch, "Batch size");
  trn->add_option("--max-steps", max_steps, "Optimizer step cap");
  trn->add_option("--resume", train_resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  trn->add_flag("--verbose", verbose, "Print per-epoch losses");

  // evaluate
  std::string eval_data, eval_ck, eval_target = "thinning";
  auto* evl = app.add_subcommand("evaluate", "Metrics of a checkpoint on the held-out split of a dataset");
  add_common(evl, common);
  evl->add_option("--data", eval_data, "Dataset directory")->required();
  evl->add_option("--checkpoint", eval_ck, "Checkpoint")->required();
  evl->add_option("--target", eval_target, "thinning or displacement");
  evl->add_option("--test-frac", test_frac, "Held-out fraction (as used for training)");

  // predict
  std::string thin_ck, disp_ck, params_path;
  auto* prd = app.add_subcommand("predict", "Predict the fields of one design");
  add_common(prd, common);
  prd->add_option("--thinning", thin_ck, "Thinning checkpoint")->required();
  prd->add_option("--displacement", disp_ck, "Displacement checkpoint")->required();
  prd->add_option("--params", params_path, "Parameter JSON (default: midpoint of the bounds)");

  // sweep
  std::string speeds_text = "50,100,150,200,250,300,350,400,450,500", temps_text = "350,500";
  auto* swp = app.add_subcommand("sweep", "Predicted thinning over a speed/temperature sweep");
  add_common(swp, common);
  swp->add_option("--thinning", thin_ck, "Thinning checkpoint")->required();
  swp->add_option("--params", params_path, "Parameter JSON for the fixed parameters");
  swp->add_option("--speeds", speeds_text, "Comma-separated speeds, monotone");
  swp->add_option("--temps", temps_text, "Comma-separated temperatures");

  // reconstruct
  std::string fields_path;
  int window = 15;
  auto* rec = app.add_subcommand("reconstruct", "As-formed mesh and wrinkle summary from field tensors");
  add_common(rec, common);
  rec->add_option("--fields", fields_path, "FQT file with thinning, displacement and mask")
      ->required()
      ->check(CLI::ExistingFile);
  rec->add_option("--params", params_path, "Parameter JSON of the design")->required();
  rec->add_option("--window", window, "Moving-average window in pixels (odd)");

  // serve
  std::string host = "127.0.0.1";
  int port = 8080, threads = 4;
  auto* srv = app.add_subcommand("serve", "HTTP prediction service");
  add_common(srv, common);
  srv->add_option("--thinning", thin_ck, "Thinning checkpoint")->required();
  srv->add_option("--displacement", disp_ck, "Displacement checkpoint")->required();
  srv->add_option("--host", host, "Bind address");
  srv->add_option("--port", port, "Port");
  srv->add_option("--threads", threads, "Worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    ToolkitConfig cfg = resolve(common);
    const fs::path out(common.out);

    if (doe->parsed()) {
      const auto samples = lhs_sample(doe_n, cfg.pipeline.bounds, cfg.seed);
      write_json(out / "doe.json", doe_document(samples, cfg.pipeline.bounds, cfg.seed));
      std::cout << "wrote " << samples.size() << " designs to " << (out / "doe.json").string() << '\n';
    } else if (gen->parsed()) {
      std::vector<ParameterVector> designs;
      if (!gen_doe.empty()) {
        for (const auto& s : read_json(gen_doe).at("samples")) designs.push_back(parameter_vector_from_json(s));
      } else {
        if (gen_n == 0) throw std::invalid_argument("generate needs --n >= 1 or --doe");
        designs = lhs_sample(gen_n, cfg.pipeline.bounds, cfg.seed);
      }
      const auto start = std::chrono::steady_clock::now();
      const Dataset ds = generate_dataset(designs, cfg.pipeline, cfg.seed);
      save_dataset(ds, out.string());
      std::size_t flagged = 0;
      for (const auto& s : ds.samples) flagged += s.target.flagged ? 1 : 0;
      std::cout << "generated " << ds.samples.size() << " samples (" << flagged << " flagged) in "
                << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s -> "
                << out.string() << '\n';
    } else if (trn->parsed()) {
      const Dataset ds = load_matching(train_data, cfg, pinned_resolution(common, cfg) != 0);
      const int n = pipeline_config_of(ds).grid.n_pixels;
      cfg.net.resolution = n;
      const TargetKind kind = target_kind_from(train_target);
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seed;
      if (epochs) tc.epochs = *epochs;
      if (batch) tc.batch_size = *batch;
      if (max_steps) tc.max_steps = *max_steps;
      tc.verbose = verbose;
      fs::create_directories(out);
      tc.checkpoint_path = (out / (to_string(kind) + ".fqt")).string();

      const Split split = split_indices(ds.samples.size(), test_frac, cfg.seed);
      const SampleTensors train_set = to_tensors(ds, split.train, kind);
      const SampleTensors test_set = to_tensors(ds, split.test, kind);
      std::optional<Checkpoint> resume;
      if (!train_resume.empty()) resume = checkpoint_for(train_resume, n, target_channels(kind), "resume");
      nn::ResSEUNet<float> net(resume ? resume->net : cfg.net_for(kind), cfg.seed);
      const TrainRun run = train(net, train_set, test_set, tc, resume ? &*resume : nullptr);
      nlohmann::json report = run.to_json();
      report["final_train_loss"] = run.train_loss.empty() ? 0.0 : run.train_loss.back();
      write_json(out / ("train_" + to_string(kind) + ".json"), report);
      std::cout << "trained " << to_string(kind) << " network: " << run.train_loss.size() << " epochs, "
                << run.steps << " steps, best loss " << run.best_test_loss << " (epoch " << run.best_epoch
                << "), final train loss " << report["final_train_loss"].get<double>() << ", stop: "
                << run.stop_reason << " -> " << run.checkpoint << '\n';
    } else if (evl->parsed()) {
      const Dataset ds = load_matching(eval_data, cfg, pinned_resolution(common, cfg) != 0);
      const int n = pipeline_config_of(ds).grid.n_pixels;
      const TargetKind kind = target_kind_from(eval_target);
      const Checkpoint ck = checkpoint_for(eval_ck, n, target_channels(kind), "evaluation");
      const nn::ResSEUNet<float> net = network_from(ck);
      const Split split = split_indices(ds.samples.size(), test_frac, cfg.seed);
      const SampleTensors set = to_tensors(ds, split.test, kind);
      const nn::Tensor<float> pred = predict_batch(net, set.inputs);

      nlohmann::json report = {{"samples", set.size()}, {"loss", evaluate_loss(net, set)}, {"target", eval_target}};
      for (int c = 0; c < target_channels(kind); ++c) {
        std::vector<ImageD> pd;
        std::vector<ImageD> gt;
        double mse = 0.0;
        double mae = 0.0;
        for (std::size_t k = 0; k < split.test.size(); ++k) {
          const Sample& s = ds.samples[split.test[k]];
          pd.push_back(channel_image(pred, static_cast<Eigen::Index>(k), c));
          gt.push_back(stack_plane(kind == TargetKind::thinning ? s.target.thinning : s.target.displacement, c, n));
          mse += masked_mse(pd.back(), gt.back(), set.masks[k]);
          mae += mae_max(pd.back(), gt.back(), set.masks[k]);
        }
        const double count = static_cast<double>(pd.size());
        nlohmann::json ch = {{"masked_mse", mse / count}, {"mae_max_mean", mae / count}};
        try {
          ch["mre"] = mre(pd, gt, set.masks);
        } catch (const std::domain_error&) {
          ch["mre"] = nullptr;
        }
        for (const auto& [name, stat] : {std::pair{"kld_max", FieldStatistic::max}, {"kld_mean", FieldStatistic::mean}}) {
          try {
            ch[name] = kld_stats(gt, pd, set.masks, stat);
          } catch (const std::exception&) {
            ch[name] = nullptr;
          }
        }
        report["channels"].push_back(ch);
      }
      write_json(out / "evaluation.json", report);
      std::cout << report.dump(2) << '\n';
    } else if (prd->parsed()) {
      const Checkpoint tck = checkpoint_for(thin_ck, pinned_resolution(common, cfg), 1, "thinning");
      const Checkpoint dck = checkpoint_for(disp_ck, tck.net.resolution, 3, "displacement");
      const ParameterVector pv = params_from(params_path, cfg.pipeline.bounds);
      const Predictor predictor(tck, dck, cfg.pipeline);
      const auto r = predictor.predict(pv);
      const int n = predictor.resolution();
      fqt::Container c;
      c.records.push_back(fqt::from_stack("thinning", r.thinning, n));
      c.records.push_back(fqt::from_stack("displacement", r.displacement, n));
      c.records.push_back(fqt::from_image("mask", r.mask));
      fs::create_directories(out);
      fqt::save((out / "prediction.fqt").string(), c);
      nlohmann::json summary = r.summary.to_json();
      summary["params"] = to_json(pv);
      summary["model_id"] = predictor.model_id();
      write_json(out / "prediction.json", summary);
      std::cout << summary.dump(2) << '\n';
    } else if (swp->parsed()) {
      const Checkpoint tck = checkpoint_for(thin_ck, pinned_resolution(common, cfg), 1, "thinning");
      cfg.set_resolution(tck.net.resolution);
      const nn::ResSEUNet<float> net = network_from(tck);
      const ParameterVector pv = params_from(params_path, cfg.pipeline.bounds);
      const SweepResult sweep = speed_sweep(pv, parse_list(speeds_text), parse_list(temps_text), &net, cfg.pipeline);
      fqt::Container c;
      for (std::size_t k = 0; k < sweep.frames.size(); ++k) {
        c.records.push_back(fqt::from_image("frame" + std::to_string(k), sweep.frames[k].thinning.cast<float>()));
      }
      c.records.push_back(fqt::from_image("mask", sweep.mask));
      fs::create_directories(out);
      fqt::save((out / "sweep.fqt").string(), c);
      nlohmann::json meta = sweep.metadata();
      meta["max_adjacent_change_ratio"] = sweep.max_adjacent_change_ratio();
      write_json(out / "sweep.json", meta);
      std::cout << "wrote " << sweep.frames.size() << " frames, max adjacent change "
                << meta["max_adjacent_change_ratio"].get<double>() << " of range\n";
    } else if (rec->parsed()) {
      const fqt::Container c = fqt::load(fields_path);
      const StackArray thinning = fqt::to_stack(c.at("thinning"));
      const StackArray displacement = fqt::to_stack(c.at("displacement"));
      const Image mask = fqt::to_image(c.at("mask"));
      GridSpec grid = cfg.pipeline.grid;
      grid.n_pixels = static_cast<int>(mask.rows());
      const ParameterVector pv = params_from(params_path, cfg.pipeline.bounds);
      const AsFormedMesh mesh = as_formed_mesh(displacement, thinning, mask, grid);
      fs::create_directories(out);
      std::ofstream os(out / "as_formed.fqm");
      write_fqm(os, mesh);
      const ReconstructSummary s = summarize(displacement, thinning, mask, pv, grid, window);
      nlohmann::json j = s.to_json();
      j["vertices"] = mesh.vertices.cols();
      j["faces"] = mesh.faces.cols();
      write_json(out / "reconstruct.json", j);
      std::cout << j.dump(2) << '\n';
    } else if (srv->parsed()) {
      Service service(cfg.pipeline);
      HttpServer server(service, threads);
      const int bound = server.bind(host, port);
      std::cout << "serving on http://" << host << ':' << bound << " (loading models)" << std::endl;
      std::thread loader([&] {
        try {
          const Checkpoint tck = checkpoint_for(thin_ck, pinned_resolution(common, cfg), 1, "thinning");
          const Checkpoint dck = checkpoint_for(disp_ck, tck.net.resolution, 3, "displacement");
          service.set_predictor(std::make_shared<const Predictor>(tck, dck, cfg.pipeline));
          std::cout << "models ready" << std::endl;
        } catch (const std::exception& e) {
          std::cerr << "error: " << e.what() << std::endl;
          server.stop();
        }
      });
      std::signal(SIGINT, [](int) { g_stop = 1; });
      std::signal(SIGTERM, [](int) { g_stop = 1; });
      std::thread watcher([&] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
      });
      server.run();
      g_stop = 1;
      loader.join();
      watcher.join();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
