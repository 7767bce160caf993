#include <algorithm>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "formcast/train.hpp"

using namespace formcast;

namespace {

const Dataset& tiny_dataset() {
  static const Dataset ds = [] {
    PipelineConfig cfg;
    cfg.grid.n_pixels = 32;
    cfg.mesh_spacing = 10.0;
    return generate_dataset(6, cfg, 3);
  }();
  return ds;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("split sizes, determinism and coverage") {
    const Split s = split_indices(1800, 0.1, 4);
    CHECK(s.train.size() == 1620);
    CHECK(s.test.size() == 180);
    const Split t = split_indices(1800, 0.1, 4);
    CHECK(s.train == t.train);
    CHECK(s.test == t.test);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.test) CHECK(all.insert(i).second);
    CHECK(all.size() == 1800);
    CHECK(*all.rbegin() == 1799);
    CHECK_THROWS(split_indices(10, 0.0, 1));
  }

  TEST_CASE("target kinds") {
    CHECK(target_channels(TargetKind::thinning) == 1);
    CHECK(target_channels(TargetKind::displacement) == 3);
    CHECK(target_kind_from("displacement") == TargetKind::displacement);
    CHECK(to_string(TargetKind::thinning) == "thinning");
    CHECK_THROWS(target_kind_from("stress"));
  }

  TEST_CASE("tensors follow the samples") {
    const Dataset& ds = tiny_dataset();
    const SampleTensors t = to_tensors(ds, {0, 2}, TargetKind::displacement);
    CHECK(t.inputs.shape() == nn::Shape({2, 4, 32, 32}));
    CHECK(t.targets.shape() == nn::Shape({2, 3, 32, 32}));
    CHECK(t.ids == std::vector<std::string>{ds.samples[0].id, ds.samples[2].id});
    const ImageD plane = channel_image(t.inputs, 1, 0);
    CHECK((plane == stack_plane(ds.samples[2].input.data, 0, 32)).all());
    const nn::Tensor<float> one = input_tensor(ds.samples[1].input);
    CHECK(one.shape() == nn::Shape({1, 4, 32, 32}));
    const SampleTensors sub = t.subset({1});
    CHECK(sub.ids.front() == ds.samples[2].id);
  }

  TEST_CASE("one epoch lowers the loss") {
    const SampleTensors set = to_tensors(tiny_dataset(), {0, 1, 2, 3, 4, 5}, TargetKind::thinning);
    nn::ResSEUNet<float> net(nn::NetConfig::thinning(32), 1);
    const double before = evaluate_loss(net, set);
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.adam.learning_rate = 1e-3;
    Trainer trainer(net, cfg);
    trainer.run_epoch(set);
    CHECK(trainer.epoch() == 1);
    CHECK(trainer.steps() == 3);
    CHECK(evaluate_loss(net, set) < before);
  }

  TEST_CASE("resuming reproduces the next epoch") {
    const SampleTensors set = to_tensors(tiny_dataset(), {0, 1, 2, 3, 4, 5}, TargetKind::thinning);
    TrainConfig cfg;
    cfg.batch_size = 3;
    cfg.seed = 5;
    nn::ResSEUNet<float> a(nn::NetConfig::thinning(32), 2);
    Trainer ta(a, cfg);
    ta.run_epoch(set);
    const auto path = std::filesystem::temp_directory_path() / "formcast_test_resume.fqt";
    save_checkpoint(path.string(), ta.checkpoint());
    const double next = ta.run_epoch(set);

    nn::ResSEUNet<float> b(nn::NetConfig::thinning(32), 99);
    Trainer tb(b, cfg);
    tb.resume(load_checkpoint(path.string()));
    std::filesystem::remove(path);
    CHECK(tb.epoch() == 1);
    CHECK(tb.steps() == 2);
    const double resumed = tb.run_epoch(set);
    CHECK(std::abs(resumed - next) < 1e-6);
  }

  TEST_CASE("training is deterministic and stops at the step limit") {
    const Dataset& ds = tiny_dataset();
    const SampleTensors train_set = to_tensors(ds, {0, 1, 2, 3}, TargetKind::thinning);
    const SampleTensors test_set = to_tensors(ds, {4, 5}, TargetKind::thinning);
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.epochs = 10;
    cfg.max_steps = 5;
    cfg.seed = 1;
    nn::ResSEUNet<float> a(nn::NetConfig::thinning(32), 3), b(nn::NetConfig::thinning(32), 3);
    const TrainRun ra = train(a, train_set, test_set, cfg);
    const TrainRun rb = train(b, train_set, test_set, cfg);
    CHECK(ra.steps == 5);
    CHECK(ra.stop_reason == "step limit");
    CHECK(ra.train_loss == rb.train_loss);
    CHECK(ra.test_loss == rb.test_loss);
    CHECK(ra.best_epoch >= 1);
    CHECK(ra.best_test_loss == *std::min_element(ra.test_loss.begin(), ra.test_loss.end()));
    // The best weights are restored at the end.
    CHECK(evaluate_loss(a, test_set) == doctest::Approx(ra.best_test_loss).epsilon(1e-6));
  }

  TEST_CASE("train config json round trip") {
    TrainConfig c;
    c.epochs = 7;
    c.max_steps = 12;
    c.adam.learning_rate = 3e-4;
    CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
  }
}
