#include <random>

#include "doctest.h"
#include "formcast/resseunet.hpp"
#include "gradcheck.hpp"

using namespace formcast;
using namespace formcast::testing;

TEST_SUITE("resseunet") {
  TEST_CASE("layer shapes at full resolution") {
    const auto shapes = nn::layer_shapes(nn::NetConfig::thinning(256));
    REQUIRE(shapes.size() == 15);
    const std::vector<std::tuple<std::string, int, int, int>> expected = {
        {"E1", 4, 16, 256},   {"E2", 16, 32, 128},  {"E3", 32, 64, 64},   {"E4", 64, 128, 32},
        {"B1", 128, 128, 32}, {"B2", 128, 128, 32}, {"B3", 128, 128, 32}, {"B4", 128, 128, 32},
        {"B5", 128, 128, 32}, {"B6", 128, 128, 32}, {"D1", 256, 64, 64},  {"D2", 128, 32, 128},
        {"D3", 64, 16, 256},  {"D4", 32, 8, 256},   {"D5", 8, 1, 256}};
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const auto& [id, cin, cout, hw] = expected[i];
      INFO(id);
      CHECK(shapes[i].id == id);
      CHECK(shapes[i].in_channels == cin);
      CHECK(shapes[i].channels == cout);
      CHECK(shapes[i].height == hw);
      CHECK(shapes[i].width == hw);
    }
    CHECK(nn::layer_shapes(nn::NetConfig::displacement(256)).back().channels == 3);
  }

  TEST_CASE("reduced resolution bottleneck") {
    const auto shapes = nn::layer_shapes(nn::NetConfig::thinning(64));
    CHECK(shapes[4].channels == 128);
    CHECK(shapes[4].height == 8);
    CHECK(shapes.back().height == 64);
  }

  TEST_CASE("mismatched layouts abort construction") {
    nn::NetConfig bad = nn::NetConfig::thinning(64);
    bad.encoder[1].stride = 1;
    CHECK_THROWS_AS(nn::layer_shapes(bad), std::logic_error);
    nn::NetConfig bad_se = nn::NetConfig::thinning(64);
    bad_se.encoder[3].out_channels = 120;
    CHECK_THROWS_AS(nn::layer_shapes(bad_se), std::logic_error);
    nn::NetConfig bad_pad = nn::NetConfig::thinning(64);
    bad_pad.decoder[0].pad = 0;
    CHECK_THROWS(nn::ResSEUNet<float>(bad_pad, 1));
    nn::NetConfig odd = nn::NetConfig::thinning(60);
    CHECK_THROWS(odd.check());
  }

  TEST_CASE("parameter counts") {
    const nn::NetConfig cfg = nn::NetConfig::thinning(256);
    const nn::ResSEUNet<float> net(cfg, 3);
    const auto params = net.named_parameters();
    REQUIRE(!params.empty());
    CHECK(params[0].second.value().size() + params[1].second.value().size() == 4 * 16 * 9 * 9 + 16);
    std::int64_t total = 0;
    for (const auto& [name, p] : params) total += p.value().size();
    CHECK(total == nn::count_params(cfg));
    CHECK(nn::count_params(cfg) == nn::count_params(nn::NetConfig::thinning(256)));
  }

  TEST_CASE("squeeze excitation with zero weights halves the input") {
    auto se = nn::make_se_weights<double>(128, 16, 1);
    CHECK(se.fc1_weight.value().shape() == nn::Shape({8, 128}));
    CHECK(se.fc2_weight.value().shape() == nn::Shape({256, 8}));
    for (auto* v : {&se.fc1_weight, &se.fc1_bias, &se.fc2_weight, &se.fc2_bias}) v->mutable_value().set_zero();
    std::mt19937_64 rng(2);
    const TensorD u = random_tensor({2, 128, 3, 3}, rng);
    const TensorD v = nn::se_block(VarD::constant(u), se).value();
    CHECK(((v.array() - 0.5 * u.array()).abs() < 1e-15).all());

    TensorD c({1, 4, 2, 2});
    for (int ch = 0; ch < 4; ++ch) {
      for (int k = 0; k < 4; ++k) c[ch * 4 + k] = ch + 1.0;
    }
    const TensorD w = nn::global_avg_pool(VarD::constant(c)).value();
    for (int ch = 0; ch < 4; ++ch) CHECK(w[ch] == doctest::Approx(ch + 1.0));
  }

  TEST_CASE("residual layer with zero weights is a relu") {
    auto layer = nn::make_res_se_layer<double>(128, 16, 4);
    for (auto* u : {&layer.conv1, &layer.conv2}) {
      u->weight.mutable_value().set_zero();
      u->bias.mutable_value().set_zero();
      u->beta.mutable_value().set_zero();
    }
    for (auto* v : {&layer.se.fc1_weight, &layer.se.fc1_bias, &layer.se.fc2_weight, &layer.se.fc2_bias}) {
      v->mutable_value().set_zero();
    }
    std::mt19937_64 rng(5);
    const TensorD x = random_tensor({2, 128, 16, 16}, rng);
    const TensorD y = nn::res_se_layer(VarD::constant(x), layer, true).value();
    CHECK(y.shape() == x.shape());
    CHECK(((y.array() - x.array().max(0.0)).abs() < 1e-12).all());
  }

  TEST_CASE("skip path carries gradient") {
    auto layer = nn::make_res_se_layer<double>(32, 16, 6);
    std::mt19937_64 rng(7);
    const VarD x = VarD::parameter(random_tensor({2, 32, 4, 4}, rng));
    const VarD y = nn::res_se_layer(x, layer, true);
    nn::backward(nn::mse_loss(y, VarD::constant(random_tensor(y.shape(), rng))));
    CHECK(x.grad().array().abs().maxCoeff() > 0.0);
  }

  TEST_CASE("forward shapes and eval determinism") {
    nn::ResSEUNet<float> net(nn::NetConfig::thinning(64), 9);
    std::mt19937_64 rng(1);
    nn::Tensor<float> x({2, 4, 64, 64});
    std::uniform_real_distribution<float> u(0, 1);
    for (nn::Index i = 0; i < x.size(); ++i) x[i] = u(rng);
    const nn::Tensor<float> a = net.infer(x);
    const nn::Tensor<float> b = net.infer(x);
    CHECK(a.shape() == nn::Shape({2, 1, 64, 64}));
    CHECK((a.array() == b.array()).all());
    CHECK(a.array().allFinite());
    nn::FeatureMaps<float> taps;
    const auto y = net.forward(nn::Var<float>::constant(x), false, &taps);
    CHECK(taps.at("B1").shape() == nn::Shape({2, 128, 8, 8}));
    CHECK((y.value().array() == a.array()).all());
    CHECK(net.dump_feature_maps("E1", x).shape() == nn::Shape({2, 16, 64, 64}));
    CHECK_THROWS(net.dump_feature_maps("X9", x));
  }

  TEST_CASE("full-size feature maps") {
    const nn::ResSEUNet<float> net(nn::NetConfig::displacement(256), 2);
    const nn::Tensor<float> x({1, 4, 256, 256}, 0.5f);
    CHECK(net.dump_feature_maps("E1", x).shape() == nn::Shape({1, 16, 256, 256}));
    CHECK(net.infer(x).shape() == nn::Shape({1, 3, 256, 256}));
  }

  TEST_CASE("state dict round trip") {
    const nn::ResSEUNet<float> a(nn::NetConfig::thinning(32), 1);
    nn::ResSEUNet<float> b(nn::NetConfig::thinning(32), 2);
    b.load_state_dict(a.state_dict());
    const nn::Tensor<float> x({1, 4, 32, 32}, 0.3f);
    CHECK((a.infer(x).array() == b.infer(x).array()).all());
    auto broken = a.state_dict();
    broken.pop_back();
    CHECK_THROWS(b.load_state_dict(broken));
  }

  TEST_CASE("config json round trip") {
    const nn::NetConfig c = nn::NetConfig::displacement(128);
    CHECK(nn::NetConfig::from_json(c.to_json()) == c);
  }
}
