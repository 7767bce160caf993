#include <thread>

#include "doctest.h"
#include "formcast/service.hpp"
#include "httplib.h"

using namespace formcast;

namespace {

std::shared_ptr<const Predictor> small_predictor(const PipelineConfig& cfg) {
  const nn::ResSEUNet<float> thin(nn::NetConfig::thinning(32), 1);
  const nn::ResSEUNet<float> disp(nn::NetConfig::displacement(32), 2);
  return std::make_shared<const Predictor>(make_checkpoint(thin), make_checkpoint(disp), cfg);
}

std::string request_body(const ParameterVector& pv) { return to_json(pv).dump(); }

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("base64 round trip and rejection") {
    for (const std::string& s : std::vector<std::string>{"", "a", "ab", "abc", "abcd", std::string("\0\xff\x10", 3)}) {
      CHECK(base64_decode(base64_encode(s)) == s);
    }
    CHECK(base64_encode("Man") == "TWFu");
    CHECK(base64_encode("Ma") == "TWE=");
    CHECK_THROWS(base64_decode("TWF"));
    CHECK_THROWS(base64_decode("TW!u"));
  }

  TEST_CASE("health and meta before the models load") {
    const Service svc;
    CHECK(nlohmann::json::parse(svc.health().body)["status"] == "loading");
    const auto meta = nlohmann::json::parse(svc.meta().body);
    CHECK(meta["ready"] == false);
    const auto b = ParameterBounds::standard();
    for (std::size_t i = 0; i < kParamCount; ++i) {
      const auto& range = meta["bounds"][std::string(kParamNames[i])];
      CHECK(range[0] == b.lower[static_cast<Eigen::Index>(i)]);
      CHECK(range[1] == b.upper[static_cast<Eigen::Index>(i)]);
    }
    CHECK(meta["bounds"]["t_init"] == nlohmann::json::array({350.0, 500.0}));
    CHECK(meta["bounds"]["r_die"] == nlohmann::json::array({5.0, 25.0}));
    CHECK(meta["units"]["speed"] == "mm/s");
    const HttpReply r = svc.predict(request_body(ParameterVector{}));
    CHECK(r.status == 503);
  }

  TEST_CASE("request validation") {
    Service svc;
    svc.set_predictor(small_predictor(PipelineConfig{}));
    ParameterVector pv;
    pv.t_init = 600;
    const HttpReply bad = svc.predict(request_body(pv));
    CHECK(bad.status == 400);
    const auto j = nlohmann::json::parse(bad.body);
    REQUIRE(j["violations"].is_array());
    CHECK(j["violations"].size() >= 1);
    CHECK(j["violations"][0].get<std::string>().find("t_init") != std::string::npos);

    CHECK(svc.predict("not json").status == 400);
    CHECK(svc.predict("[1, 2]").status == 400);
    nlohmann::json missing = to_json(ParameterVector{});
    missing.erase("speed");
    CHECK(svc.predict(missing.dump()).status == 400);
    nlohmann::json extra = to_json(ParameterVector{});
    extra["colour"] = 3;
    CHECK(svc.predict(extra.dump()).status == 400);
    nlohmann::json grid = to_json(ParameterVector{});
    grid["grid"] = {{"n_pixels", 64}};
    CHECK(svc.predict(grid.dump()).status == 400);
    grid["grid"] = {{"n_pixels", 32}, {"frame_mm", 740.0}};
    CHECK(svc.predict(grid.dump()).status == 200);
  }

  TEST_CASE("predictions are pure and summaries match the payload") {
    Service svc;
    svc.set_predictor(small_predictor(PipelineConfig{}));
    CHECK(svc.ready());
    ParameterVector pv;
    pv.t_spacer = 9;
    const HttpReply a = svc.predict(request_body(pv));
    const HttpReply b = svc.predict(request_body(pv));
    REQUIRE(a.status == 200);
    auto ja = nlohmann::json::parse(a.body);
    auto jb = nlohmann::json::parse(b.body);
    for (const char* key : {"thinning", "displacement", "mask", "summary", "model_id"}) CHECK(ja[key] == jb[key]);
    CHECK(ja["resolution"] == 32);

    const PredictPayload p = decode_predict_response(ja);
    CHECK(p.thinning.rows() == 1);
    CHECK(p.displacement.rows() == 3);
    CHECK(p.thinning.cols() == 32 * 32);
    GridSpec grid{32};
    const ReconstructSummary s = summarize(p.displacement, p.thinning, p.mask, pv, grid);
    CHECK(std::abs(s.max_thinning - ja["summary"]["max_thinning"].get<double>()) < 1e-6);
    CHECK(std::abs(s.mean_thinning - ja["summary"]["mean_thinning"].get<double>()) < 1e-6);
    CHECK(std::abs(s.max_wrinkle_height_mm - ja["summary"]["max_wrinkle_height_mm"].get<double>()) < 1e-6);
    CHECK(s.wrinkle_count == ja["summary"]["wrinkle_count"].get<int>());

    const auto meta = nlohmann::json::parse(svc.meta().body);
    CHECK(meta["model_id"] == ja["model_id"]);
    CHECK(meta["resolution"] == 32);
  }

  TEST_CASE("predictor rejects mismatched checkpoints") {
    const nn::ResSEUNet<float> thin(nn::NetConfig::thinning(32), 1);
    const nn::ResSEUNet<float> disp64(nn::NetConfig::displacement(64), 2);
    CHECK_THROWS(Predictor(make_checkpoint(thin), make_checkpoint(disp64), PipelineConfig{}));
    CHECK_THROWS(Predictor(make_checkpoint(thin), make_checkpoint(thin), PipelineConfig{}));
    CHECK(model_id(make_checkpoint(thin)).size() == 8);
    CHECK(model_id(make_checkpoint(thin)) != model_id(make_checkpoint(nn::ResSEUNet<float>(nn::NetConfig::thinning(32), 2))));
  }

  TEST_CASE("http round trip") {
    Service svc;
    HttpServer server(svc, 2);
    const int port = server.bind("127.0.0.1", 0);
    std::thread th([&] { server.run(); });
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);
    auto h = client.Get("/health");
    REQUIRE(h);
    CHECK(h->status == 200);
    auto early = client.Post("/predict", request_body(ParameterVector{}), "application/json");
    REQUIRE(early);
    CHECK(early->status == 503);
    svc.set_predictor(small_predictor(PipelineConfig{}));
    auto r1 = client.Post("/predict", request_body(ParameterVector{}), "application/json");
    auto r2 = client.Post("/predict", request_body(ParameterVector{}), "application/json");
    REQUIRE(r1);
    REQUIRE(r2);
    CHECK(r1->status == 200);
    CHECK(nlohmann::json::parse(r1->body)["thinning"] == nlohmann::json::parse(r2->body)["thinning"]);
    auto m = client.Get("/meta");
    REQUIRE(m);
    CHECK(nlohmann::json::parse(m->body)["ready"] == true);
    server.stop();
    th.join();
  }
}
