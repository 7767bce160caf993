#include "formcast/config.hpp"

#include <fstream>
#include <stdexcept>

namespace formcast {

void ToolkitConfig::set_resolution(int n) {
  pipeline.grid.n_pixels = n;
  net.resolution = n;
  pipeline.check();
  net.check();
}

nn::NetConfig ToolkitConfig::net_for(TargetKind kind) const {
  nn::NetConfig c = net;
  c.out_channels = target_channels(kind);
  c.check();
  return c;
}

nlohmann::json ToolkitConfig::to_json() const {
  nlohmann::json j = pipeline.to_json();
  j["net"] = net.to_json();
  j["train"] = train.to_json();
  j["seed"] = seed;
  return j;
}

ToolkitConfig ToolkitConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  std::string missing;
  for (const char* key : {"grid", "bounds", "oracle", "clip_thresholds", "net", "seed"}) {
    if (!j.contains(key)) missing += missing.empty() ? key : std::string(", ") + key;
  }
  if (!missing.empty()) throw std::invalid_argument("config is missing required keys: " + missing);

  nlohmann::json pipeline_json = j;
  for (const char* key : {"net", "train", "seed"}) pipeline_json.erase(key);
  ToolkitConfig c;
  c.pipeline = PipelineConfig::from_json(pipeline_json);
  c.net = nn::NetConfig::from_json(j.at("net"));
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  c.seed = j.at("seed").get<std::uint64_t>();
  if (c.net.resolution != c.pipeline.grid.n_pixels) {
    throw std::invalid_argument("config: net resolution differs from grid n_pixels");
  }
  return c;
}

ToolkitConfig ToolkitConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace formcast
