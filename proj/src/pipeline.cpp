#include "formcast/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "formcast/fqt.hpp"

namespace formcast {

namespace fs = std::filesystem;

namespace {

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr int kManifestVersion = 1;

}  // namespace

void PipelineConfig::check() const {
  grid.check();
  bounds.check();
  clip.check();
  if (!(die_spacing >= 0.0)) throw std::invalid_argument("die spacing must be non-negative");
  if (!(mesh_spacing > 0.0)) throw std::invalid_argument("mesh spacing must be positive");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"grid", {{"n_pixels", grid.n_pixels}, {"frame_mm", grid.frame_mm}}},
          {"bounds", formcast::to_json(bounds)},
          {"oracle", oracle.to_json()},
          {"clip_thresholds", clip.to_json()},
          {"die_spacing", die_spacing},
          {"mesh_spacing", mesh_spacing}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("pipeline config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "grid" && key != "bounds" && key != "oracle" && key != "clip_thresholds" && key != "die_spacing" &&
        key != "mesh_spacing") {
      throw std::invalid_argument("unknown pipeline config key '" + key + "'");
    }
  }
  PipelineConfig c;
  if (j.contains("grid")) {
    c.grid.n_pixels = j.at("grid").value("n_pixels", c.grid.n_pixels);
    c.grid.frame_mm = j.at("grid").value("frame_mm", c.grid.frame_mm);
  }
  if (j.contains("bounds")) c.bounds = parameter_bounds_from_json(j.at("bounds"));
  if (j.contains("oracle")) c.oracle = OracleConfig::from_json(j.at("oracle"));
  if (j.contains("clip_thresholds")) c.clip = ClipThresholds::from_json(j.at("clip_thresholds"));
  c.die_spacing = j.value("die_spacing", c.die_spacing);
  c.mesh_spacing = j.value("mesh_spacing", c.mesh_spacing);
  c.check();
  return c;
}

Sample make_sample(const std::string& id, const ParameterVector& pv, const PipelineConfig& cfg,
                   std::uint64_t seed) {
  const auto report = validate(pv, cfg.bounds);
  if (!report.ok()) throw std::invalid_argument("sample " + id + ": " + report.violations.front());
  Sample s;
  s.id = id;
  s.params = pv;
  s.input = make_input(pv, cfg.grid, cfg.bounds, cfg.effective_die_spacing(), seed);
  const FormingResult result = simulate(pv, cfg.mesh_spacing, seed, cfg.oracle);
  s.target = assemble_targets(result, s.input.mask, cfg.grid, cfg.clip);
  return s;
}

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05zu", index);
  return buf;
}

unsigned worker_count() {
  if (const char* env = std::getenv("FORMCAST_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Dataset generate_dataset(const std::vector<ParameterVector>& designs, const PipelineConfig& cfg,
                         std::uint64_t seed) {
  cfg.check();
  Dataset ds;
  ds.samples.resize(designs.size());
  parallel_for(designs.size(), [&](std::size_t i) {
    ds.samples[i] = make_sample(sample_id(i), designs[i], cfg, sample_seed(seed, i));
  });

  nlohmann::json m = cfg.to_json();
  m["oracle_config"] = m["oracle"];
  m.erase("oracle");
  m["version"] = kManifestVersion;
  m["seed"] = seed;
  m["normalization"] = {{"die_height_mm", kHeightScale},
                        {"displacement_mm", kHeightScale},
                        {"scalar_floor", 0.1},
                        {"scalar_ceiling", 1.0}};
  m["channel_order"] = kInputChannels;
  m["channel_order_checksum"] =
      channel_order_checksum(std::vector<std::string>(kInputChannels.begin(), kInputChannels.end()));
  m["samples"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    m["samples"].push_back({{"id", s.id},
                            {"params", to_json(s.params)},
                            {"flagged", s.target.flagged},
                            {"seed", sample_seed(seed, i)},
                            {"file", s.id + ".fqt"}});
  }
  ds.manifest = std::move(m);
  return ds;
}

Dataset generate_dataset(std::size_t n, const PipelineConfig& cfg, std::uint64_t seed) {
  return generate_dataset(lhs_sample(n, cfg.bounds, seed), cfg, seed);
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  for (const Sample& s : ds.samples) {
    const int n = s.input.grid.n_pixels;
    fqt::Container c;
    c.records.push_back(fqt::from_stack("input", s.input.data, n));
    c.records.push_back(fqt::from_image("mask", s.input.mask));
    c.records.push_back(fqt::from_stack("thinning", s.target.thinning, n));
    c.records.push_back(fqt::from_stack("displacement", s.target.displacement, n));
    fqt::save((fs::path(dir) / (s.id + ".fqt")).string(), c);
  }
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw std::runtime_error("cannot write manifest in '" + dir + "'");
  os << ds.manifest.dump(2) << '\n';
}

PipelineConfig pipeline_config_of(const Dataset& ds) {
  nlohmann::json j;
  for (const char* key : {"grid", "bounds", "clip_thresholds", "die_spacing", "mesh_spacing"}) {
    if (ds.manifest.contains(key)) j[key] = ds.manifest.at(key);
  }
  if (ds.manifest.contains("oracle_config")) j["oracle"] = ds.manifest.at("oracle_config");
  return PipelineConfig::from_json(j);
}

Dataset load_dataset(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory '" + dir + "' does not exist");
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("dataset '" + dir + "' has no manifest.json");
  Dataset ds;
  ds.manifest = nlohmann::json::parse(is);
  if (ds.manifest.value("version", 0) != kManifestVersion) {
    throw std::runtime_error("unsupported dataset manifest version");
  }
  const PipelineConfig cfg = pipeline_config_of(ds);
  const auto& entries = ds.manifest.at("samples");
  ds.samples.resize(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const auto& e = entries[i];
    const fqt::Container c = fqt::load((fs::path(dir) / e.at("file").get<std::string>()).string());
    Sample& s = ds.samples[i];
    s.id = e.at("id").get<std::string>();
    s.params = parameter_vector_from_json(e.at("params"));
    s.input.grid = cfg.grid;
    s.input.data = fqt::to_stack(c.at("input"));
    s.input.mask = fqt::to_image(c.at("mask"));
    s.input.channel_order.assign(kInputChannels.begin(), kInputChannels.end());
    s.input.order_checksum = channel_order_checksum(s.input.channel_order);
    s.target.grid = cfg.grid;
    s.target.mask = s.input.mask;
    s.target.thinning = fqt::to_stack(c.at("thinning"));
    s.target.displacement = fqt::to_stack(c.at("displacement"));
    s.target.flagged = e.at("flagged").get<bool>();
    if (s.input.data.cols() != static_cast<Eigen::Index>(cfg.grid.n_pixels) * cfg.grid.n_pixels) {
      throw std::runtime_error("sample " + s.id + " does not match the manifest grid");
    }
  });
  return ds;
}

}  // namespace formcast
