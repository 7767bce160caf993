#include "formcast/service.hpp"

#include <boost/beast/core/detail/base64.hpp>
#include <boost/crc.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <thread>

#include "formcast/raster_input.hpp"
#include "formcast/train.hpp"
#include "httplib.h"

namespace formcast {

namespace b64 = boost::beast::detail::base64;

namespace {

constexpr std::array<const char*, kParamCount> kParamUnits = {"mm", "mm", "mm", "mm", "-", "-", "mm", "degC", "mm/s"};

HttpReply json_reply(int status, const nlohmann::json& j) { return {status, j.dump()}; }

HttpReply error_reply(int status, const std::string& message, const std::vector<std::string>& violations = {}) {
  nlohmann::json j = {{"error", message}};
  if (!violations.empty()) j["violations"] = violations;
  return json_reply(status, j);
}

std::string encode_container(const fqt::Record& r) {
  fqt::Container c;
  c.records.push_back(r);
  return base64_encode(fqt::to_bytes(c));
}

fqt::Record decode_record(const nlohmann::json& field, const std::string& name) {
  return fqt::from_bytes(base64_decode(field.get<std::string>())).at(name);
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

std::string base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64 length is not a multiple of 4");
  std::size_t pad = 0;
  while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
  std::string out(b64::decoded_size(text.size()), '\0');
  const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  if (read + pad != text.size()) throw std::invalid_argument("malformed base64 text");
  out.resize(written);
  return out;
}

std::string model_id(const Checkpoint& ck) {
  boost::crc_32_type crc;
  const std::string cfg = ck.net.to_json().dump();
  crc.process_bytes(cfg.data(), cfg.size());
  for (const auto& [name, t] : ck.state) {
    crc.process_bytes(name.data(), name.size());
    crc.process_bytes(t.data(), static_cast<std::size_t>(t.size()) * sizeof(float));
  }
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc.checksum());
  return buf;
}

Predictor::Predictor(const Checkpoint& thinning, const Checkpoint& displacement, PipelineConfig cfg)
    : cfg_(std::move(cfg)),
      thinning_(network_from(thinning)),
      displacement_(network_from(displacement)),
      thinning_id_(formcast::model_id(thinning)),
      displacement_id_(formcast::model_id(displacement)) {
  if (thinning.net.out_channels != 1) throw std::invalid_argument("thinning checkpoint must have 1 output channel");
  if (displacement.net.out_channels != 3) {
    throw std::invalid_argument("displacement checkpoint must have 3 output channels");
  }
  if (thinning.net.resolution != displacement.net.resolution) {
    throw std::invalid_argument("thinning and displacement checkpoints differ in resolution");
  }
  cfg_.grid.n_pixels = thinning.net.resolution;
  cfg_.check();
}

Predictor::Result Predictor::predict(const ParameterVector& pv) const {
  const int n = cfg_.grid.n_pixels;
  const InputStack in = make_input(pv, cfg_.grid, cfg_.bounds, cfg_.effective_die_spacing());
  const nn::Tensor<float> x = input_tensor(in);
  const nn::Tensor<float> t = thinning_.infer(x);
  const nn::Tensor<float> d = displacement_.infer(x);
  const Eigen::Index plane = static_cast<Eigen::Index>(n) * n;
  const Eigen::Map<const Eigen::Array<float, 1, Eigen::Dynamic>> m(in.mask.data(), plane);

  Result r;
  r.mask = in.mask;
  r.thinning = Eigen::Map<const StackArray>(t.data(), 1, plane);
  r.displacement = Eigen::Map<const StackArray>(d.data(), 3, plane);
  r.thinning.rowwise() *= m;
  r.displacement.rowwise() *= m;
  r.summary = summarize(r.displacement, r.thinning, r.mask, pv, cfg_.grid);
  return r;
}

void Service::FifoGate::acquire() {
  std::unique_lock lock(mutex_);
  const std::uint64_t ticket = next_ticket_++;
  cv_.wait(lock, [&] { return ticket < released_ + slots_; });
}

void Service::FifoGate::release() {
  {
    const std::lock_guard lock(mutex_);
    ++released_;
  }
  cv_.notify_all();
}

Service::Service(PipelineConfig cfg)
    : cfg_(std::move(cfg)), inference_gate_(std::max(1u, std::thread::hardware_concurrency())) {
  cfg_.check();
}

void Service::load(const std::string& thinning_checkpoint, const std::string& displacement_checkpoint) {
  set_predictor(std::make_shared<const Predictor>(load_checkpoint(thinning_checkpoint),
                                                  load_checkpoint(displacement_checkpoint), cfg_));
}

void Service::set_predictor(std::shared_ptr<const Predictor> predictor) {
  const std::lock_guard lock(mutex_);
  predictor_ = std::move(predictor);
}

std::shared_ptr<const Predictor> Service::predictor() const {
  const std::lock_guard lock(mutex_);
  return predictor_;
}

bool Service::ready() const { return predictor() != nullptr; }

HttpReply Service::health() const {
  const bool ok = ready();
  return json_reply(200, {{"status", ok ? "ok" : "loading"}, {"ready", ok}});
}

HttpReply Service::meta() const {
  const auto p = predictor();
  nlohmann::json bounds = nlohmann::json::object();
  nlohmann::json units = nlohmann::json::object();
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const std::string name(kParamNames[i]);
    bounds[name] = {cfg_.bounds.lower[static_cast<Eigen::Index>(i)], cfg_.bounds.upper[static_cast<Eigen::Index>(i)]};
    units[name] = kParamUnits[i];
  }
  nlohmann::json j = {{"bounds", bounds},
                      {"units", units},
                      {"parameters", std::vector<std::string>(kParamNames.begin(), kParamNames.end())},
                      {"channel_order", kInputChannels},
                      {"frame_mm", cfg_.grid.frame_mm},
                      {"ready", p != nullptr}};
  if (p) {
    j["models"] = {{"thinning", p->thinning_id()}, {"displacement", p->displacement_id()}};
    j["model_id"] = p->model_id();
    j["resolution"] = p->resolution();
  } else {
    j["models"] = nullptr;
    j["model_id"] = nullptr;
    j["resolution"] = nullptr;
  }
  return json_reply(200, j);
}

HttpReply Service::predict(const std::string& body) const {
  const auto start = std::chrono::steady_clock::now();
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    return error_reply(400, "request body is not valid JSON");
  }
  if (!req.is_object()) return error_reply(400, "request body must be a JSON object");

  std::vector<std::string> problems;
  const std::set<std::string> known(kParamNames.begin(), kParamNames.end());
  for (const auto& [key, value] : req.items()) {
    if (key != "grid" && !known.count(key)) problems.push_back("unknown field '" + key + "'");
  }
  ParameterVector pv;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const std::string name(kParamNames[i]);
    if (!req.contains(name)) {
      problems.push_back("missing " + name);
    } else if (!req[name].is_number()) {
      problems.push_back(name + " must be a number");
    } else {
      pv[static_cast<Param>(i)] = req[name].get<double>();
    }
  }
  if (!problems.empty()) return error_reply(400, "invalid request", problems);
  const ValidationReport report = validate(pv, cfg_.bounds);
  if (!report.ok()) return error_reply(400, "parameters out of bounds", report.violations);

  const auto p = predictor();
  if (!p) return error_reply(503, "models are not loaded yet");

  if (req.contains("grid")) {
    const auto& g = req["grid"];
    if (!g.is_object()) return error_reply(400, "grid must be an object");
    for (const auto& [key, value] : g.items()) {
      if (key != "n_pixels" && key != "frame_mm") return error_reply(400, "unknown grid field '" + key + "'");
      if (!value.is_number()) return error_reply(400, "grid." + key + " must be a number");
    }
    if (g.contains("n_pixels") && g["n_pixels"].get<double>() != p->resolution()) {
      return error_reply(400, "grid n_pixels " + g["n_pixels"].dump() + " differs from the model resolution " +
                                  std::to_string(p->resolution()));
    }
    if (g.contains("frame_mm") && g["frame_mm"].get<double>() != p->config().grid.frame_mm) {
      return error_reply(400, "grid frame_mm differs from the model frame");
    }
  }

  inference_gate_.acquire();
  Predictor::Result r;
  try {
    r = p->predict(pv);
  } catch (...) {
    inference_gate_.release();
    throw;
  }
  inference_gate_.release();
  const int n = p->resolution();
  nlohmann::json j = {{"model_id", p->model_id()},
                      {"resolution", n},
                      {"params", to_json(pv)},
                      {"thinning", encode_container(fqt::from_stack("thinning", r.thinning, n))},
                      {"displacement", encode_container(fqt::from_stack("displacement", r.displacement, n))},
                      {"mask", encode_container(fqt::from_image("mask", r.mask))},
                      {"summary", r.summary.to_json()}};
  HttpReply reply = json_reply(200, j);
  reply.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return reply;
}

PredictPayload decode_predict_response(const nlohmann::json& response) {
  PredictPayload out;
  out.thinning = fqt::to_stack(decode_record(response.at("thinning"), "thinning"));
  out.displacement = fqt::to_stack(decode_record(response.at("displacement"), "displacement"));
  out.mask = fqt::to_image(decode_record(response.at("mask"), "mask"));
  out.summary = response.at("summary");
  return out;
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(const Service& service, int threads) : impl_(std::make_unique<Impl>()) {
  const auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
    if (reply.latency_ms > 0.0) res.set_header("X-Latency-Ms", std::to_string(reply.latency_ms));
  };
  auto& s = impl_->server;
  s.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(std::max(1, threads))); };
  s.Get("/health", [&service, send](const httplib::Request&, httplib::Response& res) { send(res, service.health()); });
  s.Get("/meta", [&service, send](const httplib::Request&, httplib::Response& res) { send(res, service.meta()); });
  s.Post("/predict", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.predict(req.body));
  });
  s.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, what));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace formcast
