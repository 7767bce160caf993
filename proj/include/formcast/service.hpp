#ifndef FORMCAST_SERVICE_HPP
#define FORMCAST_SERVICE_HPP

#include <cstdint>
#include <memory>
#include <condition_variable>
#include <mutex>
#include <string>

#include "formcast/fqt.hpp"
#include "formcast/pipeline.hpp"
#include "formcast/reconstruct.hpp"
#include "formcast/resseunet.hpp"
#include "json.hpp"

namespace formcast {

std::string base64_encode(const std::string& bytes);
/// Throws std::invalid_argument on malformed input.
std::string base64_decode(const std::string& text);

/// CRC-32 of the serialized checkpoint, as 8 hex digits.
std::string model_id(const Checkpoint& ck);

/// Both networks plus the input pipeline; immutable once built, so one
/// instance serves any number of concurrent requests.
class Predictor {
 public:
  /// The grid resolution is taken from the networks, which must agree.
  Predictor(const Checkpoint& thinning, const Checkpoint& displacement, PipelineConfig cfg);

  struct Result {
    Image mask;
    StackArray thinning;      ///< 1 x n^2, zero outside the mask
    StackArray displacement;  ///< 3 x n^2, zero outside the mask
    ReconstructSummary summary;
  };

  /// pv must already be valid.
  Result predict(const ParameterVector& pv) const;

  const PipelineConfig& config() const { return cfg_; }
  int resolution() const { return cfg_.grid.n_pixels; }
  const std::string& thinning_id() const { return thinning_id_; }
  const std::string& displacement_id() const { return displacement_id_; }
  std::string model_id() const { return thinning_id_ + ":" + displacement_id_; }

 private:
  PipelineConfig cfg_;
  nn::ResSEUNet<float> thinning_;
  nn::ResSEUNet<float> displacement_;
  std::string thinning_id_;
  std::string displacement_id_;
};

struct HttpReply {
  int status = 200;
  std::string body;
  double latency_ms = 0.0;  ///< handler time, sent as a header so bodies stay pure
};

/// Endpoint handlers, independent of the HTTP transport.
class Service {
 public:
  explicit Service(PipelineConfig cfg = {});

  void load(const std::string& thinning_checkpoint, const std::string& displacement_checkpoint);
  void set_predictor(std::shared_ptr<const Predictor> predictor);
  bool ready() const;

  HttpReply health() const;
  HttpReply meta() const;
  /// Body: the 9 parameters as numbers plus an optional "grid" object whose
  /// n_pixels / frame_mm must match the loaded models.
  HttpReply predict(const std::string& body) const;

 private:
  std::shared_ptr<const Predictor> predictor() const;

  PipelineConfig cfg_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Predictor> predictor_;
  /// At most one inference per hardware thread; extra requests wait in
  /// arrival order instead of time-slicing the cores.
  class FifoGate {
   public:
    explicit FifoGate(std::uint64_t slots) : slots_(slots) {}
    void acquire();
    void release();

   private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::uint64_t slots_;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t released_ = 0;
  };
  mutable FifoGate inference_gate_;
};

/// Decoded /predict payload.
struct PredictPayload {
  Image mask;
  StackArray thinning;
  StackArray displacement;
  nlohmann::json summary;
};
PredictPayload decode_predict_response(const nlohmann::json& response);

/// HTTP transport for a Service: GET /health, GET /meta, POST /predict.
class HttpServer {
 public:
  HttpServer(const Service& service, int threads = 4);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace formcast

#endif  // FORMCAST_SERVICE_HPP
