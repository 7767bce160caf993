#ifndef FORMCAST_FQT_HPP
#define FORMCAST_FQT_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "formcast/grid.hpp"
#include "formcast/optim.hpp"
#include "formcast/raster_input.hpp"
#include "formcast/resseunet.hpp"
#include "formcast/tensor.hpp"
#include "json.hpp"

namespace formcast::fqt {

/// One named float32 tensor of the container.
struct Record {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t count() const;
};

/// Records back-to-back, optionally followed by a JSON block that runs to the
/// end of the stream.
struct Container {
  std::vector<Record> records;
  std::optional<nlohmann::json> trailer;

  const Record& at(const std::string& name) const;
  const Record* find(const std::string& name) const;
};

inline constexpr char kMagic[4] = {'F', 'Q', 'T', '1'};
inline constexpr std::uint8_t kFloat32 = 0;

void write_record(std::ostream& os, const Record& r);
void write(std::ostream& os, const Container& c);
/// Throws std::runtime_error on a truncated or malformed stream.
Container read(std::istream& is);

std::string to_bytes(const Container& c);
Container from_bytes(const std::string& bytes);

void save(const std::string& path, const Container& c);
Container load(const std::string& path);

Record from_tensor(const std::string& name, const nn::Tensor<float>& t);
nn::Tensor<float> to_tensor(const Record& r);
/// C x (n*n) stack stored as (C, n, n).
Record from_stack(const std::string& name, const StackArray& stack, int n);
StackArray to_stack(const Record& r);
Record from_image(const std::string& name, const Image& img);
Image to_image(const Record& r);

}  // namespace formcast::fqt

namespace formcast {

/// Adam moments keyed by parameter name.
struct AdamState {
  nn::AdamConfig config;
  std::int64_t step = 0;
  nn::NamedTensors<float> m;
  nn::NamedTensors<float> v;
};

/// Network weights, BN statistics and (optionally) Adam moments in one FQT
/// container. The trailer holds the network config, the Adam step counter and
/// hyperparameters, and any caller metadata under "meta".
struct Checkpoint {
  nn::NetConfig net;
  nn::NamedTensors<float> state;
  std::optional<AdamState> adam;
  nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const nn::ResSEUNet<float>& net, const nlohmann::json& meta = nlohmann::json::object());
/// Builds a network from a checkpoint; throws if the tensors do not match the
/// stored config.
nn::ResSEUNet<float> network_from(const Checkpoint& ck);

}  // namespace formcast

#endif  // FORMCAST_FQT_HPP
