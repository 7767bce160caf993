#include "formcast/fqt.hpp"

#include <boost/endian/conversion.hpp>

#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace formcast::fqt {

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  boost::endian::native_to_little_inplace(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error(std::string("FQT: truncated stream reading ") + what);
  }
  boost::endian::little_to_native_inplace(v);
  return v;
}

constexpr std::uint32_t kMaxRank = 16;

}  // namespace

std::size_t Record::count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const Record* Container::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const Record& Container::at(const std::string& name) const {
  if (const Record* r = find(name)) return *r;
  throw std::out_of_range("FQT: no tensor named '" + name + "'");
}

void write_record(std::ostream& os, const Record& r) {
  if (r.name.size() > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("FQT: name too long");
  if (r.dims.size() > kMaxRank) throw std::invalid_argument("FQT: rank too large");
  if (r.count() != r.data.size()) throw std::invalid_argument("FQT: '" + r.name + "' data does not match dims");
  os.write(kMagic, 4);
  put<std::uint8_t>(os, kFloat32);
  put<std::uint8_t>(os, 0);
  put<std::uint16_t>(os, static_cast<std::uint16_t>(r.name.size()));
  os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(r.dims.size()));
  for (auto d : r.dims) put<std::uint32_t>(os, d);
  if constexpr (boost::endian::order::native == boost::endian::order::little) {
    os.write(reinterpret_cast<const char*>(r.data.data()), static_cast<std::streamsize>(r.data.size() * sizeof(float)));
  } else {
    for (float f : r.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put(os, bits);
    }
  }
}

void write(std::ostream& os, const Container& c) {
  for (const auto& r : c.records) write_record(os, r);
  if (c.trailer) os << c.trailer->dump();
  if (!os) throw std::runtime_error("FQT: write failed");
}

Container read(std::istream& is) {
  Container c;
  while (true) {
    char magic[4];
    is.read(magic, 4);
    const auto got = is.gcount();
    if (got == 0) break;
    if (got < 4 || std::memcmp(magic, kMagic, 4) != 0) {
      // Anything that is not a record is the JSON trailer.
      std::string rest(magic, static_cast<std::size_t>(got));
      rest.append(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
      try {
        c.trailer = nlohmann::json::parse(rest);
      } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("FQT: bad trailer: ") + e.what());
      }
      break;
    }
    Record r;
    const auto dtype = get<std::uint8_t>(is, "dtype");
    if (dtype != kFloat32) throw std::runtime_error("FQT: unsupported dtype code " + std::to_string(dtype));
    get<std::uint8_t>(is, "reserved byte");
    const auto len = get<std::uint16_t>(is, "name length");
    r.name.resize(len);
    if (!is.read(r.name.data(), len)) throw std::runtime_error("FQT: truncated name");
    const auto rank = get<std::uint32_t>(is, "rank");
    if (rank > kMaxRank) throw std::runtime_error("FQT: rank " + std::to_string(rank) + " too large");
    for (std::uint32_t k = 0; k < rank; ++k) r.dims.push_back(get<std::uint32_t>(is, "dims"));
    r.data.resize(r.count());
    if (!is.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(r.data.size() * sizeof(float)))) {
      throw std::runtime_error("FQT: truncated data for '" + r.name + "'");
    }
    if constexpr (boost::endian::order::native != boost::endian::order::little) {
      for (float& f : r.data) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        boost::endian::little_to_native_inplace(bits);
        std::memcpy(&f, &bits, sizeof bits);
      }
    }
    c.records.push_back(std::move(r));
  }
  return c;
}

std::string to_bytes(const Container& c) {
  std::ostringstream os(std::ios::binary);
  write(os, c);
  return std::move(os).str();
}

Container from_bytes(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  return read(is);
}

void save(const std::string& path, const Container& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write(os, c);
}

Container load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read(is);
}

Record from_tensor(const std::string& name, const nn::Tensor<float>& t) {
  Record r{name, {}, {t.data(), t.data() + t.size()}};
  for (auto d : t.shape().dims()) r.dims.push_back(static_cast<std::uint32_t>(d));
  return r;
}

nn::Tensor<float> to_tensor(const Record& r) {
  std::vector<nn::Index> dims(r.dims.begin(), r.dims.end());
  return nn::Tensor<float>(nn::Shape(dims),
                           Eigen::Map<const nn::Tensor<float>::Array>(r.data.data(), static_cast<Eigen::Index>(r.data.size())));
}

Record from_stack(const std::string& name, const StackArray& stack, int n) {
  if (stack.cols() != static_cast<Eigen::Index>(n) * n) throw std::invalid_argument("FQT: stack does not match grid");
  return {name,
          {static_cast<std::uint32_t>(stack.rows()), static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n)},
          {stack.data(), stack.data() + stack.size()}};
}

StackArray to_stack(const Record& r) {
  if (r.dims.size() != 3 || r.dims[1] != r.dims[2]) throw std::runtime_error("FQT: '" + r.name + "' is not a (C, n, n) stack");
  return Eigen::Map<const StackArray>(r.data.data(), r.dims[0], static_cast<Eigen::Index>(r.dims[1]) * r.dims[2]);
}

Record from_image(const std::string& name, const Image& img) {
  return {name,
          {static_cast<std::uint32_t>(img.rows()), static_cast<std::uint32_t>(img.cols())},
          {img.data(), img.data() + img.size()}};
}

Image to_image(const Record& r) {
  if (r.dims.size() != 2) throw std::runtime_error("FQT: '" + r.name + "' is not an image");
  return Eigen::Map<const Image>(r.data.data(), r.dims[0], r.dims[1]);
}

}  // namespace formcast::fqt

namespace formcast {

namespace {
const std::string kParamPrefix = "param/";
const std::string kMomentM = "adam.m/";
const std::string kMomentV = "adam.v/";
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  fqt::Container c;
  for (const auto& [name, t] : ck.state) c.records.push_back(fqt::from_tensor(kParamPrefix + name, t));
  nlohmann::json trailer{{"kind", "checkpoint"}, {"net_config", ck.net.to_json()}, {"meta", ck.meta}};
  if (ck.adam) {
    for (const auto& [name, t] : ck.adam->m) c.records.push_back(fqt::from_tensor(kMomentM + name, t));
    for (const auto& [name, t] : ck.adam->v) c.records.push_back(fqt::from_tensor(kMomentV + name, t));
    trailer["adam"] = {{"step", ck.adam->step},
                       {"learning_rate", ck.adam->config.learning_rate},
                       {"beta1", ck.adam->config.beta1},
                       {"beta2", ck.adam->config.beta2},
                       {"eps", ck.adam->config.eps},
                       {"moments", {kMomentM, kMomentV}}};
  }
  c.trailer = std::move(trailer);
  fqt::save(path, c);
}

Checkpoint load_checkpoint(const std::string& path) {
  const fqt::Container c = fqt::load(path);
  if (!c.trailer || c.trailer->value("kind", "") != "checkpoint") {
    throw std::runtime_error("'" + path + "' is not a checkpoint (missing config block)");
  }
  Checkpoint ck;
  ck.net = nn::NetConfig::from_json(c.trailer->at("net_config"));
  ck.meta = c.trailer->value("meta", nlohmann::json::object());
  const bool with_adam = c.trailer->contains("adam");
  if (with_adam) {
    const auto& a = c.trailer->at("adam");
    AdamState st;
    st.step = a.at("step").get<std::int64_t>();
    st.config = {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                 a.at("eps").get<double>()};
    ck.adam = std::move(st);
  }
  for (const auto& r : c.records) {
    if (r.name.starts_with(kParamPrefix)) {
      ck.state.emplace_back(r.name.substr(kParamPrefix.size()), fqt::to_tensor(r));
    } else if (with_adam && r.name.starts_with(kMomentM)) {
      ck.adam->m.emplace_back(r.name.substr(kMomentM.size()), fqt::to_tensor(r));
    } else if (with_adam && r.name.starts_with(kMomentV)) {
      ck.adam->v.emplace_back(r.name.substr(kMomentV.size()), fqt::to_tensor(r));
    }
  }
  return ck;
}

Checkpoint make_checkpoint(const nn::ResSEUNet<float>& net, const nlohmann::json& meta) {
  Checkpoint ck;
  ck.net = net.config();
  ck.state = net.state_dict();
  ck.meta = meta;
  return ck;
}

nn::ResSEUNet<float> network_from(const Checkpoint& ck) {
  nn::ResSEUNet<float> net(ck.net);
  net.load_state_dict(ck.state);
  return net;
}

}  // namespace formcast
