#include "volseg/microseg/checkpoint.hpp"

#include <cstring>

#include "../byte_io.hpp"
#include "json.hpp"
#include "volseg/nifti.hpp"

namespace volseg::microseg {

namespace {

constexpr std::uint8_t kDtypeF32 = 1;
constexpr std::uint8_t kDtypeF64 = 2;

std::string config_json(const NetworkConfig& c) {
  nlohmann::ordered_json j;
  j["in_channels"] = c.in_channels;
  j["class_count"] = c.class_count;
  j["channels"] = c.channels;
  j["strides"] = c.strides;
  j["residual_units"] = c.residual_units;
  j["window_lo"] = c.window_lo;
  j["window_hi"] = c.window_hi;
  j["init_seed"] = c.init_seed;
  return j.dump();
}

NetworkConfig parse_config(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NetworkConfig c;
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.class_count = j.at("class_count").get<std::size_t>();
    c.channels = j.at("channels").get<std::vector<std::size_t>>();
    c.strides = j.at("strides").get<std::vector<std::size_t>>();
    c.residual_units = j.at("residual_units").get<std::size_t>();
    c.window_lo = j.at("window_lo").get<double>();
    c.window_hi = j.at("window_hi").get<double>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::BadCheckpoint, std::string("network config: ") + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(UNet& model) {
  detail::ByteWriter w;
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(kCheckpointMagic), sizeof(kCheckpointMagic)});
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string cfg = config_json(model.config());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.size()));
  w.put_string(cfg);
  const auto params = model.params();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(p->name.size()));
    w.put_string(p->name);
    const Dims5& d = p->value.dims();
    w.put<std::uint8_t>(5);
    for (std::size_t v : {d.n, d.c, d.x, d.y, d.z}) w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
    w.put<std::uint8_t>(kDtypeF64);
    for (Real v : p->value.values()) w.put<double>(v);
  }
  return w.take();
}

UNet deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, Errc::BadCheckpoint);
  const auto magic = r.get_bytes(sizeof(kCheckpointMagic));
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    fail(Errc::BadCheckpoint, "not a volseg checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    fail(Errc::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = r.get<std::uint32_t>();
  const auto cfg_bytes = r.get_bytes(cfg_len);
  UNet model(parse_config({reinterpret_cast<const char*>(cfg_bytes.data()), cfg_bytes.size()}));

  const auto params = model.params();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) fail(Errc::BadCheckpoint, "parameter count mismatch");
  for (Param* p : params) {
    const auto name_len = r.get<std::uint16_t>();
    const auto name = r.get_bytes(name_len);
    if (std::string(name.begin(), name.end()) != p->name)
      fail(Errc::BadCheckpoint, "expected tensor " + p->name);
    const auto rank = r.get<std::uint8_t>();
    if (rank != 5) fail(Errc::BadCheckpoint, "tensor rank must be 5");
    Dims5 d;
    for (std::size_t* f : {&d.n, &d.c, &d.x, &d.y, &d.z}) *f = r.get<std::uint32_t>();
    if (d != p->value.dims()) fail(Errc::BadCheckpoint, "dims mismatch for " + p->name);
    const auto dtype = r.get<std::uint8_t>();
    for (Real& v : p->value.values()) {
      if (dtype == kDtypeF64)
        v = r.get<double>();
      else if (dtype == kDtypeF32)
        v = r.get<float>();
      else
        fail(Errc::BadCheckpoint, "unknown payload dtype");
    }
  }
  if (r.remaining() != 0) fail(Errc::BadCheckpoint, "trailing bytes after last tensor");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, UNet& model) {
  nifti::write_bytes(path, serialize_checkpoint(model));
}

UNet load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(nifti::read_bytes(path));
}

}  // namespace volseg::microseg
