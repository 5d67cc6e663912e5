#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "volseg/volume.hpp"

namespace volseg::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 names(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("volseg_" + tag + "_" + std::to_string(names() % 1000000007ULL));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Hand-laid NIfTI-1 file built field by field at the standard byte offsets,
/// independently of the library's encoder.
struct FixtureSpec {
  std::array<std::int16_t, 8> dim{3, 4, 4, 2, 1, 1, 1, 1};
  std::int16_t datatype = 16;
  std::int16_t bitpix = 32;
  std::array<float, 8> pixdim{1, 1, 1, 1, 1, 1, 1, 1};
  float vox_offset = 352;
  float scl_slope = 0;
  float scl_inter = 0;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<float, 12> srow{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  std::string magic = std::string("n+1\0", 4);
  std::int32_t sizeof_hdr = 348;
  bool big_endian = false;
  /// Raw stored values, converted to the datatype's storage type.
  std::vector<double> payload;
};

class FixtureWriter {
 public:
  explicit FixtureWriter(bool big_endian, std::size_t size) : big_(big_endian), bytes_(size, 0) {}

  template <typename T>
  void put(std::size_t offset, T value) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    const bool host_little = std::endian::native == std::endian::little;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      const std::size_t src = (big_ == host_little) ? sizeof(T) - 1 - i : i;
      bytes_.at(offset + i) = raw[src];
    }
  }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  bool big_;
  std::vector<std::uint8_t> bytes_;
};

inline std::vector<std::uint8_t> build_fixture(const FixtureSpec& s) {
  const std::size_t voxels = static_cast<std::size_t>(s.dim[1]) * s.dim[2] * s.dim[3];
  const std::size_t width = static_cast<std::size_t>(s.bitpix) / 8;
  const auto data_at = static_cast<std::size_t>(s.vox_offset);
  FixtureWriter w(s.big_endian, data_at + voxels * width);
  w.put<std::int32_t>(0, s.sizeof_hdr);
  for (int i = 0; i < 8; ++i) w.put<std::int16_t>(40 + 2 * i, s.dim[i]);
  w.put<std::int16_t>(70, s.datatype);
  w.put<std::int16_t>(72, s.bitpix);
  for (int i = 0; i < 8; ++i) w.put<float>(76 + 4 * i, s.pixdim[i]);
  w.put<float>(108, s.vox_offset);
  w.put<float>(112, s.scl_slope);
  w.put<float>(116, s.scl_inter);
  w.put<std::uint8_t>(123, 2);
  w.put<std::int16_t>(252, s.qform_code);
  w.put<std::int16_t>(254, s.sform_code);
  for (int i = 0; i < 12; ++i) w.put<float>(280 + 4 * i, s.srow[i]);
  for (int i = 0; i < 4; ++i) w.bytes()[344 + i] = static_cast<std::uint8_t>(s.magic[i]);
  for (std::size_t v = 0; v < voxels && v < s.payload.size(); ++v) {
    const std::size_t at = data_at + v * width;
    const double x = s.payload[v];
    switch (s.datatype) {
      case 2: w.put<std::uint8_t>(at, static_cast<std::uint8_t>(x)); break;
      case 4: w.put<std::int16_t>(at, static_cast<std::int16_t>(x)); break;
      case 8: w.put<std::int32_t>(at, static_cast<std::int32_t>(x)); break;
      case 16: w.put<float>(at, static_cast<float>(x)); break;
      case 64: w.put<double>(at, x); break;
      default: break;
    }
  }
  return std::move(w.bytes());
}

inline Volume random_volume(Extent3 shape, std::uint64_t seed, double lo = -1000, double hi = 1000,
                            Vec3 spacing = {1, 1, 1}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Volume v(shape, spacing);
  for (double& x : v.data) x = u(rng);
  return v;
}

inline LabelVolume random_labels(Extent3 shape, std::uint64_t seed, Vec3 spacing = {1, 1, 1}) {
  std::mt19937_64 rng(seed);
  LabelVolume v(shape, spacing);
  for (auto& x : v.data) x = static_cast<std::uint8_t>(rng() % 3);
  return v;
}

/// Per-case model-2 test scores: case, kidney, tumour, average (4 dp).
struct PublishedRow {
  int case_id;
  double kidney;
  double tumour;
  double average;
};

inline const std::vector<PublishedRow>& published_case_scores() {
  static const std::vector<PublishedRow> rows = {
      {36, 0.8038, 0.7103, 0.7571}, {37, 0.4276, 0.6835, 0.5556}, {39, 0.8002, 0, 0.4001},
      {41, 0.9341, 0, 0.4671},      {42, 0.8872, 0.1160, 0.5016}, {43, 0.9152, 0.2427, 0.5790},
      {44, 0.9148, 0.8552, 0.8850}, {45, 0.8855, 0.6735, 0.7795}, {46, 0.9131, 0.8909, 0.9020},
      {47, 0.7889, 0.7638, 0.7764}, {48, 0.9653, 0.8296, 0.8975}, {50, 0.9662, 0, 0.4831},
      {51, 0.9543, 0.7102, 0.8323}, {54, 0.7086, 0.1444, 0.4265}, {55, 0.7780, 0.8477, 0.8129},
      {56, 0.4346, 0.7855, 0.6101}, {57, 0.8188, 0.7280, 0.7734}, {58, 0.7549, 0.4318, 0.5934},
      {60, 0.8374, 0.7843, 0.8109}, {61, 0.2921, 0.2175, 0.2548}, {62, 0.8073, 0.0320, 0.4197},
      {64, 0.9532, 0.0117, 0.4825}, {65, 0.9295, 0.3858, 0.6577}, {69, 0.8474, 0.1442, 0.4958},
      {70, 0.7679, 0.7944, 0.7812},
  };
  return rows;
}

/// Model-2 mean test scores: kidney, tumour, average.
inline constexpr std::array<double, 3> kPublishedModel2{0.8034, 0.4713, 0.6374};

/// Half a unit in the fourth decimal, plus slack for binary representation.
inline constexpr double kRoundingTolerance = 5e-5 + 1e-12;

}  // namespace volseg::testing
