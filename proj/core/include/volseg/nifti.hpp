#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "volseg/volume.hpp"

namespace volseg::nifti {

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kCanonicalVoxOffset = 352;

enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
};

enum class ByteOrder { Little, Big };

int bits_per_voxel(Datatype dt);
std::string_view datatype_name(Datatype dt);
bool is_integer(Datatype dt);

struct Header {
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{3, 1, 1, 1, 1, 1, 1, 1};
  std::int16_t intent_code = 0;
  Datatype datatype = Datatype::Float32;
  std::int16_t bitpix = 32;
  std::array<float, 8> pixdim{1, 1, 1, 1, 1, 1, 1, 1};
  float vox_offset = 352.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::uint8_t xyzt_units = 0;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern_b = 0, quatern_c = 0, quatern_d = 0;
  float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
  std::array<float, 4> srow_x{1, 0, 0, 0};
  std::array<float, 4> srow_y{0, 1, 0, 0};
  std::array<float, 4> srow_z{0, 0, 1, 0};
  std::array<char, 80> descrip{};
  std::array<char, 4> magic{'n', '+', '1', '\0'};

  ByteOrder byte_order = ByteOrder::Little;

  Extent3 shape() const;
  Vec3 spacing() const;
  std::size_t voxel_bytes() const;
  bool has_scaling() const;

  /// sform when sform_code > 0, else the quaternion qform when
  /// qform_code > 0, else a diagonal spacing matrix.
  Affine affine() const;

  bool operator==(const Header&) const = default;
};

/// Decodes and validates exactly 348 header bytes in either byte order.
Header parse_header(std::span<const std::uint8_t> bytes);

/// Canonical little-endian encoding of a header (348 bytes).
std::vector<std::uint8_t> encode_header(const Header& h);

enum class Kind { Image, Label };

struct ImageFile {
  Header header;
  Volume volume;
};

struct LabelFile {
  Header header;
  LabelVolume labels;
};

/// Accepts raw .nii bytes or a gzip stream wrapping them.
ImageFile read_image(std::span<const std::uint8_t> bytes);
LabelFile read_label(std::span<const std::uint8_t> bytes);

ImageFile read_image_file(const std::filesystem::path& path);
LabelFile read_label_file(const std::filesystem::path& path);

/// Label values within this distance of an integer are snapped to it.
inline constexpr double kLabelSnapTolerance = 1e-3;

struct WriteOptions {
  Datatype datatype = Datatype::Float32;
  bool gzip = false;
};

/// Emits canonical single-file NIfTI-1: little-endian, vox_offset 352,
/// scl_slope 0, sform_code 1.
std::vector<std::uint8_t> write_image(const Volume& v, const WriteOptions& opts = {});
std::vector<std::uint8_t> write_label(const LabelVolume& v,
                                      const WriteOptions& opts = {Datatype::UInt8, false});

void write_image_file(const std::filesystem::path& path, const Volume& v,
                      const WriteOptions& opts);
void write_label_file(const std::filesystem::path& path, const LabelVolume& v,
                      const WriteOptions& opts = {Datatype::UInt8, false});

/// Write options inferred from the file name: gzip iff it ends in ".gz".
WriteOptions options_for(const std::filesystem::path& path, Datatype dt);

bool is_gzip(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace volseg::nifti
