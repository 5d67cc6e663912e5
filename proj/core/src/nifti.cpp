#include "volseg/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "byte_io.hpp"

namespace volseg::nifti {

namespace {

// NIfTI-1 header field offsets.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffIntentCode = 68;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;  // b, c, d, qoffset x, y, z
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffSrowY = 296;
constexpr std::size_t kOffSrowZ = 312;
constexpr std::size_t kOffMagic = 344;

constexpr std::uint8_t kXyztMillimetre = 2;

bool supported(std::int16_t code) {
  switch (code) {
    case 2: case 4: case 8: case 16: case 64: return true;
    default: return false;
  }
}

template <typename Raw>
void decode_payload(std::span<const std::uint8_t> payload, bool swap, std::vector<double>& out) {
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<double>(detail::load<Raw>(payload, i * sizeof(Raw), swap));
}

Volume decode_volume(std::span<const std::uint8_t> raw, Header& header_out) {
  if (raw.size() < kHeaderSize)
    fail(Errc::TruncatedData, "file shorter than a NIfTI-1 header");
  const Header h = parse_header(raw.first(kHeaderSize));
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t nbytes = h.voxel_bytes();
  if (raw.size() < offset || raw.size() - offset < nbytes)
    fail(Errc::TruncatedData, "voxel payload holds " +
                                  std::to_string(raw.size() > offset ? raw.size() - offset : 0) +
                                  " bytes, expected " + std::to_string(nbytes));

  const auto payload = raw.subspan(offset, nbytes);
  const bool swap = (h.byte_order == ByteOrder::Little) != detail::host_is_little();
  std::vector<double> values(voxel_count(h.shape()));
  switch (h.datatype) {
    case Datatype::UInt8: decode_payload<std::uint8_t>(payload, swap, values); break;
    case Datatype::Int16: decode_payload<std::int16_t>(payload, swap, values); break;
    case Datatype::Int32: decode_payload<std::int32_t>(payload, swap, values); break;
    case Datatype::Float32: decode_payload<float>(payload, swap, values); break;
    case Datatype::Float64: decode_payload<double>(payload, swap, values); break;
  }
  if (h.has_scaling()) {
    const double slope = h.scl_slope;
    const double inter = h.scl_inter;
    for (double& v : values) v = slope * v + inter;
  }
  for (double v : values)
    if (!std::isfinite(v)) fail(Errc::NonFiniteValue, "voxel data contains NaN or infinity");

  Volume vol(h.shape(), h.spacing(), std::move(values));
  vol.affine = h.affine();
  header_out = h;
  return vol;
}

std::vector<std::uint8_t> maybe_inflate(std::span<const std::uint8_t> bytes) {
  if (is_gzip(bytes)) return gzip_decompress(bytes);
  return {bytes.begin(), bytes.end()};
}

Header header_for(const Extent3& shape, const Vec3& spacing, const std::optional<Affine>& affine,
                  Datatype dt) {
  for (std::size_t n : shape)
    if (n > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
      fail(Errc::InvalidArgument, "extent exceeds the NIfTI-1 limit of 32767");
  Header h;
  h.dim = {3, static_cast<std::int16_t>(shape[0]), static_cast<std::int16_t>(shape[1]),
           static_cast<std::int16_t>(shape[2]), 1, 1, 1, 1};
  h.datatype = dt;
  h.bitpix = static_cast<std::int16_t>(bits_per_voxel(dt));
  h.pixdim = {1.0f, static_cast<float>(spacing[0]), static_cast<float>(spacing[1]),
              static_cast<float>(spacing[2]), 0, 0, 0, 0};
  h.vox_offset = static_cast<float>(kCanonicalVoxOffset);
  h.scl_slope = 0.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = kXyztMillimetre;
  h.qform_code = 0;
  h.sform_code = 1;
  Affine a{};
  if (affine) {
    a = *affine;
  } else {
    for (int i = 0; i < 3; ++i) a[i][i] = spacing[i];
  }
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = static_cast<float>(a[0][c]);
    h.srow_y[c] = static_cast<float>(a[1][c]);
    h.srow_z[c] = static_cast<float>(a[2][c]);
  }
  return h;
}

template <typename Raw>
void encode_integer(detail::ByteWriter& w, std::span<const double> values) {
  constexpr double lo = static_cast<double>(std::numeric_limits<Raw>::min());
  constexpr double hi = static_cast<double>(std::numeric_limits<Raw>::max());
  for (double v : values) {
    if (v != std::floor(v) || v < lo || v > hi)
      fail(Errc::LossyDatatype, "value " + std::to_string(v) + " is not representable");
    w.put<Raw>(static_cast<Raw>(v));
  }
}

std::vector<std::uint8_t> encode_file(const Header& h, std::span<const double> values,
                                      bool compress) {
  detail::ByteWriter w;
  w.put_bytes(encode_header(h));
  w.put<std::uint32_t>(0);  // no extensions
  switch (h.datatype) {
    case Datatype::UInt8: encode_integer<std::uint8_t>(w, values); break;
    case Datatype::Int16: encode_integer<std::int16_t>(w, values); break;
    case Datatype::Int32: encode_integer<std::int32_t>(w, values); break;
    case Datatype::Float32:
      for (double v : values) w.put<float>(static_cast<float>(v));
      break;
    case Datatype::Float64:
      for (double v : values) w.put<double>(v);
      break;
  }
  auto bytes = w.take();
  return compress ? gzip_compress(bytes) : bytes;
}

}  // namespace

int bits_per_voxel(Datatype dt) {
  switch (dt) {
    case Datatype::UInt8: return 8;
    case Datatype::Int16: return 16;
    case Datatype::Int32: return 32;
    case Datatype::Float32: return 32;
    case Datatype::Float64: return 64;
  }
  return 0;
}

std::string_view datatype_name(Datatype dt) {
  switch (dt) {
    case Datatype::UInt8: return "uint8";
    case Datatype::Int16: return "int16";
    case Datatype::Int32: return "int32";
    case Datatype::Float32: return "float32";
    case Datatype::Float64: return "float64";
  }
  return "unknown";
}

bool is_integer(Datatype dt) { return dt != Datatype::Float32 && dt != Datatype::Float64; }

Extent3 Header::shape() const {
  Extent3 s{1, 1, 1};
  for (int a = 0; a < 3 && a < dim[0]; ++a) s[a] = static_cast<std::size_t>(dim[a + 1]);
  return s;
}

Vec3 Header::spacing() const {
  Vec3 s{1.0, 1.0, 1.0};
  for (int a = 0; a < 3 && a < dim[0]; ++a) s[a] = pixdim[a + 1];
  return s;
}

std::size_t Header::voxel_bytes() const {
  return voxel_count(shape()) * static_cast<std::size_t>(bitpix / 8);
}

bool Header::has_scaling() const { return scl_slope != 0.0f && std::isfinite(scl_slope); }

Affine Header::affine() const {
  Affine a{};
  a[3][3] = 1.0;
  if (sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      a[0][c] = srow_x[c];
      a[1][c] = srow_y[c];
      a[2][c] = srow_z[c];
    }
    return a;
  }
  const Vec3 sp = spacing();
  if (qform_code > 0) {
    const double b = quatern_b, c = quatern_c, d = quatern_d;
    const double a0 = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;
    const double r[3][3] = {
        {a0 * a0 + b * b - c * c - d * d, 2 * (b * c - a0 * d), 2 * (b * d + a0 * c)},
        {2 * (b * c + a0 * d), a0 * a0 + c * c - b * b - d * d, 2 * (c * d - a0 * b)},
        {2 * (b * d - a0 * c), 2 * (c * d + a0 * b), a0 * a0 + d * d - c * c - b * b}};
    const double scale[3] = {sp[0], sp[1], sp[2] * qfac};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a[i][j] = r[i][j] * scale[j];
    a[0][3] = qoffset_x;
    a[1][3] = qoffset_y;
    a[2][3] = qoffset_z;
    return a;
  }
  for (int i = 0; i < 3; ++i) a[i][i] = sp[i];
  return a;
}

Header parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kHeaderSize)
    fail(Errc::CorruptHeader, "header block must be exactly 348 bytes");

  Header h;
  const std::int32_t as_le = detail::load_le<std::int32_t>(bytes, kOffSizeofHdr);
  if (as_le == 348) {
    h.byte_order = ByteOrder::Little;
  } else if (detail::byteswap_value(as_le) == 348) {
    h.byte_order = ByteOrder::Big;
  } else {
    fail(Errc::CorruptHeader, "sizeof_hdr is not 348 in either byte order");
  }
  const bool swap = (h.byte_order == ByteOrder::Little) != detail::host_is_little();
  auto i16 = [&](std::size_t off) { return detail::load<std::int16_t>(bytes, off, swap); };
  auto f32 = [&](std::size_t off) { return detail::load<float>(bytes, off, swap); };

  h.sizeof_hdr = 348;
  std::memcpy(h.magic.data(), bytes.data() + kOffMagic, 4);
  if (std::memcmp(h.magic.data(), "ni1\0", 4) == 0)
    fail(Errc::UnsupportedTwoFile, "two-file (.hdr/.img) NIfTI is not supported");
  if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0) fail(Errc::BadMagic, "magic is not n+1");

  const std::int16_t dt = i16(kOffDatatype);
  if (!supported(dt)) fail(Errc::UnsupportedDatatype, "datatype code " + std::to_string(dt));
  h.datatype = static_cast<Datatype>(dt);
  h.bitpix = i16(kOffBitpix);
  if (h.bitpix != bits_per_voxel(h.datatype))
    fail(Errc::CorruptHeader, "bitpix " + std::to_string(h.bitpix) + " does not match datatype");

  for (int i = 0; i < 8; ++i) h.dim[i] = i16(kOffDim + 2 * i);
  for (int i = 0; i < 8; ++i) h.pixdim[i] = f32(kOffPixdim + 4 * i);
  const int rank = h.dim[0];
  if (rank < 1 || rank > 7) fail(Errc::CorruptHeader, "dim[0] must lie in 1..7");
  for (int a = 1; a <= rank; ++a) {
    if (h.dim[a] < 1) fail(Errc::CorruptHeader, "dim[" + std::to_string(a) + "] < 1");
    if (a > 3 && h.dim[a] != 1) fail(Errc::CorruptHeader, "only 3D volumes are supported");
    if (a <= 3 && !(std::isfinite(h.pixdim[a]) && h.pixdim[a] > 0.0f))
      fail(Errc::CorruptHeader, "pixdim[" + std::to_string(a) + "] must be > 0");
  }

  h.vox_offset = f32(kOffVoxOffset);
  if (!std::isfinite(h.vox_offset) || h.vox_offset < 352.0f || h.vox_offset > 1.0e9f ||
      h.vox_offset != std::floor(h.vox_offset))
    fail(Errc::CorruptHeader, "vox_offset must be an integer >= 352");

  h.intent_code = i16(kOffIntentCode);
  h.scl_slope = f32(kOffSclSlope);
  h.scl_inter = f32(kOffSclInter);
  if (h.has_scaling() && !std::isfinite(h.scl_inter))
    fail(Errc::CorruptHeader, "scl_inter is not finite");
  h.xyzt_units = bytes[kOffXyztUnits];
  h.qform_code = i16(kOffQformCode);
  h.sform_code = i16(kOffSformCode);
  h.quatern_b = f32(kOffQuatern);
  h.quatern_c = f32(kOffQuatern + 4);
  h.quatern_d = f32(kOffQuatern + 8);
  h.qoffset_x = f32(kOffQuatern + 12);
  h.qoffset_y = f32(kOffQuatern + 16);
  h.qoffset_z = f32(kOffQuatern + 20);
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = f32(kOffSrowX + 4 * c);
    h.srow_y[c] = f32(kOffSrowY + 4 * c);
    h.srow_z[c] = f32(kOffSrowZ + 4 * c);
  }
  std::memcpy(h.descrip.data(), bytes.data() + kOffDescrip, h.descrip.size());
  return h;
}

std::vector<std::uint8_t> encode_header(const Header& h) {
  std::vector<std::uint8_t> out(kHeaderSize, 0);
  std::span<std::uint8_t> b(out);
  detail::store_le<std::int32_t>(b, kOffSizeofHdr, 348);
  for (int i = 0; i < 8; ++i) detail::store_le<std::int16_t>(b, kOffDim + 2 * i, h.dim[i]);
  detail::store_le<std::int16_t>(b, kOffIntentCode, h.intent_code);
  detail::store_le<std::int16_t>(b, kOffDatatype, static_cast<std::int16_t>(h.datatype));
  detail::store_le<std::int16_t>(b, kOffBitpix, h.bitpix);
  for (int i = 0; i < 8; ++i) detail::store_le<float>(b, kOffPixdim + 4 * i, h.pixdim[i]);
  detail::store_le<float>(b, kOffVoxOffset, h.vox_offset);
  detail::store_le<float>(b, kOffSclSlope, h.scl_slope);
  detail::store_le<float>(b, kOffSclInter, h.scl_inter);
  b[kOffXyztUnits] = h.xyzt_units;
  std::memcpy(b.data() + kOffDescrip, h.descrip.data(), h.descrip.size());
  detail::store_le<std::int16_t>(b, kOffQformCode, h.qform_code);
  detail::store_le<std::int16_t>(b, kOffSformCode, h.sform_code);
  const float quat[6] = {h.quatern_b, h.quatern_c, h.quatern_d,
                         h.qoffset_x, h.qoffset_y, h.qoffset_z};
  for (int i = 0; i < 6; ++i) detail::store_le<float>(b, kOffQuatern + 4 * i, quat[i]);
  for (int c = 0; c < 4; ++c) {
    detail::store_le<float>(b, kOffSrowX + 4 * c, h.srow_x[c]);
    detail::store_le<float>(b, kOffSrowY + 4 * c, h.srow_y[c]);
    detail::store_le<float>(b, kOffSrowZ + 4 * c, h.srow_z[c]);
  }
  std::memcpy(b.data() + kOffMagic, h.magic.data(), 4);
  return out;
}

ImageFile read_image(std::span<const std::uint8_t> bytes) {
  const auto raw = maybe_inflate(bytes);
  ImageFile f;
  f.volume = decode_volume(raw, f.header);
  return f;
}

LabelFile read_label(std::span<const std::uint8_t> bytes) {
  const auto raw = maybe_inflate(bytes);
  LabelFile f;
  const Volume v = decode_volume(raw, f.header);
  std::vector<std::uint8_t> labels(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = std::nearbyint(v.data[i]);
    if (std::abs(v.data[i] - r) > kLabelSnapTolerance || r < 0.0 || r >= kClassCount)
      fail(Errc::NonIntegerLabel,
           "label value " + std::to_string(v.data[i]) + " is not one of {0, 1, 2}");
    labels[i] = static_cast<std::uint8_t>(r);
  }
  f.labels = LabelVolume(v.shape, v.spacing, std::move(labels));
  f.labels.affine = v.affine;
  return f;
}

ImageFile read_image_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return read_image(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

LabelFile read_label_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return read_label(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

std::vector<std::uint8_t> write_image(const Volume& v, const WriteOptions& opts) {
  const Header h = header_for(v.shape, v.spacing, v.affine, opts.datatype);
  return encode_file(h, v.data, opts.gzip);
}

std::vector<std::uint8_t> write_label(const LabelVolume& v, const WriteOptions& opts) {
  if (!is_integer(opts.datatype))
    fail(Errc::LossyDatatype, "labels must be written with an integer datatype");
  const Header h = header_for(v.shape, v.spacing, v.affine, opts.datatype);
  const std::vector<double> values(v.data.begin(), v.data.end());
  return encode_file(h, values, opts.gzip);
}

WriteOptions options_for(const std::filesystem::path& path, Datatype dt) {
  return {dt, path.extension() == ".gz"};
}

void write_image_file(const std::filesystem::path& path, const Volume& v,
                      const WriteOptions& opts) {
  write_bytes(path, write_image(v, opts));
}

void write_label_file(const std::filesystem::path& path, const LabelVolume& v,
                      const WriteOptions& opts) {
  write_bytes(path, write_label(v, opts));
}

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    fail(Errc::Io, "deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) fail(Errc::Io, "gzip compression failed");
  out.resize(produced);
  return out;
}

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) fail(Errc::Io, "inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      fail(Errc::TruncatedData, "gzip stream is corrupt or truncated");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      fail(Errc::TruncatedData, "gzip stream ended early");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::Io, "short write to " + path.string());
}

}  // namespace volseg::nifti
