#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "volseg/error.hpp"

// Explicit-endianness encode/decode helpers shared by the binary formats.
namespace volseg::detail {

template <typename T>
T byteswap_value(T v) {
  auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
  std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

/// Loads a T stored at `offset`; `swap` reverses the bytes relative to the host.
template <typename T>
T load(std::span<const std::uint8_t> bytes, std::size_t offset, bool swap) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return swap ? byteswap_value(v) : v;
}

inline bool host_is_little() { return std::endian::native == std::endian::little; }

template <typename T>
T load_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return load<T>(bytes, offset, !host_is_little());
}

template <typename T>
void store_le(std::span<std::uint8_t> bytes, std::size_t offset, T v) {
  if (!host_is_little()) v = byteswap_value(v);
  std::memcpy(bytes.data() + offset, &v, sizeof(T));
}

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const std::size_t at = buf_.size();
    buf_.resize(at + sizeof(T));
    store_le<T>(buf_, at, v);
  }
  void put_bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void put_string(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, Errc on_short) : bytes_(bytes), errc_(on_short) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = load_le<T>(bytes_, pos_);
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(errc_, "unexpected end of data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  Errc errc_;
};

}  // namespace volseg::detail
