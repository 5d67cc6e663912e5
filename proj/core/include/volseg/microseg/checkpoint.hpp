#pragma once

#include <filesystem>
#include <vector>

#include "volseg/microseg/unet.hpp"

namespace volseg::microseg {

// Layout, all integers little-endian:
//   "VSEGCKPT" | u32 version | u32 config length | config JSON |
//   u32 tensor count | per tensor:
//     u16 name length | name | u8 rank | u32 dims[rank] | u8 dtype | payload
// dtype 1 = float32, 2 = float64. Writers emit float64.

inline constexpr char kCheckpointMagic[8] = {'V', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(UNet& model);
UNet deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, UNet& model);
UNet load_checkpoint(const std::filesystem::path& path);

}  // namespace volseg::microseg
