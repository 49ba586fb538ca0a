#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "model.hpp"

namespace mhsi {

// MHSW layout (little-endian): "MHSW", u32 version, config block, then one
// record per parameter until end of file: u16 name length, name, u8 rank,
// u32 extents, f32 payload.
std::vector<std::uint8_t> encode_checkpoint(const MambaHsi& model);
MambaHsi decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const MambaHsi& model, const std::string& path);
MambaHsi load_checkpoint(const std::string& path);

}  // namespace mhsi
