#pragma once

#include <cstdint>
#include <string>

#include "rcmk/model.hpp"

namespace rcmk {

// Binary checkpoint format (little-endian):
//   magic "RCMK", u16 version, u32 spec text length, spec text,
//   u32 tensor count, then per tensor (sorted by name):
//     u32 name length, name bytes, u8 rank, i64 dims..., f32 payload
//   u32 CRC32 of everything before the trailer.
// Parameters and buffers share one namespace; float64 tensors are refused.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

// Writes to a temp file in the same directory, then renames into place.
void save_checkpoint(const Model& m, const std::string& path);

// Verifies magic, version, and checksum, reconstructs the model from the
// embedded spec text, and loads every tensor. Throws IoError on any mismatch
// (truncated file, bad checksum, unknown tensor, shape drift).
Model load_checkpoint(const std::string& path);

// Loads into an existing model; the embedded spec must match m.spec exactly.
void load_checkpoint_into(Model& m, const std::string& path);

}  // namespace rcmk
