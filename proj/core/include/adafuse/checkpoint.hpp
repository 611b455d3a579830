#pragma once

#include <cstdint>
#include <string>

#include "adafuse/fusion.hpp"

namespace adafuse {

// Checkpoint file layout (all integers little-endian):
//   magic "ADFS" | version u32 | metadata_len u32 | metadata JSON |
//   tensor payload (32-bit LE floats, manifest order) | crc32(payload) u32
// The metadata JSON holds the fusion config and the ordered tensor manifest
// (name + shape per tensor). Tensors are stored as 32-bit floats regardless
// of the library's storage precision, so files are interchangeable between
// builds; the 32-bit build round-trips bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const FusionParams& params);

// Throws IoError (unreadable), FormatError (bad magic/manifest),
// CheckpointVersionError, CheckpointTruncatedError, CheckpointChecksumError.
FusionParams load_checkpoint(const std::string& path);

} // namespace adafuse
