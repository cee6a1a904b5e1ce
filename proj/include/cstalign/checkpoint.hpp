#pragma once

#include <filesystem>

#include "cstalign/encoder.hpp"

namespace cstalign {

// Flat little-endian binary:
//   magic "CSTCKPT\0" | u32 version | u32 tensor count
//   per tensor: u32 name length | name | u32 rank | u64 dims[rank] | f32 data (row-major)
// Values are stored as 32-bit floats, so a load returns the float-rounded params.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);

// Params with every value rounded through float, i.e. what a save/load yields.
EncoderParams round_to_float(const EncoderParams& params);

}  // namespace cstalign
