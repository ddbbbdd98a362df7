#pragma once

#include <string>
#include <vector>

#include "fan/frame.hpp"

namespace fan {

// DFT feature file. Layout: magic "FANF", version u16, K u32, M u32,
// frame count u32 (all little-endian), then float32 LE values in
// frame-major, channel-major, bin-minor order with re/im interleaved.
inline constexpr std::uint16_t kFanfVersion = 1;

void write_fanf(const std::string& path,
                const std::vector<MultiChannelSpectrum>& frames);

std::vector<MultiChannelSpectrum> read_fanf(const std::string& path);

}  // namespace fan
