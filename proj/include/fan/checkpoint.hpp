#pragma once

#include <string>

#include "fan/pipeline.hpp"

namespace fan {

inline constexpr std::uint16_t kFanmVersion = 1;

/// Serializes the full pipeline: magic "FANM", version, variant tag byte,
/// dimension header, GMVN statistics, then one length-prefixed float32
/// little-endian blob per parameter tensor in declaration order.
/// Parameters are stored in 32-bit; save -> load -> save reproduces the
/// file byte for byte.
void write_checkpoint(const std::string& path, const Pipeline& p);

Pipeline read_checkpoint(const std::string& path);

}  // namespace fan
