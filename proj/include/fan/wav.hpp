#pragma once

#include <string>
#include <vector>

namespace fan {

struct WavData {
  int sample_rate = 0;
  // One sequence per channel, samples scaled to [-1, 1).
  std::vector<std::vector<double>> channels;
};

/// Reads 16-bit little-endian PCM WAV, any channel count.
WavData read_wav(const std::string& path);

/// Writes 16-bit PCM WAV. Samples are clamped to [-1, 1] and rounded.
void write_wav(const std::string& path, const WavData& wav);

}  // namespace fan
