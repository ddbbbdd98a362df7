#include "fan/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fan/error.hpp"

namespace fan {

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void wr_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void wr_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 44 || std::memcmp(p, "RIFF", 4) != 0 ||
      std::memcmp(p + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file: " + path);

  int channels = 0, bits = 0;
  int sample_rate = 0;
  std::size_t data_off = 0, data_len = 0;
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const char* id = bytes.data() + off;
    const std::uint32_t sz = rd_u32(p + off + 4);
    const std::size_t body = off + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (body + 16 > bytes.size()) throw DataError("truncated fmt chunk: " + path);
      const std::uint16_t format = rd_u16(p + body);
      if (format != 1) throw DataError("only PCM wav supported: " + path);
      channels = rd_u16(p + body + 2);
      sample_rate = static_cast<int>(rd_u32(p + body + 4));
      bits = rd_u16(p + body + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_len = sz;
    }
    off = body + sz + (sz & 1);
  }
  if (channels <= 0 || data_off == 0) throw DataError("missing wav chunks: " + path);
  if (bits != 16) throw DataError("only 16-bit PCM supported: " + path);
  if (data_off + data_len > bytes.size()) data_len = bytes.size() - data_off;

  const std::size_t n_samples = data_len / 2 / channels;
  WavData wav;
  wav.sample_rate = sample_rate;
  wav.channels.assign(channels, std::vector<double>(n_samples));
  const unsigned char* d = p + data_off;
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t j = (i * channels + c) * 2;
      const auto v = static_cast<std::int16_t>(d[j] | (d[j + 1] << 8));
      wav.channels[c][i] = v / 32768.0;
    }
  }
  return wav;
}

void write_wav(const std::string& path, const WavData& wav) {
  if (wav.channels.empty()) throw DataError("no channels to write");
  const int channels = static_cast<int>(wav.channels.size());
  const std::size_t n = wav.channels[0].size();
  for (const auto& ch : wav.channels)
    if (ch.size() != n) throw DataError("ragged channels");

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(n * channels * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  wr_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  wr_u32(out, 16);
  wr_u16(out, 1);  // PCM
  wr_u16(out, static_cast<std::uint16_t>(channels));
  wr_u32(out, static_cast<std::uint32_t>(wav.sample_rate));
  wr_u32(out, static_cast<std::uint32_t>(wav.sample_rate) * channels * 2);
  wr_u16(out, static_cast<std::uint16_t>(channels * 2));
  wr_u16(out, 16);
  out += "data";
  wr_u32(out, data_bytes);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      double v = std::clamp(wav.channels[c][i], -1.0, 1.0);
      // Scale by 32768 (the reader's divisor) so write(read(q)) == q.
      auto q = static_cast<std::int16_t>(
          std::clamp(std::lround(v * 32768.0), -32768L, 32767L));
      wr_u16(out, static_cast<std::uint16_t>(q));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write wav file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write: " + path);
}

}  // namespace fan
