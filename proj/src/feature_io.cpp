#include "fan/feature_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fan/error.hpp"

namespace fan {

namespace {

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& s, float f) { put_u32(s, std::bit_cast<std::uint32_t>(f)); }

struct Reader {
  const unsigned char* p;
  std::size_t len;
  std::size_t off = 0;
  void need(std::size_t n) const {
    if (off + n > len) throw DataError("truncated feature file");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[off] | (p[off + 1] << 8));
    off += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace

void write_fanf(const std::string& path,
                const std::vector<MultiChannelSpectrum>& frames) {
  const int k = frames.empty() ? 0 : frames[0].bins;
  const int m = frames.empty() ? 0 : frames[0].channels;
  for (const auto& f : frames)
    if (f.bins != k || f.channels != m) throw DataError("inconsistent frame shapes");

  std::string out;
  out += "FANF";
  put_u16(out, kFanfVersion);
  put_u32(out, static_cast<std::uint32_t>(k));
  put_u32(out, static_cast<std::uint32_t>(m));
  put_u32(out, static_cast<std::uint32_t>(frames.size()));
  for (const auto& f : frames) {
    for (int c = 0; c < m; ++c) {
      for (int b = 0; b < k; ++b) {
        put_f32(out, static_cast<float>(f.at(c, b).real()));
        put_f32(out, static_cast<float>(f.at(c, b).imag()));
      }
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write feature file: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("short write: " + path);
}

std::vector<MultiChannelSpectrum> read_fanf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FANF", 4) != 0)
    throw DataError("bad feature file magic: " + path);
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 4};
  const std::uint16_t version = r.u16();
  if (version != kFanfVersion) throw DataError("unsupported feature file version");
  const int k = static_cast<int>(r.u32());
  const int m = static_cast<int>(r.u32());
  const std::uint32_t n = r.u32();

  std::vector<MultiChannelSpectrum> frames(n);
  for (std::uint32_t t = 0; t < n; ++t) {
    auto& f = frames[t];
    f.frame_index = t;
    f.channels = m;
    f.bins = k;
    f.data.resize(static_cast<std::size_t>(m) * k);
    for (int c = 0; c < m; ++c)
      for (int b = 0; b < k; ++b) {
        const double re = r.f32();
        const double im = r.f32();
        f.at(c, b) = {re, im};
      }
  }
  return frames;
}

}  // namespace fan
