#include "fan/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fan/error.hpp"
#include "fan/grad.hpp"

namespace fan {

namespace {

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& s, float f) { put_u32(s, std::bit_cast<std::uint32_t>(f)); }

struct Reader {
  const unsigned char* p;
  std::size_t len;
  std::size_t off = 0;
  void need(std::size_t n) const {
    if (off + n > len) throw DataError("truncated checkpoint");
  }
  std::uint16_t u16() {
    need(2);
    auto v = static_cast<std::uint16_t>(p[off] | (p[off + 1] << 8));
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
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[off + i]) << (8 * i);
    off += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return p[off++];
  }
  float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace

void write_checkpoint(const std::string& path, const Pipeline& p) {
  std::string out;
  out += "FANM";
  put_u16(out, kFanmVersion);
  out.push_back(static_cast<char>(static_cast<std::uint8_t>(p.mc.tag)));

  put_u32(out, static_cast<std::uint32_t>(p.mc.cfg.channels));
  put_u32(out, static_cast<std::uint32_t>(p.mc.cfg.bins));
  put_u32(out, static_cast<std::uint32_t>(p.mc.cfg.directions));
  put_u32(out, static_cast<std::uint32_t>(p.mc.cfg.filters));
  put_u32(out, static_cast<std::uint32_t>(p.fe.filters));
  put_u32(out, static_cast<std::uint32_t>(p.cls.hidden));
  put_u32(out, static_cast<std::uint32_t>(p.cls.classes));
  put_u32(out, static_cast<std::uint32_t>(p.frame_cfg.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(p.frame_cfg.window_len_samples));
  put_u32(out, static_cast<std::uint32_t>(p.frame_cfg.hop_samples));
  put_u32(out, static_cast<std::uint32_t>(p.frame_cfg.fft_size));
  put_u32(out, static_cast<std::uint32_t>(p.frame_cfg.lfr_factor));

  put_u64(out, p.gmvn.frame_count);
  put_f32(out, static_cast<float>(p.gmvn.variance_floor));
  for (const double v : p.gmvn.mean) put_f32(out, static_cast<float>(v));
  for (const double v : p.gmvn.variance) put_f32(out, static_cast<float>(v));

  auto& mutable_p = const_cast<Pipeline&>(p);  // read-only traversal
  for (const ParamView& view : all_params(mutable_p)) {
    put_u32(out, static_cast<std::uint32_t>(view.size));
    for (std::size_t i = 0; i < view.size; ++i)
      put_f32(out, static_cast<float>(view.data[i]));
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("short write: " + path);
}

Pipeline read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FANM", 4) != 0)
    throw DataError("bad checkpoint magic: " + path);
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 4};
  if (r.u16() != kFanmVersion) throw DataError("unsupported checkpoint version");
  const auto tag_byte = r.u8();
  if (tag_byte > static_cast<std::uint8_t>(McTag::kBatFanAvg))
    throw DataError("unknown variant tag in checkpoint");
  const auto tag = static_cast<McTag>(tag_byte);

  McConfig mc_cfg;
  mc_cfg.channels = static_cast<int>(r.u32());
  mc_cfg.bins = static_cast<int>(r.u32());
  mc_cfg.directions = static_cast<int>(r.u32());
  mc_cfg.filters = static_cast<int>(r.u32());
  const int fe_filters = static_cast<int>(r.u32());
  const int hidden = static_cast<int>(r.u32());
  const int classes = static_cast<int>(r.u32());
  FrameConfig frame_cfg;
  frame_cfg.sample_rate_hz = static_cast<int>(r.u32());
  frame_cfg.window_len_samples = static_cast<int>(r.u32());
  frame_cfg.hop_samples = static_cast<int>(r.u32());
  frame_cfg.fft_size = static_cast<int>(r.u32());
  frame_cfg.lfr_factor = static_cast<int>(r.u32());

  Pipeline p = make_pipeline(tag, mc_cfg, frame_cfg, fe_filters, hidden, classes);
  p.gmvn.frame_count = r.u64();
  p.gmvn.variance_floor = r.f32();
  for (double& v : p.gmvn.mean) v = r.f32();
  for (double& v : p.gmvn.variance) v = r.f32();

  for (const ParamView& view : all_params(p)) {
    const std::uint32_t n = r.u32();
    if (n != view.size)
      throw DataError("checkpoint blob size mismatch for " + view.name);
    for (std::size_t i = 0; i < view.size; ++i) view.data[i] = r.f32();
  }
  if (r.off != r.len) throw DataError("trailing bytes in checkpoint");
  return p;
}

}  // namespace fan
