#include "fan/frame.hpp"

#include <cmath>
#include <numbers>

#include "fan/error.hpp"

namespace fan {

namespace {
bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

void FrameConfig::validate() const {
  if (sample_rate_hz <= 0) throw DataError("sample rate must be positive");
  if (window_len_samples <= 0 || hop_samples <= 0 || lfr_factor <= 0)
    throw DataError("window, hop and lfr factor must be positive");
  if (!is_pow2(fft_size)) throw DataError("fft size must be a power of two");
  if (window_len_samples > fft_size)
    throw DataError("window longer than fft size");
}

double FrameConfig::bin_omega(int k) const {
  return 2.0 * std::numbers::pi * static_cast<double>(k + 1) *
         sample_rate_hz / fft_size;
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n));
  return w;
}

Fft::Fft(int size) : size_(size) {
  if (!is_pow2(size) || size < 2) throw DataError("fft size must be a power of two");
  twiddles_.resize(size / 2);
  for (int i = 0; i < size / 2; ++i) {
    double ang = -2.0 * std::numbers::pi * i / size;
    twiddles_[i] = {std::cos(ang), std::sin(ang)};
  }
  bitrev_.resize(size);
  int log2n = 0;
  while ((1 << log2n) < size) ++log2n;
  for (int i = 0; i < size; ++i) {
    int r = 0;
    for (int b = 0; b < log2n; ++b)
      if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
    bitrev_[i] = r;
  }
}

void Fft::forward(std::span<cplx> buf) const {
  if (static_cast<int>(buf.size()) != size_)
    throw DataError("fft buffer size mismatch");
  for (int i = 0; i < size_; ++i) {
    int j = bitrev_[i];
    if (i < j) std::swap(buf[i], buf[j]);
  }
  for (int len = 2; len <= size_; len <<= 1) {
    int step = size_ / len;
    for (int start = 0; start < size_; start += len) {
      for (int i = 0; i < len / 2; ++i) {
        cplx u = buf[start + i];
        cplx t = twiddles_[static_cast<std::size_t>(i) * step] *
                 buf[start + i + len / 2];
        buf[start + i] = u + t;
        buf[start + i + len / 2] = u - t;
      }
    }
  }
}

std::vector<MultiChannelSpectrum> frame_and_transform(
    const std::vector<std::vector<double>>& pcm, const FrameConfig& cfg) {
  cfg.validate();
  if (pcm.empty()) throw DataError("no channels");
  const std::size_t len = pcm[0].size();
  for (const auto& ch : pcm)
    if (ch.size() != len) throw DataError("ragged channels");

  const int win = cfg.window_len_samples;
  const int hop = cfg.hop_samples;
  if (len < static_cast<std::size_t>(win)) return {};
  const std::size_t n_frames = (len - win) / hop + 1;
  const int m = static_cast<int>(pcm.size());
  const int k_bins = cfg.bins();

  const std::vector<double> window = hann_window(win);
  const Fft fft(cfg.fft_size);

  std::vector<MultiChannelSpectrum> out(n_frames);
  const auto frames = static_cast<std::ptrdiff_t>(n_frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < frames; ++t) {
    MultiChannelSpectrum& f = out[t];
    f.frame_index = static_cast<std::size_t>(t);
    f.channels = m;
    f.bins = k_bins;
    f.data.resize(static_cast<std::size_t>(m) * k_bins);
    std::vector<cplx> buf(cfg.fft_size);
    for (int c = 0; c < m; ++c) {
      const double* x = pcm[c].data() + static_cast<std::size_t>(t) * hop;
      for (int i = 0; i < win; ++i) buf[i] = x[i] * window[i];
      for (int i = win; i < cfg.fft_size; ++i) buf[i] = 0.0;
      fft.forward(buf);
      for (int k = 0; k < k_bins; ++k) f.at(c, k) = buf[k + 1];
    }
  }
  return out;
}

std::vector<LfrStack> lfr_stack(std::vector<MultiChannelSpectrum> frames,
                                int lfr_factor) {
  if (lfr_factor < 1) throw DataError("lfr factor must be >= 1");
  const std::size_t n_stacks = frames.size() / lfr_factor;
  std::vector<LfrStack> out(n_stacks);
  for (std::size_t i = 0; i < n_stacks; ++i) {
    out[i].frames.assign(
        std::make_move_iterator(frames.begin() + i * lfr_factor),
        std::make_move_iterator(frames.begin() + (i + 1) * lfr_factor));
  }
  return out;
}

}  // namespace fan
