#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fan {

using cplx = std::complex<double>;

/// STFT dimensioning. Defaults: 12.5 ms window, 10 ms hop at 16 kHz,
/// 256-point transform, 3x low-frame-rate stacking.
struct FrameConfig {
  int sample_rate_hz = 16000;
  int window_len_samples = 200;
  int hop_samples = 160;
  int fft_size = 256;
  int lfr_factor = 3;

  // Retained bins 1..K; DC and Nyquist are dropped.
  int bins() const { return fft_size / 2 - 1; }
  // Angular frequency (rad/s) of retained bin k, 0-based after trimming.
  double bin_omega(int k) const;

  void validate() const;  // throws DataError on a broken config
};

/// One frame of per-channel DFT features: M channels x K complex bins.
struct MultiChannelSpectrum {
  std::size_t frame_index = 0;
  int channels = 0;
  int bins = 0;
  std::vector<cplx> data;  // row-major [channel][bin]

  cplx& at(int m, int k) { return data[static_cast<std::size_t>(m) * bins + k]; }
  const cplx& at(int m, int k) const {
    return data[static_cast<std::size_t>(m) * bins + k];
  }
};

/// lfr_factor consecutive frames treated as parallel streams.
struct LfrStack {
  std::vector<MultiChannelSpectrum> frames;
};

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

/// Radix-2 complex FFT with a precomputed twiddle table. Read-only after
/// construction, safe to share across threads.
class Fft {
 public:
  explicit Fft(int size);  // size must be a power of two >= 2
  int size() const { return size_; }
  // In-place forward transform, X_k = sum_n x_n e^{-2*pi*i*k*n/N}.
  void forward(std::span<cplx> buf) const;

 private:
  int size_;
  std::vector<cplx> twiddles_;
  std::vector<int> bitrev_;
};

/// Windowed, zero-padded DFT features for every channel. Frames are
/// computed independently and in parallel. Channels must have equal
/// length; fewer samples than one window yields an empty sequence.
std::vector<MultiChannelSpectrum> frame_and_transform(
    const std::vector<std::vector<double>>& pcm, const FrameConfig& cfg);

/// Groups consecutive frames into stacks of lfr_factor; trailing
/// remainder frames are dropped.
std::vector<LfrStack> lfr_stack(std::vector<MultiChannelSpectrum> frames,
                                int lfr_factor);

}  // namespace fan
