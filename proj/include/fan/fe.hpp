#pragma once

#include <span>
#include <vector>

namespace fan {

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular mel filters evaluated at the retained bin centers
/// (k+1) * sample_rate / fft_size, fft_size = 2*(K+1). Centers are equally
/// spaced on the mel scale; each triangle peaks at 1 and overlaps its
/// neighbours by 50% in mel.
std::vector<double> mel_filterbank_init(int bins, int filters, int sample_rate,
                                        double fmin_hz, double fmax_hz);

/// Mel-initialized affine layer followed by ReLU and a floored log.
/// Fully trainable after initialization.
struct FeLayer {
  int bins = 0;     // K
  int filters = 0;  // F
  double log_floor = 1e-7;
  std::vector<double> weights;  // row-major [filter][bin]
  std::vector<double> biases;   // [filter], zero at init

  static FeLayer init(int bins, int filters, int sample_rate,
                      double fmin_hz = 60.0, double fmax_hz = 7600.0);
};

/// out = log(max(W z + b, 0) + log_floor). Never NaN, bounded below by
/// log(log_floor). The pre-activation is written to *pre_activation when
/// non-null (needed for backward).
std::vector<double> fe_forward(std::span<const double> z, const FeLayer& layer,
                               std::vector<double>* pre_activation = nullptr);

}  // namespace fan
