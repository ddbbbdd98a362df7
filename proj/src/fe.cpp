#include "fan/fe.hpp"

#include <algorithm>
#include <cmath>

#include "fan/error.hpp"

namespace fan {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_filterbank_init(int bins, int filters, int sample_rate,
                                        double fmin_hz, double fmax_hz) {
  if (filters < 1) throw DataError("need at least one mel filter");
  if (!(0.0 <= fmin_hz && fmin_hz < fmax_hz && fmax_hz <= sample_rate / 2.0))
    throw DataError("invalid mel band edges");

  const int fft_size = 2 * (bins + 1);
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> centers(filters + 2);
  for (int i = 0; i < filters + 2; ++i)
    centers[i] = mel_lo + (mel_hi - mel_lo) * i / (filters + 1);

  std::vector<double> w(static_cast<std::size_t>(filters) * bins, 0.0);
  for (int k = 0; k < bins; ++k) {
    const double hz = static_cast<double>(k + 1) * sample_rate / fft_size;
    const double mel = hz_to_mel(hz);
    for (int f = 0; f < filters; ++f) {
      const double left = centers[f], center = centers[f + 1],
                   right = centers[f + 2];
      double v = 0.0;
      if (mel > left && mel < right) {
        v = mel <= center ? (mel - left) / (center - left)
                          : (right - mel) / (right - center);
      }
      w[static_cast<std::size_t>(f) * bins + k] = v;
    }
  }
  return w;
}

FeLayer FeLayer::init(int bins, int filters, int sample_rate, double fmin_hz,
                      double fmax_hz) {
  FeLayer layer;
  layer.bins = bins;
  layer.filters = filters;
  layer.weights = mel_filterbank_init(bins, filters, sample_rate, fmin_hz, fmax_hz);
  layer.biases.assign(filters, 0.0);
  return layer;
}

std::vector<double> fe_forward(std::span<const double> z, const FeLayer& layer,
                               std::vector<double>* pre_activation) {
  if (z.size() != static_cast<std::size_t>(layer.bins))
    throw DataError("fe shape mismatch");
  std::vector<double> out(layer.filters);
  if (pre_activation) pre_activation->resize(layer.filters);
  for (int f = 0; f < layer.filters; ++f) {
    const double* w = layer.weights.data() + static_cast<std::size_t>(f) * layer.bins;
    double a = layer.biases[f];
    for (int k = 0; k < layer.bins; ++k) a += w[k] * z[k];
    if (pre_activation) (*pre_activation)[f] = a;
    out[f] = std::log(std::max(a, 0.0) + layer.log_floor);
  }
  return out;
}

}  // namespace fan
