#include "fan/ref.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace fan::ref {

using cd = std::complex<double>;

std::vector<cd> dft_direct(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
      acc += x[t] * cd(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<cd> bat_forward(std::span<const cd> x, int channels, int bins,
                            std::span<const cd> weights, std::span<const cd> biases,
                            int directions) {
  std::vector<cd> out(static_cast<std::size_t>(directions) * bins);
  for (int d = 0; d < directions; ++d) {
    for (int k = 0; k < bins; ++k) {
      cd acc = biases[static_cast<std::size_t>(d) * bins + k];
      for (int m = 0; m < channels; ++m) {
        const cd w = weights[(static_cast<std::size_t>(d) * bins + k) * channels + m];
        const cd xv = x[static_cast<std::size_t>(m) * bins + k];
        acc += std::conj(w) * xv;
      }
      out[static_cast<std::size_t>(d) * bins + k] = acc;
    }
  }
  return out;
}

std::vector<double> power(std::span<const cd> z) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = z[i].real() * z[i].real() + z[i].imag() * z[i].imag();
  return out;
}

std::vector<double> fan_forward(std::span<const double> y, int directions,
                                int bins, std::span<const double> weights,
                                std::span<const double> biases, int filters,
                                bool max_pool) {
  std::vector<double> z(bins);
  for (int k = 0; k < bins; ++k) {
    double pooled = max_pool ? -std::numeric_limits<double>::infinity() : 0.0;
    for (int n = 0; n < filters; ++n) {
      double a = biases[n];
      for (int d = 0; d < directions; ++d)
        a += weights[static_cast<std::size_t>(n) * directions + d] *
             y[static_cast<std::size_t>(d) * bins + k];
      if (max_pool)
        pooled = std::max(pooled, a);
      else
        pooled += a;
    }
    z[k] = max_pool ? pooled : pooled / filters;
  }
  return z;
}

std::vector<double> affine_forward(std::span<const double> x, int in, int out,
                                   std::span<const double> weights,
                                   std::span<const double> biases) {
  std::vector<double> y(out);
  for (int o = 0; o < out; ++o) {
    double acc = biases[o];
    for (int i = 0; i < in; ++i)
      acc += weights[static_cast<std::size_t>(o) * in + i] * x[i];
    y[o] = acc;
  }
  return y;
}

std::vector<double> lfbe(std::span<const double> power_spectrum,
                         std::span<const double> mel_weights, int filters,
                         double floor_eps) {
  const int bins = static_cast<int>(power_spectrum.size());
  std::vector<double> out(filters);
  for (int f = 0; f < filters; ++f) {
    double e = 0.0;
    for (int k = 0; k < bins; ++k)
      e += mel_weights[static_cast<std::size_t>(f) * bins + k] * power_spectrum[k];
    if (e < 0.0) e = 0.0;
    out[f] = std::log(e + floor_eps);
  }
  return out;
}

}  // namespace fan::ref
