#pragma once

#include <complex>
#include <span>
#include <vector>

namespace fan::ref {

// Plain serial implementations of the hot kernels, written naively and
// independently of the main library paths. The tests hold the parallel
// kernels to these, and the benchmark tool compares their runtimes.

/// Direct O(n^2) Fourier sum of a real frame.
std::vector<std::complex<double>> dft_direct(std::span<const double> x);

/// Triple-loop block affine transform; layouts match fan::BatLayer.
std::vector<std::complex<double>> bat_forward(
    std::span<const std::complex<double>> x, int channels, int bins,
    std::span<const std::complex<double>> weights,
    std::span<const std::complex<double>> biases, int directions);

std::vector<double> power(std::span<const std::complex<double>> z);

/// Double-loop frequency-aligned filtering with average or max pooling.
std::vector<double> fan_forward(std::span<const double> y, int directions,
                                int bins, std::span<const double> weights,
                                std::span<const double> biases, int filters,
                                bool max_pool);

std::vector<double> affine_forward(std::span<const double> x, int in, int out,
                                   std::span<const double> weights,
                                   std::span<const double> biases);

/// Log mel filter-bank energy of a power spectrum with a floored log.
std::vector<double> lfbe(std::span<const double> power_spectrum,
                         std::span<const double> mel_weights, int filters,
                         double floor_eps);

}  // namespace fan::ref
