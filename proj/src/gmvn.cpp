#include "fan/gmvn.hpp"

#include <cmath>

#include "fan/error.hpp"

namespace fan {

namespace {
void check_shape(const MultiChannelSpectrum& f, int channels, int bins) {
  if (f.channels != channels || f.bins != bins)
    throw DataError("gmvn shape mismatch");
}
}  // namespace

GmvnAccumulator::GmvnAccumulator(int channels, int bins)
    : channels_(channels),
      bins_(bins),
      sum_(static_cast<std::size_t>(channels) * bins * 2, 0.0),
      sum_sq_(static_cast<std::size_t>(channels) * bins * 2, 0.0) {}

void GmvnAccumulator::add(const MultiChannelSpectrum& frame) {
  if (channels_ == 0) {
    *this = GmvnAccumulator(frame.channels, frame.bins);
  }
  check_shape(frame, channels_, bins_);
  const std::size_t n = frame.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double re = frame.data[i].real();
    const double im = frame.data[i].imag();
    sum_[2 * i] += re;
    sum_[2 * i + 1] += im;
    sum_sq_[2 * i] += re * re;
    sum_sq_[2 * i + 1] += im * im;
  }
  ++count_;
}

void GmvnAccumulator::merge(const GmvnAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  if (channels_ != other.channels_ || bins_ != other.bins_)
    throw DataError("gmvn shape mismatch");
  for (std::size_t i = 0; i < sum_.size(); ++i) {
    sum_[i] += other.sum_[i];
    sum_sq_[i] += other.sum_sq_[i];
  }
  count_ += other.count_;
}

GmvnStats GmvnAccumulator::finalize(double variance_floor) const {
  if (count_ < 2) throw DataError("insufficient statistics");
  GmvnStats s;
  s.channels = channels_;
  s.bins = bins_;
  s.frame_count = count_;
  s.variance_floor = variance_floor;
  s.mean.resize(sum_.size());
  s.variance.resize(sum_.size());
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < sum_.size(); ++i) {
    const double mu = sum_[i] / n;
    s.mean[i] = mu;
    s.variance[i] = std::max(sum_sq_[i] / n - mu * mu, variance_floor);
  }
  return s;
}

GmvnStats gmvn_fit(const std::vector<MultiChannelSpectrum>& frames,
                   double variance_floor) {
  if (frames.size() < 2) throw DataError("insufficient statistics");
  GmvnAccumulator acc(frames[0].channels, frames[0].bins);
  for (const auto& f : frames) acc.add(f);
  return acc.finalize(variance_floor);
}

MultiChannelSpectrum gmvn_apply(const MultiChannelSpectrum& frame,
                                const GmvnStats& stats) {
  check_shape(frame, stats.channels, stats.bins);
  MultiChannelSpectrum out = frame;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double re = (frame.data[i].real() - stats.mean[2 * i]) /
                      std::sqrt(stats.variance[2 * i]);
    const double im = (frame.data[i].imag() - stats.mean[2 * i + 1]) /
                      std::sqrt(stats.variance[2 * i + 1]);
    out.data[i] = {re, im};
  }
  return out;
}

MultiChannelSpectrum gmvn_unapply(const MultiChannelSpectrum& frame,
                                  const GmvnStats& stats) {
  check_shape(frame, stats.channels, stats.bins);
  MultiChannelSpectrum out = frame;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double re = frame.data[i].real() * std::sqrt(stats.variance[2 * i]) +
                      stats.mean[2 * i];
    const double im =
        frame.data[i].imag() * std::sqrt(stats.variance[2 * i + 1]) +
        stats.mean[2 * i + 1];
    out.data[i] = {re, im};
  }
  return out;
}

}  // namespace fan
