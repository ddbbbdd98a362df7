#pragma once

#include <cstdint>
#include <vector>

#include "fan/frame.hpp"

namespace fan {

/// Global mean/variance statistics, tracked separately for the real and
/// imaginary part of every (channel, bin) component: 2K values per channel.
struct GmvnStats {
  int channels = 0;
  int bins = 0;
  std::uint64_t frame_count = 0;
  double variance_floor = 1e-8;
  std::vector<double> mean;      // [channel][bin][re,im]
  std::vector<double> variance;  // same layout, entries >= variance_floor

  std::size_t idx(int m, int k, int comp) const {
    return (static_cast<std::size_t>(m) * bins + k) * 2 + comp;
  }
};

/// Streaming accumulator for GMVN statistics. Partial accumulators merge
/// associatively, so disjoint corpus shards can be reduced in parallel.
class GmvnAccumulator {
 public:
  GmvnAccumulator() = default;
  GmvnAccumulator(int channels, int bins);

  void add(const MultiChannelSpectrum& frame);
  void merge(const GmvnAccumulator& other);
  GmvnStats finalize(double variance_floor = 1e-8) const;

  std::uint64_t frame_count() const { return count_; }

 private:
  int channels_ = 0;
  int bins_ = 0;
  std::uint64_t count_ = 0;
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
};

/// Population mean/variance over at least two frames; variance is floored.
GmvnStats gmvn_fit(const std::vector<MultiChannelSpectrum>& frames,
                   double variance_floor = 1e-8);

/// Componentwise (x - mean) / sqrt(variance).
MultiChannelSpectrum gmvn_apply(const MultiChannelSpectrum& frame,
                                const GmvnStats& stats);

/// Inverse of gmvn_apply with the same statistics.
MultiChannelSpectrum gmvn_unapply(const MultiChannelSpectrum& frame,
                                  const GmvnStats& stats);

}  // namespace fan
