#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fan/array.hpp"
#include "fan/frame.hpp"

namespace fan {

/// Elementwise squared magnitude, one real per complex bin.
std::vector<double> power_op(std::span<const cplx> z);

/// Same, over a flat (re, im) paired view; the output halves the length.
std::vector<double> power_op_pairs(std::span<const double> interleaved);

/// Block affine transform: one complex M-tap filter plus bias per
/// (look direction, bin). Bin k of the output touches only bin k of the
/// input.
struct BatLayer {
  int channels = 0;    // M
  int directions = 0;  // D
  int bins = 0;        // K
  std::vector<cplx> weights;  // [direction][bin][mic]
  std::vector<cplx> biases;   // [direction][bin]

  std::size_t widx(int d, int k, int m) const {
    return (static_cast<std::size_t>(d) * bins + k) * channels + m;
  }
  std::size_t bidx(int d, int k) const {
    return static_cast<std::size_t>(d) * bins + k;
  }
};

/// out[d][k] = w[d][k]^H x[:, k] + b[d][k], flattened direction-major.
std::vector<cplx> bat_forward(const MultiChannelSpectrum& x, const BatLayer& layer);

enum class Pooling { kAverage, kMax };

/// N real filters of length D shared across every frequency bin, pooled
/// over filters. Parameter count is exactly N*D + N.
struct FanLayer {
  int directions = 0;  // D
  int filters = 0;     // N
  Pooling pooling = Pooling::kAverage;
  std::vector<double> weights;  // [filter][direction]
  std::vector<double> biases;   // [filter]
};

/// Z(k) pooled over n of (w_n . Y(:, k) + b_n). Y is direction-major
/// [direction][bin]. For max pooling, argmax (lowest winning index) per
/// bin is written to *argmax when non-null.
std::vector<double> fan_forward(std::span<const double> y, int bins,
                                const FanLayer& layer,
                                std::vector<int>* argmax = nullptr);

struct AffineLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // row-major [out][in]
  std::vector<double> biases;   // [out]
};

std::vector<double> affine_forward(std::span<const double> x,
                                   const AffineLayer& layer);

/// Affine layer with weights and biases drawn uniform in [-a, a],
/// a = sqrt(1/in).
AffineLayer make_affine(int in, int out, std::mt19937_64& rng);

/// The six multi-channel module assemblies. Every variant maps an M x K
/// complex frame to a K-dimensional real feature.
enum class McTag : std::uint8_t {
  kRaw1ch = 0,
  kRaw2ch = 1,
  kFanMax = 2,
  kBatAt = 3,
  kBatFanMax = 4,
  kBatFanAvg = 5,
};

McTag parse_mc_tag(const std::string& name);  // accepts "bat-fan-avg" etc.
std::string to_string(McTag tag);

struct McConfig {
  int channels = 2;     // M
  int bins = 127;       // K
  int directions = 12;  // D for BAT
  int filters = 24;     // N for FAN
  std::uint64_t seed = 1;
};

struct McVariant {
  McTag tag = McTag::kRaw1ch;
  McConfig cfg;
  std::optional<BatLayer> bat;
  std::optional<FanLayer> fan;
  std::optional<AffineLayer> affine;

  int output_dim() const { return cfg.bins; }
};

/// Builds the layer graph for a tag. Bat* tags take their weights from
/// `init` when provided (biases zero); otherwise parameters are drawn
/// uniform in [-a, a], a = sqrt(1/fan_in), from the config seed.
McVariant assemble_variant(McTag tag, const McConfig& cfg,
                           const SuperdirectiveWeights* init = nullptr);

/// Forward through a variant with the intermediates needed for backward.
struct McCache {
  std::vector<cplx> bat_out;      // BAT output, direction-major
  std::vector<double> power;      // squared magnitudes, direction-major
  std::vector<double> affine_in;  // flattened affine input (BatAt: bin-major)
  std::vector<int> fan_argmax;    // winning filter per bin (max pooling)
};

std::vector<double> mc_forward(const McVariant& v, const MultiChannelSpectrum& x,
                               McCache* cache = nullptr);

struct LayerParamCount {
  std::string name;
  std::int64_t total = 0;         // trainable reals; complex counts as 2
  std::int64_t weights_only = 0;  // excluding biases
};

struct ParamBreakdown {
  std::vector<LayerParamCount> layers;
  std::int64_t total = 0;
};

ParamBreakdown parameter_count(const McVariant& v);

}  // namespace fan
