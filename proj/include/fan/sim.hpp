#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fan/array.hpp"

namespace fan {

/// Device-playback interferer: a different class's band noise emitted
/// from a point 0.05 m outside mic 0, giving strong inter-channel level
/// differences.
struct PlaybackSpec {
  int interferer_class = 0;
  double level_db = 0.0;  // relative to the target at mic 0
};

/// Recipe for one labeled multi-channel utterance.
struct SyntheticScene {
  int class_id = 0;
  int num_classes = 6;
  LookDirection target_direction;
  double snr_db = 20.0;  // target vs diffuse noise; +inf disables noise
  std::optional<PlaybackSpec> playback;
  double duration_s = 0.5;
  int diffuse_directions = 64;  // plane waves in the isotropic noise field
  std::uint64_t seed = 0;
};

/// Separately rendered components plus the clipped mixture; mixture =
/// target + noise + playback sample-exactly before clipping.
struct SceneComponents {
  int sample_rate_hz = 16000;
  std::vector<std::vector<double>> target;    // [mic][sample]
  std::vector<std::vector<double>> noise;     // diffuse field, SNR-scaled
  std::vector<std::vector<double>> playback;  // zeros when absent
  std::vector<std::vector<double>> mixture;   // clipped to [-1, 1]
  std::int64_t clipped_samples = 0;
};

/// Class spectral ownership: `band_count` contiguous mel bands over
/// [150, 7500] Hz split into per-class blocks. Returns (lo_hz, hi_hz)
/// edges of every band owned by `class_id`.
std::vector<std::pair<double, double>> class_bands(int class_id, int classes,
                                                   int band_count = 24);

/// Reads `src` at fractional position `pos` (in samples) with a 32-tap
/// Hann-windowed sinc kernel; zero outside the buffer.
double fractional_sample(std::span<const double> src, double pos);

/// out[t] = src(t - delay_samples) via fractional_sample.
void apply_fractional_delay(std::span<const double> src, double delay_samples,
                            std::span<double> out);

/// Near-uniform unit vectors on the sphere (golden-angle lattice).
std::vector<Vec3> fibonacci_sphere(int count);

/// Renders target (band noise through far-field plane-wave delays),
/// diffuse noise (independent plane waves from >= 64 isotropic
/// directions, scaled to hit snr_db exactly), and the optional playback
/// interferer (spherical spreading from its near-field position).
SceneComponents synthesize_scene(const SyntheticScene& scene,
                                 const ArrayGeometry& geometry,
                                 int sample_rate_hz);

/// 10 log10(sum target^2 / sum noise^2) over all channels; +inf when the
/// noise is silent.
double oracle_snr(const std::vector<std::vector<double>>& target,
                  const std::vector<std::vector<double>>& noise);

/// SNR tertiles: 0 for <= 5 dB, 1 for (5, 15], 2 for > 15.
int snr_bucket(double snr_db);
std::string snr_bucket_label(int bucket);

struct CorpusSpec {
  int classes = 6;
  int train_count = 0;
  int dev_count = 0;
  int test_count = 0;
  double snr_min_db = -5.0;
  double snr_max_db = 25.0;
  double playback_fraction = 0.3;
  double duration_s = 0.5;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 1;

  void validate() const;
};

/// JSON object with the CorpusSpec field names; missing keys keep their
/// defaults (zero utterance counts).
CorpusSpec parse_corpus_spec(const std::string& json_text);
std::string corpus_spec_to_json(const CorpusSpec& spec);

/// The desk-scale recipe: 6 classes, 600/150/150 split, SNR in [-5, 25]
/// dB, 30% playback.
CorpusSpec default_corpus_spec();

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int class_id = 0;
  double snr_db = 0.0;
  bool playback = false;
  std::string split;  // train | dev | test
};
using CorpusManifest = std::vector<ManifestEntry>;

struct BuildResult {
  CorpusManifest manifest;
  std::int64_t clipped_samples = 0;
};

/// Synthesizes every utterance (parallel, deterministic per-utterance
/// seeds), writes WAVs plus manifest.tsv into out_dir, and returns the
/// manifest. Playback flags hit round(fraction * count) per split
/// exactly.
BuildResult build_corpus(const CorpusSpec& spec, const ArrayGeometry& geometry,
                         const std::string& out_dir);

void write_manifest(const std::string& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::string& path);

}  // namespace fan
