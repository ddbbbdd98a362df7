#include "fan/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fan/error.hpp"
#include "fan/fe.hpp"
#include "fan/wav.hpp"

namespace fan {

namespace {

constexpr double kBandLoHz = 150.0;
constexpr double kBandHiHz = 7500.0;
constexpr double kTargetRms = 0.05;
constexpr int kTonesPerBand = 6;
constexpr double kPlaybackDistanceM = 0.05;
constexpr int kSincHalfWidth = 16;  // 32-tap kernel

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

double rms(std::span<const double> x) {
  double s = 0.0;
  for (const double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

double total_power(const std::vector<std::vector<double>>& channels) {
  double s = 0.0;
  for (const auto& ch : channels)
    for (const double v : ch) s += v * v;
  return s;
}

/// Sum of random-phase sinusoids inside the given bands, scaled to the
/// requested RMS. Deterministic in the rng state.
std::vector<double> band_noise(const std::vector<std::pair<double, double>>& bands,
                               std::size_t samples, int sample_rate,
                               double target_rms, std::mt19937_64& rng) {
  struct Tone {
    double omega;
    double phase;
  };
  std::vector<Tone> tones;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& [lo, hi] : bands) {
    for (int t = 0; t < kTonesPerBand; ++t) {
      const double f = lo + (hi - lo) * unit(rng);
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      tones.push_back({2.0 * std::numbers::pi * f / sample_rate, phase});
    }
  }
  std::vector<double> out(samples, 0.0);
  for (const Tone& tone : tones)
    for (std::size_t t = 0; t < samples; ++t)
      out[t] += std::sin(tone.omega * static_cast<double>(t) + tone.phase);
  const double level = rms(out);
  if (level > 0.0)
    for (double& v : out) v *= target_rms / level;
  return out;
}

Vec3 normalized_or_x(const Vec3& v) {
  const double len = std::sqrt(dot(v, v));
  if (len < 1e-12) return {1.0, 0.0, 0.0};
  return {v.x / len, v.y / len, v.z / len};
}

}  // namespace

std::vector<std::pair<double, double>> class_bands(int class_id, int classes,
                                                   int band_count) {
  if (classes < 1 || classes > band_count)
    throw DataError("class count must be in [1, band count]");
  if (class_id < 0 || class_id >= classes)
    throw DataError("class id out of range");
  const double mel_lo = hz_to_mel(kBandLoHz);
  const double mel_hi = hz_to_mel(kBandHiHz);
  const int first = class_id * band_count / classes;
  const int last = (class_id + 1) * band_count / classes;  // exclusive
  std::vector<std::pair<double, double>> bands;
  for (int b = first; b < last; ++b) {
    const double lo = mel_to_hz(mel_lo + (mel_hi - mel_lo) * b / band_count);
    const double hi =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * (b + 1) / band_count);
    bands.emplace_back(lo, hi);
  }
  return bands;
}

double fractional_sample(std::span<const double> src, double pos) {
  const auto n = static_cast<std::ptrdiff_t>(src.size());
  const auto center = static_cast<std::ptrdiff_t>(std::ceil(pos));
  double acc = 0.0;
  for (std::ptrdiff_t i = center - kSincHalfWidth; i < center + kSincHalfWidth;
       ++i) {
    if (i < 0 || i >= n) continue;
    const double u = pos - static_cast<double>(i);
    double kernel;
    if (std::abs(u) < 1e-12) {
      kernel = 1.0;
    } else {
      const double pu = std::numbers::pi * u;
      // Hann-windowed sinc over |u| < kSincHalfWidth.
      kernel = std::sin(pu) / pu *
               (0.5 + 0.5 * std::cos(pu / kSincHalfWidth));
    }
    acc += src[i] * kernel;
  }
  return acc;
}

void apply_fractional_delay(std::span<const double> src, double delay_samples,
                            std::span<double> out) {
  // The delay is constant, so the interpolation kernel is too: compute its
  // taps once and run a plain FIR instead of re-evaluating the windowed
  // sinc at every output sample.
  const double pos0 = -delay_samples;  // read position for out[0]
  const auto center0 = static_cast<std::ptrdiff_t>(std::ceil(pos0));
  constexpr int kTaps = 2 * kSincHalfWidth;
  double taps[kTaps];
  for (int r = 0; r < kTaps; ++r) {
    const double u =
        pos0 - static_cast<double>(center0 - kSincHalfWidth + r);
    if (std::abs(u) < 1e-12) {
      taps[r] = 1.0;
    } else {
      const double pu = std::numbers::pi * u;
      taps[r] = std::sin(pu) / pu * (0.5 + 0.5 * std::cos(pu / kSincHalfWidth));
    }
  }
  const auto n = static_cast<std::ptrdiff_t>(src.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const std::ptrdiff_t base =
        center0 + static_cast<std::ptrdiff_t>(t) - kSincHalfWidth;
    double acc = 0.0;
    if (base >= 0 && base + kTaps <= n) {
      for (int r = 0; r < kTaps; ++r) acc += src[base + r] * taps[r];
    } else {
      for (int r = 0; r < kTaps; ++r) {
        const std::ptrdiff_t i = base + r;
        if (i >= 0 && i < n) acc += src[i] * taps[r];
      }
    }
    out[t] = acc;
  }
}

std::vector<Vec3> fibonacci_sphere(int count) {
  if (count < 1) throw DataError("direction count must be positive");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> dirs(count);
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs[i] = {r * std::cos(phi), r * std::sin(phi), z};
  }
  return dirs;
}

SceneComponents synthesize_scene(const SyntheticScene& scene,
                                 const ArrayGeometry& geometry,
                                 int sample_rate_hz) {
  if (!(scene.duration_s > 0.0)) throw DataError("scene duration must be positive");
  if (std::isnan(scene.snr_db)) throw DataError("scene SNR must not be NaN");
  if (sample_rate_hz <= 0) throw DataError("sample rate must be positive");
  const auto samples =
      static_cast<std::size_t>(std::llround(scene.duration_s * sample_rate_hz));
  if (samples == 0) throw DataError("scene duration must be positive");
  const int mics = geometry.mics();
  if (mics < 1) throw DataError("geometry needs at least one mic");

  SceneComponents out;
  out.sample_rate_hz = sample_rate_hz;
  auto zeros = [&] {
    return std::vector<std::vector<double>>(mics,
                                            std::vector<double>(samples, 0.0));
  };
  out.target = zeros();
  out.noise = zeros();
  out.playback = zeros();
  out.mixture = zeros();

  // Target: class band noise arriving as a far-field plane wave.
  {
    std::mt19937_64 rng(mix_seed(scene.seed, 1));
    const std::vector<double> mono =
        band_noise(class_bands(scene.class_id, scene.num_classes), samples,
                   sample_rate_hz, kTargetRms, rng);
#pragma omp parallel for schedule(static)
    for (int m = 0; m < mics; ++m) {
      const double delay =
          plane_wave_delay(geometry, scene.target_direction, m) * sample_rate_hz;
      apply_fractional_delay(mono, delay, out.target[m]);
    }
  }

  // Diffuse noise: independent plane waves from isotropic directions,
  // then one exact scale to land on the requested SNR.
  if (std::isfinite(scene.snr_db)) {
    const std::vector<Vec3> dirs = fibonacci_sphere(scene.diffuse_directions);
    std::vector<double> mono(samples);
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      std::mt19937_64 rng(mix_seed(scene.seed, 0x1000 + d));
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (double& v : mono) v = gauss(rng);
      const LookDirection look(std::atan2(dirs[d].y, dirs[d].x),
                               std::asin(std::clamp(dirs[d].z, -1.0, 1.0)));
#pragma omp parallel for schedule(static)
      for (int m = 0; m < mics; ++m) {
        const double delay = plane_wave_delay(geometry, look, m) * sample_rate_hz;
        std::vector<double> delayed(samples);
        apply_fractional_delay(mono, delay, delayed);
        for (std::size_t t = 0; t < samples; ++t) out.noise[m][t] += delayed[t];
      }
    }
    const double p_target = total_power(out.target);
    const double p_noise = total_power(out.noise);
    if (p_target <= 0.0)
      throw DataError("unsatisfiable SNR: the target is silent");
    if (p_noise <= 0.0)
      throw DataError("unsatisfiable SNR: no diffuse noise was rendered");
    const double scale =
        std::sqrt(p_target / (p_noise * std::pow(10.0, scene.snr_db / 10.0)));
    for (auto& ch : out.noise)
      for (double& v : ch) v *= scale;
  }

  // Playback echo: another class's band noise from a point just outside
  // mic 0, with spherical-spreading gains and exact near-field delays.
  if (scene.playback) {
    std::mt19937_64 rng(mix_seed(scene.seed, 2));
    const std::vector<double> src = band_noise(
        class_bands(scene.playback->interferer_class, scene.num_classes),
        samples, sample_rate_hz, kTargetRms, rng);
    const Vec3 mic0 = geometry.mic_positions[0];
    const Vec3 centroid = geometry.centroid();
    const Vec3 outward = normalized_or_x(
        {mic0.x - centroid.x, mic0.y - centroid.y, mic0.z - centroid.z});
    const Vec3 source{mic0.x + kPlaybackDistanceM * outward.x,
                      mic0.y + kPlaybackDistanceM * outward.y,
                      mic0.z + kPlaybackDistanceM * outward.z};
#pragma omp parallel for schedule(static)
    for (int m = 0; m < mics; ++m) {
      const Vec3 p = geometry.mic_positions[m];
      const Vec3 diff{p.x - source.x, p.y - source.y, p.z - source.z};
      const double dist = std::sqrt(dot(diff, diff));
      const double gain = kPlaybackDistanceM / std::max(dist, 1e-6);
      const double delay = dist / geometry.speed_of_sound * sample_rate_hz;
      apply_fractional_delay(src, delay, out.playback[m]);
      for (double& v : out.playback[m]) v *= gain;
    }
    const double ref = rms(out.target[0]);
    const double got = rms(out.playback[0]);
    const double want =
        (ref > 0.0 ? ref : kTargetRms) *
        std::pow(10.0, scene.playback->level_db / 20.0);
    if (got > 0.0) {
      const double scale = want / got;
      for (auto& ch : out.playback)
        for (double& v : ch) v *= scale;
    }
  }

  for (int m = 0; m < mics; ++m) {
    for (std::size_t t = 0; t < samples; ++t) {
      const double v =
          out.target[m][t] + out.noise[m][t] + out.playback[m][t];
      const double c = std::clamp(v, -1.0, 1.0);
      if (c != v) ++out.clipped_samples;
      out.mixture[m][t] = c;
    }
  }
  return out;
}

double oracle_snr(const std::vector<std::vector<double>>& target,
                  const std::vector<std::vector<double>>& noise) {
  if (target.size() != noise.size())
    throw DataError("component channel count mismatch");
  for (std::size_t m = 0; m < target.size(); ++m)
    if (target[m].size() != noise[m].size())
      throw DataError("component length mismatch");
  const double pt = total_power(target);
  const double pn = total_power(noise);
  if (pn <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(pt / pn);
}

int snr_bucket(double snr_db) {
  if (snr_db <= 5.0) return 0;
  if (snr_db <= 15.0) return 1;
  return 2;
}

std::string snr_bucket_label(int bucket) {
  switch (bucket) {
    case 0: return "<=5dB";
    case 1: return "(5,15]dB";
    case 2: return ">15dB";
  }
  throw DataError("unknown SNR bucket");
}

void CorpusSpec::validate() const {
  if (classes < 1 || classes > 24)
    throw DataError("classes must be in [1, 24]");
  if (train_count < 0 || dev_count < 0 || test_count < 0)
    throw DataError("utterance counts must be non-negative");
  if (playback_fraction < 0.0 || playback_fraction > 1.0)
    throw DataError("playback fraction must be in [0, 1]");
  if (train_count + dev_count + test_count > 0 && !(duration_s > 0.0))
    throw DataError("duration must be positive");
  if (!(snr_min_db <= snr_max_db)) throw DataError("SNR range is inverted");
  if (sample_rate_hz <= 0) throw DataError("sample rate must be positive");
}

CorpusSpec parse_corpus_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad corpus spec: ") + e.what());
  }
  CorpusSpec spec;
  try {
    spec.classes = j.value("classes", spec.classes);
    spec.train_count = j.value("train_count", spec.train_count);
    spec.dev_count = j.value("dev_count", spec.dev_count);
    spec.test_count = j.value("test_count", spec.test_count);
    spec.snr_min_db = j.value("snr_min_db", spec.snr_min_db);
    spec.snr_max_db = j.value("snr_max_db", spec.snr_max_db);
    spec.playback_fraction = j.value("playback_fraction", spec.playback_fraction);
    spec.duration_s = j.value("duration_s", spec.duration_s);
    spec.sample_rate_hz = j.value("sample_rate_hz", spec.sample_rate_hz);
    spec.seed = j.value("seed", spec.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad corpus spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string corpus_spec_to_json(const CorpusSpec& spec) {
  nlohmann::json j;
  j["classes"] = spec.classes;
  j["train_count"] = spec.train_count;
  j["dev_count"] = spec.dev_count;
  j["test_count"] = spec.test_count;
  j["snr_min_db"] = spec.snr_min_db;
  j["snr_max_db"] = spec.snr_max_db;
  j["playback_fraction"] = spec.playback_fraction;
  j["duration_s"] = spec.duration_s;
  j["sample_rate_hz"] = spec.sample_rate_hz;
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

CorpusSpec default_corpus_spec() {
  CorpusSpec spec;
  spec.train_count = 600;
  spec.dev_count = 150;
  spec.test_count = 150;
  return spec;
}

BuildResult build_corpus(const CorpusSpec& spec, const ArrayGeometry& geometry,
                         const std::string& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);

  struct Job {
    SyntheticScene scene;
    std::string name;
  };
  std::vector<Job> jobs;
  CorpusManifest manifest;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::pair<const char*, int> splits[] = {{"train", spec.train_count},
                                                {"dev", spec.dev_count},
                                                {"test", spec.test_count}};
  std::size_t global = 0;
  for (const auto& [split, count] : splits) {
    // Exact playback count per split, assigned by a seeded shuffle.
    const auto playback_count =
        static_cast<int>(std::llround(spec.playback_fraction * count));
    std::vector<char> playback_flag(count, 0);
    std::fill(playback_flag.begin(), playback_flag.begin() + playback_count, 1);
    for (int i = count - 1; i > 0; --i) {
      const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(playback_flag[i], playback_flag[j]);
    }

    for (int i = 0; i < count; ++i, ++global) {
      SyntheticScene scene;
      scene.class_id = i % spec.classes;
      scene.num_classes = spec.classes;
      scene.target_direction =
          LookDirection(2.0 * std::numbers::pi * unit(rng));
      scene.snr_db =
          spec.snr_min_db + (spec.snr_max_db - spec.snr_min_db) * unit(rng);
      scene.duration_s = spec.duration_s;
      scene.seed = splitmix64(spec.seed ^ splitmix64(0xC0FFEE + global));
      if (playback_flag[i]) {
        PlaybackSpec pb;
        pb.interferer_class =
            spec.classes > 1
                ? static_cast<int>(
                      (scene.class_id + 1 +
                       rng() % static_cast<std::uint64_t>(spec.classes - 1)) %
                      spec.classes)
                : 0;
        pb.level_db = -5.0 + 15.0 * unit(rng);
        scene.playback = pb;
      }
      char name[64];
      std::snprintf(name, sizeof(name), "utt_%s_%05d.wav", split, i);
      jobs.push_back({scene, name});

      ManifestEntry entry;
      entry.path = name;
      entry.class_id = scene.class_id;
      entry.snr_db = scene.snr_db;
      entry.playback = scene.playback.has_value();
      entry.split = split;
      manifest.push_back(entry);
    }
  }

  std::int64_t clipped = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : clipped)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size());
       ++i) {
    const SceneComponents comps =
        synthesize_scene(jobs[i].scene, geometry, spec.sample_rate_hz);
    WavData wav;
    wav.sample_rate = spec.sample_rate_hz;
    wav.channels = comps.mixture;
    write_wav((std::filesystem::path(out_dir) / jobs[i].name).string(), wav);
    clipped += comps.clipped_samples;
  }

  write_manifest((std::filesystem::path(out_dir) / "manifest.tsv").string(),
                 manifest);
  return {std::move(manifest), clipped};
}

void write_manifest(const std::string& path, const CorpusManifest& manifest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write manifest: " + path);
  for (const ManifestEntry& e : manifest) {
    char line[512];
    std::snprintf(line, sizeof(line), "%s\t%d\t%.6f\t%d\t%s\n", e.path.c_str(),
                  e.class_id, e.snr_db, e.playback ? 1 : 0, e.split.c_str());
    os << line;
  }
  if (!os) throw DataError("short write: " + path);
}

CorpusManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest: " + path);
  CorpusManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5)
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": expected 5 tab-separated fields");
    ManifestEntry e;
    e.path = fields[0];
    try {
      e.class_id = std::stoi(fields[1]);
      e.snr_db = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": bad numeric field");
    }
    if (fields[3] != "0" && fields[3] != "1")
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": playback flag must be 0 or 1");
    e.playback = fields[3] == "1";
    e.split = fields[4];
    if (e.split != "train" && e.split != "dev" && e.split != "test")
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": unknown split");
    manifest.push_back(e);
  }
  // Paths must be unique (splits stay disjoint as a consequence).
  std::vector<std::string> paths;
  for (const auto& e : manifest) paths.push_back(e.path);
  std::sort(paths.begin(), paths.end());
  if (std::adjacent_find(paths.begin(), paths.end()) != paths.end())
    throw DataError("manifest contains duplicate paths");
  return manifest;
}

}  // namespace fan
