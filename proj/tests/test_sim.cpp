#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "fan/error.hpp"
#include "fan/fe.hpp"
#include "fan/frame.hpp"
#include "fan/sim.hpp"
#include "fan/wav.hpp"

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fan::ArrayGeometry mic_pair() {
  return fan::ArrayGeometry::default_circular().subset({0, 3});
}

}  // namespace

TEST_CASE("class bands tile the target range") {
  // One class owns everything: 24 contiguous bands over [150, 7500] Hz,
  // equally spaced in mel.
  const auto all = fan::class_bands(0, 1);
  REQUIRE(all.size() == 24);
  CHECK(std::abs(all.front().first - 150.0) < 1e-9);
  CHECK(std::abs(all.back().second - 7500.0) < 1e-9);
  const double mel_lo = fan::hz_to_mel(150.0);
  const double mel_hi = fan::hz_to_mel(7500.0);
  for (std::size_t b = 0; b < all.size(); ++b) {
    const double lo = fan::hz_to_mel(all[b].first);
    const double hi = fan::hz_to_mel(all[b].second);
    CHECK(std::abs(lo - (mel_lo + (mel_hi - mel_lo) * b / 24.0)) < 1e-9);
    CHECK(std::abs(hi - (mel_lo + (mel_hi - mel_lo) * (b + 1) / 24.0)) < 1e-9);
  }

  // 24 classes: one band each, in order.
  for (int c = 0; c < 24; ++c) {
    const auto bands = fan::class_bands(c, 24);
    REQUIRE(bands.size() == 1);
    CHECK(bands[0] == all[c]);
  }

  // Six classes: four bands each, adjacent classes sharing an edge.
  double prev_hi = 150.0;
  for (int c = 0; c < 6; ++c) {
    const auto bands = fan::class_bands(c, 6);
    REQUIRE(bands.size() == 4);
    CHECK(std::abs(bands.front().first - prev_hi) < 1e-9);
    for (std::size_t b = 1; b < bands.size(); ++b)
      CHECK(std::abs(bands[b].first - bands[b - 1].second) < 1e-9);
    prev_hi = bands.back().second;
  }
  CHECK(std::abs(prev_hi - 7500.0) < 1e-9);

  CHECK_THROWS_WITH_AS((void)fan::class_bands(0, 25),
                       "class count must be in [1, band count]",
                       fan::DataError);
  CHECK_THROWS_WITH_AS((void)fan::class_bands(0, 0),
                       "class count must be in [1, band count]",
                       fan::DataError);
  CHECK_THROWS_WITH_AS((void)fan::class_bands(6, 6), "class id out of range",
                       fan::DataError);
}

TEST_CASE("fractional delays") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0.0, 0.5);
  std::vector<double> src(400);
  for (double& v : src) v = dist(rng);

  // An integer delay is an exact shift: the windowed sinc collapses to a
  // unit impulse on the integer grid.
  std::vector<double> out(src.size());
  fan::apply_fractional_delay(src, 3.0, out);
  for (std::size_t t = 0; t < src.size(); ++t) {
    const double want = t >= 3 ? src[t - 3] : 0.0;
    CHECK(std::abs(out[t] - want) < 1e-12);
  }
  fan::apply_fractional_delay(src, -2.0, out);
  for (std::size_t t = 0; t + 2 < src.size(); ++t)
    CHECK(std::abs(out[t] - src[t + 2]) < 1e-12);

  // The buffered kernel path agrees with per-sample interpolation.
  for (double delay : {0.25, -1.7, 5.5, 13.37}) {
    fan::apply_fractional_delay(src, delay, out);
    for (std::size_t t = 0; t < src.size(); ++t)
      CHECK(std::abs(out[t] - fan::fractional_sample(
                                  src, static_cast<double>(t) - delay)) <
            1e-12);
  }

  // Half-sample delay of a band-limited tone matches the analytic shift.
  const double omega = 2.0 * std::numbers::pi * 1000.0 / 16000.0;
  std::vector<double> tone(1200);
  for (std::size_t t = 0; t < tone.size(); ++t)
    tone[t] = std::sin(omega * static_cast<double>(t));
  std::vector<double> delayed(tone.size());
  fan::apply_fractional_delay(tone, 0.5, delayed);
  for (std::size_t t = 40; t + 40 < tone.size(); ++t)
    CHECK(std::abs(delayed[t] -
                   std::sin(omega * (static_cast<double>(t) - 0.5))) < 1e-3);

  // Far outside the buffer everything is zero.
  CHECK(fan::fractional_sample(src, -100.0) == 0.0);
  CHECK(fan::fractional_sample(src, 1e6) == 0.0);
}

TEST_CASE("fibonacci sphere covers directions evenly") {
  const auto pts = fan::fibonacci_sphere(200);
  REQUIRE(pts.size() == 200);
  fan::Vec3 mean;
  for (const auto& p : pts) {
    CHECK(std::abs(fan::dot(p, p) - 1.0) < 1e-12);
    mean.x += p.x;
    mean.y += p.y;
    mean.z += p.z;
  }
  CHECK(std::sqrt(fan::dot(mean, mean)) / 200.0 < 0.05);

  // Points are distinct.
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const fan::Vec3 d{pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y,
                      pts[i].z - pts[i - 1].z};
    CHECK(fan::dot(d, d) > 1e-12);
  }
  CHECK_THROWS_WITH_AS((void)fan::fibonacci_sphere(0),
                       "direction count must be positive", fan::DataError);
}

TEST_CASE("scene synthesis geometry and levels") {
  const auto pair = mic_pair();

  // Noise-free scene arriving along the pair axis: channel 1 lags channel
  // 0 by the geometric delay, 0.072 m * 16 kHz / 343 m/s = 3.36 samples.
  fan::SyntheticScene scene;
  scene.class_id = 2;
  scene.snr_db = kInf;
  scene.target_direction = fan::LookDirection(0.0);
  scene.duration_s = 0.5;
  scene.seed = 9;
  const auto comps = fan::synthesize_scene(scene, pair, 16000);
  REQUIRE(comps.target.size() == 2);
  REQUIRE(comps.target[0].size() == 8000);
  for (const auto& ch : comps.noise)
    for (double v : ch) CHECK(v == 0.0);
  for (const auto& ch : comps.playback)
    for (double v : ch) CHECK(v == 0.0);

  int best_lag = 0;
  double best = -1e300;
  for (int lag = -8; lag <= 8; ++lag) {
    double acc = 0.0;
    for (int t = 100; t < 7900; ++t)
      acc += comps.mixture[0][t - lag] * comps.mixture[1][t];
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  CHECK(best_lag >= 3);
  CHECK(best_lag <= 4);

  // The rendered SNR is exact; halving it by hand shifts the oracle 3 dB.
  scene.snr_db = 0.0;
  const auto snr0 = fan::synthesize_scene(scene, pair, 16000);
  CHECK(std::abs(fan::oracle_snr(snr0.target, snr0.noise)) < 1e-9);
  scene.snr_db = 17.5;
  const auto snr17 = fan::synthesize_scene(scene, pair, 16000);
  CHECK(std::abs(fan::oracle_snr(snr17.target, snr17.noise) - 17.5) < 1e-9);

  // Mixture = target + noise + playback, exactly, when nothing clips.
  fan::SyntheticScene pb = scene;
  pb.snr_db = 10.0;
  pb.playback = fan::PlaybackSpec{4, 3.0};
  pb.seed = 10;
  const auto mixed = fan::synthesize_scene(pb, pair, 16000);
  CHECK(mixed.clipped_samples == 0);
  for (int m = 0; m < 2; ++m)
    for (std::size_t t = 0; t < mixed.mixture[m].size(); ++t)
      CHECK(mixed.mixture[m][t] == mixed.target[m][t] + mixed.noise[m][t] +
                                       mixed.playback[m][t]);

  // Playback sits 0.05 m outside mic 0: nearer, therefore louder there.
  auto rms = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
  };
  CHECK(rms(mixed.playback[0]) > rms(mixed.playback[1]));
  // Its level at mic 0 tracks the requested dB offset from the target.
  const double got_db =
      20.0 * std::log10(rms(mixed.playback[0]) / rms(mixed.target[0]));
  CHECK(std::abs(got_db - 3.0) < 1e-6);

  // Heavy noise must clip, and the mixture stays within [-1, 1].
  fan::SyntheticScene loud = scene;
  loud.snr_db = -40.0;
  const auto clipped = fan::synthesize_scene(loud, pair, 16000);
  CHECK(clipped.clipped_samples > 0);
  for (const auto& ch : clipped.mixture)
    for (double v : ch) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }

  fan::SyntheticScene bad = scene;
  bad.duration_s = 0.0;
  CHECK_THROWS_WITH_AS((void)fan::synthesize_scene(bad, pair, 16000),
                       "scene duration must be positive", fan::DataError);
  bad = scene;
  bad.snr_db = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS((void)fan::synthesize_scene(bad, pair, 16000),
                       "scene SNR must not be NaN", fan::DataError);
}

TEST_CASE("diffuse field coherence approaches the spherical model") {
  // Long scene, dense direction set: the empirical inter-channel
  // coherence of the noise field should track sin(x)/x, x = omega*d/c.
  const auto pair = mic_pair();
  fan::SyntheticScene scene;
  scene.snr_db = 0.0;
  scene.duration_s = 10.0;
  scene.diffuse_directions = 256;
  scene.seed = 5;
  const auto comps = fan::synthesize_scene(scene, pair, 16000);

  const fan::FrameConfig fc;
  const auto frames = fan::frame_and_transform(comps.noise, fc);
  REQUIRE(frames.size() > 900);

  std::vector<std::complex<double>> cross(fc.bins(), 0.0);
  std::vector<double> p0(fc.bins(), 0.0), p1(fc.bins(), 0.0);
  for (const auto& f : frames) {
    for (int k = 0; k < fc.bins(); ++k) {
      cross[k] += f.at(0, k) * std::conj(f.at(1, k));
      p0[k] += std::norm(f.at(0, k));
      p1[k] += std::norm(f.at(1, k));
    }
  }
  const double d = 0.072, c = pair.speed_of_sound;
  for (int k = 0; k < fc.bins(); ++k) {
    const double x = fc.bin_omega(k) * d / c;
    if (x >= std::numbers::pi) break;
    const std::complex<double> gamma = cross[k] / std::sqrt(p0[k] * p1[k]);
    const double want = std::sin(x) / x;
    CHECK(std::abs(gamma.real() - want) < 0.1);
    CHECK(std::abs(gamma.imag()) < 0.1);
  }
}

TEST_CASE("snr oracle and buckets") {
  const std::vector<std::vector<double>> sig{{3.0, 4.0}, {1.0, 2.0}};
  std::vector<std::vector<double>> same = sig;
  CHECK(fan::oracle_snr(sig, same) == 0.0);

  std::vector<std::vector<double>> tenth = sig;
  for (auto& ch : tenth)
    for (double& v : ch) v *= 0.1;
  CHECK(std::abs(fan::oracle_snr(sig, tenth) - 20.0) < 1e-12);
  CHECK(fan::snr_bucket(fan::oracle_snr(sig, tenth)) == 2);

  std::mt19937_64 rng(12);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<std::vector<double>> a(3, std::vector<double>(500));
  std::vector<std::vector<double>> b(3, std::vector<double>(500));
  double pa = 0.0, pb = 0.0;
  for (int m = 0; m < 3; ++m)
    for (int t = 0; t < 500; ++t) {
      a[m][t] = dist(rng);
      b[m][t] = 0.3 * dist(rng);
      pa += a[m][t] * a[m][t];
      pb += b[m][t] * b[m][t];
    }
  CHECK(std::abs(fan::oracle_snr(a, b) - 10.0 * std::log10(pa / pb)) < 1e-9);

  const std::vector<std::vector<double>> silent{{0.0, 0.0}, {0.0, 0.0}};
  CHECK(fan::oracle_snr(sig, silent) == kInf);
  CHECK_THROWS_WITH_AS((void)fan::oracle_snr(sig, {{1.0, 2.0}}),
                       "component channel count mismatch", fan::DataError);
  std::vector<std::vector<double>> ragged{{1.0, 2.0}, {1.0}};
  CHECK_THROWS_WITH_AS((void)fan::oracle_snr(sig, ragged),
                       "component length mismatch", fan::DataError);

  // Tertile boundaries: <= 5, (5, 15], > 15.
  CHECK(fan::snr_bucket(-kInf) == 0);
  CHECK(fan::snr_bucket(5.0) == 0);
  CHECK(fan::snr_bucket(5.0001) == 1);
  CHECK(fan::snr_bucket(15.0) == 1);
  CHECK(fan::snr_bucket(15.0001) == 2);
  CHECK(fan::snr_bucket(kInf) == 2);
  CHECK(fan::snr_bucket_label(0) == "<=5dB");
  CHECK(fan::snr_bucket_label(1) == "(5,15]dB");
  CHECK(fan::snr_bucket_label(2) == ">15dB");
  CHECK_THROWS_WITH_AS((void)fan::snr_bucket_label(3), "unknown SNR bucket",
                       fan::DataError);
  for (double snr = -30.0; snr <= 40.0; snr += 0.37) {
    const int b = fan::snr_bucket(snr);
    CHECK(b >= 0);
    CHECK(b <= 2);
  }
}

TEST_CASE("corpus spec json") {
  const auto defaults = fan::parse_corpus_spec("{}");
  CHECK(defaults.classes == 6);
  CHECK(defaults.train_count == 0);
  CHECK(defaults.snr_min_db == -5.0);
  CHECK(defaults.snr_max_db == 25.0);
  CHECK(defaults.playback_fraction == 0.3);
  CHECK(defaults.duration_s == 0.5);
  CHECK(defaults.sample_rate_hz == 16000);
  CHECK(defaults.seed == 1);

  const auto desk = fan::default_corpus_spec();
  CHECK(desk.train_count == 600);
  CHECK(desk.dev_count == 150);
  CHECK(desk.test_count == 150);

  // to_json -> parse is the identity.
  const auto round = fan::parse_corpus_spec(fan::corpus_spec_to_json(desk));
  CHECK(round.classes == desk.classes);
  CHECK(round.train_count == desk.train_count);
  CHECK(round.dev_count == desk.dev_count);
  CHECK(round.test_count == desk.test_count);
  CHECK(round.snr_min_db == desk.snr_min_db);
  CHECK(round.snr_max_db == desk.snr_max_db);
  CHECK(round.playback_fraction == desk.playback_fraction);
  CHECK(round.seed == desk.seed);

  CHECK_THROWS_AS((void)fan::parse_corpus_spec("not json"), fan::DataError);
  CHECK_THROWS_WITH_AS((void)fan::parse_corpus_spec(R"({"classes": 0})"),
                       "classes must be in [1, 24]", fan::DataError);
  CHECK_THROWS_WITH_AS(
      (void)fan::parse_corpus_spec(R"({"playback_fraction": 1.5})"),
      "playback fraction must be in [0, 1]", fan::DataError);
  CHECK_THROWS_WITH_AS(
      (void)fan::parse_corpus_spec(R"({"snr_min_db": 10, "snr_max_db": 0})"),
      "SNR range is inverted", fan::DataError);
  CHECK_THROWS_WITH_AS(
      (void)fan::parse_corpus_spec(R"({"duration_s": 0, "train_count": 1})"),
      "duration must be positive", fan::DataError);
  CHECK_THROWS_WITH_AS((void)fan::parse_corpus_spec(R"({"train_count": -1})"),
                       "utterance counts must be non-negative",
                       fan::DataError);
}

TEST_CASE("corpus builds are deterministic and exactly flagged") {
  const auto pair = mic_pair();
  const auto base = std::filesystem::temp_directory_path() / "fan_sim_corpus";
  std::filesystem::remove_all(base);

  fan::CorpusSpec spec;
  spec.classes = 6;
  spec.train_count = 20;
  spec.dev_count = 5;
  spec.test_count = 5;
  spec.playback_fraction = 0.1;
  spec.duration_s = 0.25;
  spec.seed = 77;

  const auto r1 = fan::build_corpus(spec, pair, (base / "a").string());
  REQUIRE(r1.manifest.size() == 30);

  int train = 0, dev = 0, test = 0, train_playback = 0;
  for (const auto& e : r1.manifest) {
    if (e.split == "train") {
      ++train;
      train_playback += e.playback ? 1 : 0;
    } else if (e.split == "dev") {
      ++dev;
    } else {
      ++test;
    }
    CHECK(e.class_id >= 0);
    CHECK(e.class_id < 6);
    CHECK(e.snr_db >= spec.snr_min_db);
    CHECK(e.snr_db <= spec.snr_max_db);
    CHECK(std::filesystem::exists(base / "a" / e.path));
  }
  CHECK(train == 20);
  CHECK(dev == 5);
  CHECK(test == 5);
  CHECK(train_playback == 2);  // round(0.1 * 20), exactly

  // Round-robin class assignment within each split.
  for (int i = 0; i < 20; ++i) CHECK(r1.manifest[i].class_id == i % 6);

  // The WAVs hold the advertised channel count and length.
  const auto wav = fan::read_wav((base / "a" / r1.manifest[0].path).string());
  CHECK(wav.sample_rate == 16000);
  REQUIRE(wav.channels.size() == 2);
  CHECK(wav.channels[0].size() == 4000);

  // Manifest file round-trips: parsed equals returned (snr to 1e-6).
  const auto parsed = fan::read_manifest((base / "a" / "manifest.tsv").string());
  REQUIRE(parsed.size() == r1.manifest.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].path == r1.manifest[i].path);
    CHECK(parsed[i].class_id == r1.manifest[i].class_id);
    CHECK(std::abs(parsed[i].snr_db - r1.manifest[i].snr_db) < 1e-6);
    CHECK(parsed[i].playback == r1.manifest[i].playback);
    CHECK(parsed[i].split == r1.manifest[i].split);
  }

  // Same seed, same bytes — every file.
  const auto r2 = fan::build_corpus(spec, pair, (base / "b").string());
  CHECK(slurp(base / "a" / "manifest.tsv") == slurp(base / "b" / "manifest.tsv"));
  for (const auto& e : r1.manifest)
    CHECK(slurp(base / "a" / e.path) == slurp(base / "b" / e.path));
  CHECK(r1.clipped_samples == r2.clipped_samples);

  // A different seed changes the audio.
  fan::CorpusSpec reseeded = spec;
  reseeded.seed = 78;
  const auto r3 = fan::build_corpus(reseeded, pair, (base / "c").string());
  CHECK(slurp(base / "a" / r1.manifest[0].path) !=
        slurp(base / "c" / r3.manifest[0].path));

  // Zero utterances is a valid, empty corpus.
  fan::CorpusSpec empty;
  const auto r0 = fan::build_corpus(empty, pair, (base / "d").string());
  CHECK(r0.manifest.empty());
  CHECK(fan::read_manifest((base / "d" / "manifest.tsv").string()).empty());

  std::filesystem::remove_all(base);
}

TEST_CASE("manifest parsing rejects malformed rows") {
  const auto dir = std::filesystem::temp_directory_path() / "fan_manifest";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "m.tsv").string();
  auto write = [&](const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
  };

  write("a.wav\t0\t5.0\t0\ttrain\nb.wav\t1\t-2.5\t1\tdev\n");
  const auto ok = fan::read_manifest(path);
  REQUIRE(ok.size() == 2);
  CHECK(ok[1].playback);
  CHECK(ok[1].split == "dev");

  write("a.wav\t0\t5.0\ttrain\n");  // four fields
  CHECK_THROWS_WITH_AS((void)fan::read_manifest(path),
                       "manifest line 1: expected 5 tab-separated fields",
                       fan::DataError);
  write("a.wav\tzero\t5.0\t0\ttrain\n");
  CHECK_THROWS_WITH_AS((void)fan::read_manifest(path),
                       "manifest line 1: bad numeric field", fan::DataError);
  write("a.wav\t0\t5.0\t2\ttrain\n");
  CHECK_THROWS_WITH_AS((void)fan::read_manifest(path),
                       "manifest line 1: playback flag must be 0 or 1",
                       fan::DataError);
  write("a.wav\t0\t5.0\t0\tvalidation\n");
  CHECK_THROWS_WITH_AS((void)fan::read_manifest(path),
                       "manifest line 1: unknown split", fan::DataError);
  write("a.wav\t0\t5.0\t0\ttrain\na.wav\t1\t1.0\t0\tdev\n");
  CHECK_THROWS_WITH_AS((void)fan::read_manifest(path),
                       "manifest contains duplicate paths", fan::DataError);
  CHECK_THROWS_AS((void)fan::read_manifest((dir / "absent.tsv").string()),
                  fan::DataError);
  std::filesystem::remove_all(dir);
}
