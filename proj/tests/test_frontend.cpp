#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "fan/error.hpp"
#include "fan/feature_io.hpp"
#include "fan/frame.hpp"
#include "fan/gmvn.hpp"
#include "fan/ref.hpp"
#include "fan/wav.hpp"

using fan::cplx;

namespace {

std::vector<double> random_pcm(std::size_t n, std::uint64_t seed,
                               double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  std::vector<double> x(n);
  for (double& v : x) v = dist(rng);
  return x;
}

fan::MultiChannelSpectrum random_frame(int channels, int bins,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  fan::MultiChannelSpectrum f;
  f.channels = channels;
  f.bins = bins;
  f.data.resize(static_cast<std::size_t>(channels) * bins);
  for (cplx& z : f.data) z = cplx(dist(rng), dist(rng));
  return f;
}

}  // namespace

TEST_CASE("default config dimensions") {
  fan::FrameConfig cfg;
  CHECK(cfg.bins() == 127);
  CHECK(cfg.bin_omega(0) == doctest::Approx(2.0 * std::numbers::pi * 62.5));
  cfg.validate();
  cfg.fft_size = 300;
  CHECK_THROWS_AS(cfg.validate(), fan::DataError);
  cfg.fft_size = 128;  // window 200 > fft 128
  CHECK_THROWS_AS(cfg.validate(), fan::DataError);
}

TEST_CASE("fft matches the direct fourier sum") {
  const fan::Fft fft(256);
  std::vector<double> x = random_pcm(256, 11);
  std::vector<cplx> buf(x.begin(), x.end());
  fft.forward(buf);
  const std::vector<cplx> direct = fan::ref::dft_direct(x);
  for (int k = 0; k < 256; ++k)
    CHECK(std::abs(buf[k] - direct[k]) < 1e-9);
}

TEST_CASE("rectangular frame satisfies parseval via the direct sum") {
  const std::vector<double> x = random_pcm(256, 12);
  double time_energy = 0.0;
  for (double v : x) time_energy += v * v;
  double spec_energy = 0.0;
  for (const cplx& z : fan::ref::dft_direct(x)) spec_energy += std::norm(z);
  CHECK(time_energy == doctest::Approx(spec_energy / 256.0).epsilon(1e-9));
}

TEST_CASE("tone at a bin center concentrates there") {
  // With window length equal to the transform size, the periodic Hann
  // window nulls land exactly on the grid, so an integer-bin tone
  // occupies precisely three bins. Zero-padding (the default 200 -> 256)
  // widens the main lobe past +-1 bin, checked separately below.
  fan::FrameConfig cfg;
  cfg.window_len_samples = 256;
  // Bin index 7 after DC removal is DFT bin 8: 8 * 16000 / 256 = 500 Hz.
  const double freq = 8.0 * cfg.sample_rate_hz / cfg.fft_size;
  std::vector<std::vector<double>> pcm(1, std::vector<double>(16000));
  for (std::size_t t = 0; t < pcm[0].size(); ++t)
    pcm[0][t] = 0.4 * std::sin(2.0 * std::numbers::pi * freq * t /
                               cfg.sample_rate_hz);
  const auto frames = fan::frame_and_transform(pcm, cfg);
  REQUIRE(!frames.empty());
  for (const fan::MultiChannelSpectrum& f : frames) {
    double total = 0.0, near = 0.0;
    for (int k = 0; k < f.bins; ++k) {
      const double e = std::norm(f.at(0, k));
      total += e;
      if (std::abs(k - 7) <= 1) near += e;
    }
    CHECK(near >= 0.99 * total);
  }

  const auto padded =
      fan::frame_and_transform(pcm, fan::FrameConfig{});
  double total = 0.0, near = 0.0;
  for (int k = 0; k < padded[0].bins; ++k) {
    const double e = std::norm(padded[0].at(0, k));
    total += e;
    if (std::abs(k - 7) <= 2) near += e;
  }
  CHECK(near >= 0.99 * total);
}

TEST_CASE("zero input gives one zero frame") {
  fan::FrameConfig cfg;
  const auto frames = fan::frame_and_transform(
      {std::vector<double>(200, 0.0)}, cfg);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].channels == 1);
  CHECK(frames[0].bins == 127);
  for (const cplx& z : frames[0].data) CHECK(z == cplx(0.0, 0.0));
}

TEST_CASE("frame count follows the hop formula") {
  fan::FrameConfig cfg;
  const auto frames =
      fan::frame_and_transform({random_pcm(16000, 13)}, cfg);
  CHECK(frames.size() == 99);  // floor((16000 - 200) / 160) + 1
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(frames[i].frame_index == i);
    CHECK(frames[i].channels == 1);
    CHECK(frames[i].bins == 127);
  }
}

TEST_CASE("transform is linear") {
  fan::FrameConfig cfg;
  const std::vector<double> a = random_pcm(1000, 14);
  const std::vector<double> b = random_pcm(1000, 15);
  std::vector<double> sum(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) sum[i] = a[i] + b[i];
  const auto fa = fan::frame_and_transform({a}, cfg);
  const auto fb = fan::frame_and_transform({b}, cfg);
  const auto fs = fan::frame_and_transform({sum}, cfg);
  REQUIRE(fa.size() == fs.size());
  for (std::size_t f = 0; f < fs.size(); ++f)
    for (std::size_t i = 0; i < fs[f].data.size(); ++i)
      CHECK(std::abs(fs[f].data[i] - (fa[f].data[i] + fb[f].data[i])) < 1e-9);
}

TEST_CASE("ragged and short inputs") {
  fan::FrameConfig cfg;
  CHECK_THROWS_WITH_AS(
      fan::frame_and_transform({random_pcm(400, 1), random_pcm(300, 2)}, cfg),
      "ragged channels", fan::DataError);
  CHECK(fan::frame_and_transform({random_pcm(199, 3)}, cfg).empty());
}

TEST_CASE("gmvn two-point distribution") {
  fan::MultiChannelSpectrum plus = random_frame(1, 4, 20);
  fan::MultiChannelSpectrum minus = plus;
  for (cplx& z : plus.data) z = cplx(1.0, z.imag());
  for (cplx& z : minus.data) z = cplx(-1.0, z.imag());
  const fan::GmvnStats stats = fan::gmvn_fit({plus, minus});
  for (int k = 0; k < 4; ++k) {
    CHECK(stats.mean[stats.idx(0, k, 0)] == doctest::Approx(0.0));
    CHECK(stats.variance[stats.idx(0, k, 0)] == doctest::Approx(1.0));
  }
}

TEST_CASE("gmvn constant frames floor the variance") {
  const fan::MultiChannelSpectrum f = random_frame(2, 5, 21);
  const fan::GmvnStats stats = fan::gmvn_fit({f, f, f});
  for (std::size_t i = 0; i < stats.mean.size(); ++i) {
    const double expect = i % 2 == 0 ? f.data[i / 2].real() : f.data[i / 2].imag();
    CHECK(stats.mean[i] == doctest::Approx(expect));
    CHECK(stats.variance[i] == stats.variance_floor);
  }
}

TEST_CASE("gmvn matches a two-pass oracle") {
  std::vector<fan::MultiChannelSpectrum> frames;
  for (int i = 0; i < 50; ++i) frames.push_back(random_frame(2, 7, 100 + i));
  const fan::GmvnStats stats = fan::gmvn_fit(frames);
  CHECK(stats.frame_count == 50);
  for (int m = 0; m < 2; ++m) {
    for (int k = 0; k < 7; ++k) {
      for (int comp = 0; comp < 2; ++comp) {
        double mean = 0.0;
        for (const auto& f : frames) {
          const cplx z = f.at(m, k);
          mean += comp == 0 ? z.real() : z.imag();
        }
        mean /= frames.size();
        double var = 0.0;
        for (const auto& f : frames) {
          const cplx z = f.at(m, k);
          const double d = (comp == 0 ? z.real() : z.imag()) - mean;
          var += d * d;
        }
        var /= frames.size();
        const std::size_t i = stats.idx(m, k, comp);
        CHECK(stats.mean[i] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(stats.variance[i] == doctest::Approx(var).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gmvn needs two frames") {
  CHECK_THROWS_WITH_AS(fan::gmvn_fit({random_frame(1, 3, 5)}),
                       "insufficient statistics", fan::DataError);
}

TEST_CASE("partial accumulators merge to the full fit") {
  std::vector<fan::MultiChannelSpectrum> frames;
  for (int i = 0; i < 30; ++i) frames.push_back(random_frame(2, 6, 200 + i));
  fan::GmvnAccumulator left(2, 6), right(2, 6);
  for (int i = 0; i < 12; ++i) left.add(frames[i]);
  for (int i = 12; i < 30; ++i) right.add(frames[i]);
  left.merge(right);
  const fan::GmvnStats merged = left.finalize();
  const fan::GmvnStats full = fan::gmvn_fit(frames);
  for (std::size_t i = 0; i < full.mean.size(); ++i) {
    CHECK(merged.mean[i] == doctest::Approx(full.mean[i]).epsilon(1e-12));
    CHECK(merged.variance[i] ==
          doctest::Approx(full.variance[i]).epsilon(1e-12));
  }
}

TEST_CASE("gmvn apply on the mean and identity stats") {
  std::vector<fan::MultiChannelSpectrum> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(random_frame(1, 4, 300 + i));
  const fan::GmvnStats stats = fan::gmvn_fit(frames);

  fan::MultiChannelSpectrum mean_frame = frames[0];
  for (int k = 0; k < 4; ++k)
    mean_frame.at(0, k) =
        cplx(stats.mean[stats.idx(0, k, 0)], stats.mean[stats.idx(0, k, 1)]);
  const auto zeroed = fan::gmvn_apply(mean_frame, stats);
  for (const cplx& z : zeroed.data) CHECK(std::abs(z) < 1e-12);

  fan::GmvnStats identity = stats;
  std::fill(identity.mean.begin(), identity.mean.end(), 0.0);
  std::fill(identity.variance.begin(), identity.variance.end(), 1.0);
  const auto same = fan::gmvn_apply(frames[0], identity);
  for (std::size_t i = 0; i < same.data.size(); ++i)
    CHECK(same.data[i] == frames[0].data[i]);
}

TEST_CASE("normalized data has zero mean and unit variance") {
  std::vector<fan::MultiChannelSpectrum> frames;
  for (int i = 0; i < 40; ++i) frames.push_back(random_frame(2, 5, 400 + i));
  const fan::GmvnStats stats = fan::gmvn_fit(frames);
  std::vector<fan::MultiChannelSpectrum> normed;
  for (const auto& f : frames) normed.push_back(fan::gmvn_apply(f, stats));
  const fan::GmvnStats restats = fan::gmvn_fit(normed);
  for (std::size_t i = 0; i < restats.mean.size(); ++i) {
    CHECK(std::abs(restats.mean[i]) < 1e-10);
    if (stats.variance[i] > stats.variance_floor)
      CHECK(std::abs(restats.variance[i] - 1.0) < 1e-10);
  }
}

TEST_CASE("gmvn round-trips through unapply") {
  std::vector<fan::MultiChannelSpectrum> frames;
  for (int i = 0; i < 8; ++i) frames.push_back(random_frame(2, 9, 500 + i));
  const fan::GmvnStats stats = fan::gmvn_fit(frames);
  const auto back =
      fan::gmvn_unapply(fan::gmvn_apply(frames[3], stats), stats);
  for (std::size_t i = 0; i < back.data.size(); ++i)
    CHECK(std::abs(back.data[i] - frames[3].data[i]) <
          1e-12 * std::max(1.0, std::abs(frames[3].data[i])));
}

TEST_CASE("gmvn shape mismatch") {
  const fan::GmvnStats stats = fan::gmvn_fit(
      {random_frame(1, 4, 600), random_frame(1, 4, 601)});
  CHECK_THROWS_AS(fan::gmvn_apply(random_frame(2, 4, 602), stats),
                  fan::DataError);
}

TEST_CASE("lfr stacking drops the remainder") {
  auto make = [](int n) {
    std::vector<fan::MultiChannelSpectrum> frames;
    for (int i = 0; i < n; ++i) {
      frames.push_back(random_frame(1, 2, 700 + i));
      frames.back().frame_index = i;
    }
    return frames;
  };
  CHECK(fan::lfr_stack(make(9), 3).size() == 3);
  CHECK(fan::lfr_stack(make(10), 3).size() == 3);
  CHECK(fan::lfr_stack(make(2), 3).empty());

  // Concatenating the stacks reproduces a prefix of the input exactly.
  const auto frames = make(10);
  const auto stacks = fan::lfr_stack(frames, 3);
  std::size_t next = 0;
  for (const fan::LfrStack& s : stacks) {
    REQUIRE(s.frames.size() == 3);
    for (const auto& f : s.frames) {
      CHECK(f.frame_index == next);
      CHECK(f.data == frames[next].data);
      ++next;
    }
  }
  CHECK(next == 9);
}

TEST_CASE("wav files round-trip") {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "fan_test_roundtrip.wav";
  fan::WavData wav;
  wav.sample_rate = 16000;
  wav.channels = {random_pcm(500, 30, 0.9), random_pcm(500, 31, 0.9)};
  fan::write_wav(path.string(), wav);

  const fan::WavData back = fan::read_wav(path.string());
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.channels.size() == 2);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 500; ++i)
      CHECK(std::abs(back.channels[c][i] - wav.channels[c][i]) <= 0.5 / 32768);

  // Re-encoding already-quantized samples is lossless.
  const std::filesystem::path path2 =
      std::filesystem::temp_directory_path() / "fan_test_roundtrip2.wav";
  fan::write_wav(path2.string(), back);
  const fan::WavData again = fan::read_wav(path2.string());
  for (int c = 0; c < 2; ++c) CHECK(again.channels[c] == back.channels[c]);

  std::filesystem::remove(path);
  std::filesystem::remove(path2);
  CHECK_THROWS_AS(fan::read_wav(path.string()), fan::DataError);
}

TEST_CASE("feature files round-trip") {
  std::vector<fan::MultiChannelSpectrum> frames;
  for (int i = 0; i < 5; ++i) {
    frames.push_back(random_frame(2, 127, 800 + i));
    frames.back().frame_index = i;
  }
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "fan_test_features.fanf";
  fan::write_fanf(path.string(), frames);
  const auto back = fan::read_fanf(path.string());
  REQUIRE(back.size() == 5);
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(back[f].channels == 2);
    CHECK(back[f].bins == 127);
    CHECK(back[f].frame_index == f);
    for (std::size_t i = 0; i < frames[f].data.size(); ++i) {
      // Values pass through float32 storage.
      CHECK(back[f].data[i].real() ==
            static_cast<double>(static_cast<float>(frames[f].data[i].real())));
      CHECK(back[f].data[i].imag() ==
            static_cast<double>(static_cast<float>(frames[f].data[i].imag())));
    }
  }
  std::filesystem::remove(path);
}
