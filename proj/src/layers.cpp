#include "fan/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fan/error.hpp"

namespace fan {

std::vector<double> power_op(std::span<const cplx> z) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::norm(z[i]);
  return out;
}

std::vector<double> power_op_pairs(std::span<const double> interleaved) {
  if (interleaved.size() % 2 != 0)
    throw DataError("paired view needs an even number of values");
  std::vector<double> out(interleaved.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double re = interleaved[2 * i];
    const double im = interleaved[2 * i + 1];
    out[i] = re * re + im * im;
  }
  return out;
}

std::vector<cplx> bat_forward(const MultiChannelSpectrum& x, const BatLayer& layer) {
  if (x.channels != layer.channels || x.bins != layer.bins)
    throw DataError("bat shape mismatch");
  const int d_count = layer.directions;
  const int k_count = layer.bins;
  const int m_count = layer.channels;
  std::vector<cplx> out(static_cast<std::size_t>(d_count) * k_count);
  for (int d = 0; d < d_count; ++d) {
    for (int k = 0; k < k_count; ++k) {
      cplx acc = layer.biases[layer.bidx(d, k)];
      const cplx* w = layer.weights.data() + layer.widx(d, k, 0);
      for (int m = 0; m < m_count; ++m) acc += std::conj(w[m]) * x.at(m, k);
      out[layer.bidx(d, k)] = acc;
    }
  }
  return out;
}

std::vector<double> fan_forward(std::span<const double> y, int bins,
                                const FanLayer& layer, std::vector<int>* argmax) {
  const int d_count = layer.directions;
  const int n_count = layer.filters;
  if (y.size() != static_cast<std::size_t>(d_count) * bins)
    throw DataError("fan shape mismatch");
  std::vector<double> z(bins);
  if (argmax) argmax->assign(bins, 0);
  for (int k = 0; k < bins; ++k) {
    double avg = 0.0;
    double best = -std::numeric_limits<double>::infinity();
    int best_n = 0;
    for (int n = 0; n < n_count; ++n) {
      const double* w = layer.weights.data() + static_cast<std::size_t>(n) * d_count;
      double a = layer.biases[n];
      for (int d = 0; d < d_count; ++d)
        a += w[d] * y[static_cast<std::size_t>(d) * bins + k];
      if (layer.pooling == Pooling::kAverage) {
        avg += a;
      } else if (a > best) {
        best = a;
        best_n = n;
      }
    }
    if (layer.pooling == Pooling::kAverage) {
      z[k] = avg / n_count;
    } else {
      z[k] = best;
      if (argmax) (*argmax)[k] = best_n;
    }
  }
  return z;
}

std::vector<double> affine_forward(std::span<const double> x,
                                   const AffineLayer& layer) {
  if (x.size() != static_cast<std::size_t>(layer.in))
    throw DataError("affine shape mismatch");
  std::vector<double> y(layer.out);
  for (int o = 0; o < layer.out; ++o) {
    const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
    double acc = layer.biases[o];
    for (int i = 0; i < layer.in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
  return y;
}

McTag parse_mc_tag(const std::string& name) {
  if (name == "raw1ch") return McTag::kRaw1ch;
  if (name == "raw2ch") return McTag::kRaw2ch;
  if (name == "fan-max") return McTag::kFanMax;
  if (name == "bat-at") return McTag::kBatAt;
  if (name == "bat-fan-max") return McTag::kBatFanMax;
  if (name == "bat-fan-avg") return McTag::kBatFanAvg;
  throw DataError("unknown variant tag: " + name);
}

std::string to_string(McTag tag) {
  switch (tag) {
    case McTag::kRaw1ch: return "raw1ch";
    case McTag::kRaw2ch: return "raw2ch";
    case McTag::kFanMax: return "fan-max";
    case McTag::kBatAt: return "bat-at";
    case McTag::kBatFanMax: return "bat-fan-max";
    case McTag::kBatFanAvg: return "bat-fan-avg";
  }
  throw DataError("unknown variant tag");
}

namespace {

void random_fill(std::span<double> values, double fan_in, std::mt19937_64& rng) {
  const double a = std::sqrt(1.0 / fan_in);
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& v : values) v = dist(rng);
}

BatLayer make_bat(const McConfig& cfg, const SuperdirectiveWeights* init,
                  std::mt19937_64& rng) {
  BatLayer bat;
  bat.channels = cfg.channels;
  bat.directions = cfg.directions;
  bat.bins = cfg.bins;
  bat.weights.resize(static_cast<std::size_t>(cfg.directions) * cfg.bins *
                     cfg.channels);
  bat.biases.assign(static_cast<std::size_t>(cfg.directions) * cfg.bins, 0.0);
  if (init) {
    if (init->mics != cfg.channels || init->directions != cfg.directions ||
        init->bins != cfg.bins)
      throw DataError("superdirective init shape mismatch");
    std::copy(init->w.begin(), init->w.end(), bat.weights.begin());
  } else {
    random_fill({reinterpret_cast<double*>(bat.weights.data()),
                 bat.weights.size() * 2},
                2.0 * cfg.channels, rng);
  }
  return bat;
}

FanLayer make_fan(int directions, int filters, Pooling pooling,
                  std::mt19937_64& rng) {
  FanLayer fan;
  fan.directions = directions;
  fan.filters = filters;
  fan.pooling = pooling;
  fan.weights.resize(static_cast<std::size_t>(filters) * directions);
  fan.biases.resize(filters);
  random_fill(fan.weights, directions, rng);
  random_fill(fan.biases, directions, rng);
  return fan;
}

}  // namespace

AffineLayer make_affine(int in, int out, std::mt19937_64& rng) {
  AffineLayer aff;
  aff.in = in;
  aff.out = out;
  aff.weights.resize(static_cast<std::size_t>(out) * in);
  aff.biases.resize(out);
  random_fill(aff.weights, in, rng);
  random_fill(aff.biases, in, rng);
  return aff;
}

McVariant assemble_variant(McTag tag, const McConfig& cfg,
                           const SuperdirectiveWeights* init) {
  McVariant v;
  v.tag = tag;
  v.cfg = cfg;
  std::mt19937_64 rng(cfg.seed);
  const int k = cfg.bins;
  switch (tag) {
    case McTag::kRaw1ch:
      v.affine = make_affine(k, k, rng);
      break;
    case McTag::kRaw2ch:
      v.affine = make_affine(2 * k, k, rng);
      break;
    case McTag::kFanMax:
      // 2-channel powers stand in for the look directions, D = 2.
      v.fan = make_fan(2, cfg.filters, Pooling::kMax, rng);
      break;
    case McTag::kBatAt:
      v.bat = make_bat(cfg, init, rng);
      v.affine = make_affine(cfg.directions * k, k, rng);
      break;
    case McTag::kBatFanMax:
      v.bat = make_bat(cfg, init, rng);
      v.fan = make_fan(cfg.directions, cfg.filters, Pooling::kMax, rng);
      break;
    case McTag::kBatFanAvg:
      v.bat = make_bat(cfg, init, rng);
      v.fan = make_fan(cfg.directions, cfg.filters, Pooling::kAverage, rng);
      break;
  }
  return v;
}

std::vector<double> mc_forward(const McVariant& v, const MultiChannelSpectrum& x,
                               McCache* cache) {
  if (x.bins != v.cfg.bins) throw DataError("variant/frame bin mismatch");
  McCache local;
  McCache& c = cache ? *cache : local;
  const int k = v.cfg.bins;

  switch (v.tag) {
    case McTag::kRaw1ch: {
      c.power = power_op({x.data.data(), static_cast<std::size_t>(k)});
      c.affine_in = c.power;
      return affine_forward(c.affine_in, *v.affine);
    }
    case McTag::kRaw2ch: {
      if (x.channels < 2) throw DataError("raw2ch needs 2 channels");
      c.power = power_op({x.data.data(), static_cast<std::size_t>(2) * k});
      c.affine_in = c.power;
      return affine_forward(c.affine_in, *v.affine);
    }
    case McTag::kFanMax: {
      if (x.channels < 2) throw DataError("fan-max needs 2 channels");
      c.power = power_op({x.data.data(), static_cast<std::size_t>(2) * k});
      return fan_forward(c.power, k, *v.fan, &c.fan_argmax);
    }
    case McTag::kBatAt: {
      c.bat_out = bat_forward(x, *v.bat);
      c.power = power_op(c.bat_out);
      const int d_count = v.cfg.directions;
      c.affine_in.resize(static_cast<std::size_t>(d_count) * k);
      // Bin-major flattening: [Y_1(w_1)..Y_D(w_1), ..., Y_1(w_K)..Y_D(w_K)].
      for (int kk = 0; kk < k; ++kk)
        for (int d = 0; d < d_count; ++d)
          c.affine_in[static_cast<std::size_t>(kk) * d_count + d] =
              c.power[static_cast<std::size_t>(d) * k + kk];
      return affine_forward(c.affine_in, *v.affine);
    }
    case McTag::kBatFanMax:
    case McTag::kBatFanAvg: {
      c.bat_out = bat_forward(x, *v.bat);
      c.power = power_op(c.bat_out);
      return fan_forward(c.power, k, *v.fan, &c.fan_argmax);
    }
  }
  throw DataError("unknown variant tag");
}

ParamBreakdown parameter_count(const McVariant& v) {
  ParamBreakdown out;
  if (v.bat) {
    const auto w = static_cast<std::int64_t>(v.bat->weights.size()) * 2;
    const auto b = static_cast<std::int64_t>(v.bat->biases.size()) * 2;
    out.layers.push_back({"bat", w + b, w});
  }
  if (v.fan) {
    const auto w = static_cast<std::int64_t>(v.fan->weights.size());
    const auto b = static_cast<std::int64_t>(v.fan->biases.size());
    out.layers.push_back({"fan", w + b, w});
  }
  if (v.affine) {
    const auto w = static_cast<std::int64_t>(v.affine->weights.size());
    const auto b = static_cast<std::int64_t>(v.affine->biases.size());
    out.layers.push_back({"affine", w + b, w});
  }
  for (const auto& l : out.layers) out.total += l.total;
  return out;
}

}  // namespace fan
