#include "fan/grad.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>

#include "fan/error.hpp"
#include "fan/ref.hpp"

namespace fan {

namespace {

struct TensorRef {
  int slot;
  const char* name;
  const double* data;
  std::size_t size;
};

// Slot ids; also the fixed enumeration order within each group.
enum Slot {
  kBatW, kBatB, kFanW, kFanB, kAffW, kAffB,
  kFeW, kFeB, kH1W, kH1B, kH2W, kH2B, kOutW, kOutB,
  kNumSlots
};

const double* as_scalars(const std::vector<cplx>& v) {
  return reinterpret_cast<const double*>(v.data());
}

// Parameter tensors of the stage's dataflow, in the order gradient and
// optimizer vectors use. Frozen groups are skipped.
std::vector<TensorRef> tensor_list(const Pipeline& p, TrainStage stage,
                                   FreezeMask freeze) {
  std::vector<TensorRef> out;
  if (stage == TrainStage::kJoint && !freeze.mc) {
    if (p.mc.bat) {
      out.push_back({kBatW, "bat.weights", as_scalars(p.mc.bat->weights),
                     p.mc.bat->weights.size() * 2});
      out.push_back({kBatB, "bat.biases", as_scalars(p.mc.bat->biases),
                     p.mc.bat->biases.size() * 2});
    }
    if (p.mc.fan) {
      out.push_back({kFanW, "fan.weights", p.mc.fan->weights.data(),
                     p.mc.fan->weights.size()});
      out.push_back({kFanB, "fan.biases", p.mc.fan->biases.data(),
                     p.mc.fan->biases.size()});
    }
    if (p.mc.affine) {
      out.push_back({kAffW, "mc.affine.weights", p.mc.affine->weights.data(),
                     p.mc.affine->weights.size()});
      out.push_back({kAffB, "mc.affine.biases", p.mc.affine->biases.data(),
                     p.mc.affine->biases.size()});
    }
  }
  if (stage != TrainStage::kClassifierOnly && !freeze.fe) {
    out.push_back({kFeW, "fe.weights", p.fe.weights.data(), p.fe.weights.size()});
    out.push_back({kFeB, "fe.biases", p.fe.biases.data(), p.fe.biases.size()});
  }
  if (!freeze.cls) {
    out.push_back({kH1W, "cls.h1.weights", p.cls.h1.weights.data(),
                   p.cls.h1.weights.size()});
    out.push_back({kH1B, "cls.h1.biases", p.cls.h1.biases.data(),
                   p.cls.h1.biases.size()});
    out.push_back({kH2W, "cls.h2.weights", p.cls.h2.weights.data(),
                   p.cls.h2.weights.size()});
    out.push_back({kH2B, "cls.h2.biases", p.cls.h2.biases.data(),
                   p.cls.h2.biases.size()});
    out.push_back({kOutW, "cls.out.weights", p.cls.out.weights.data(),
                   p.cls.out.weights.size()});
    out.push_back({kOutB, "cls.out.biases", p.cls.out.biases.data(),
                   p.cls.out.biases.size()});
  }
  return out;
}

// Windows into a flat gradient vector, one per slot; empty when the slot
// is absent or frozen.
struct Layout {
  std::span<double> slots[kNumSlots];
};

Layout make_layout(const Pipeline& p, TrainStage stage, FreezeMask freeze,
                   std::span<double> grad) {
  Layout lay;
  std::size_t off = 0;
  for (const TensorRef& t : tensor_list(p, stage, freeze)) {
    if (off + t.size > grad.size()) throw DataError("gradient vector too small");
    lay.slots[t.slot] = grad.subspan(off, t.size);
    off += t.size;
  }
  if (off != grad.size()) throw DataError("gradient vector size mismatch");
  return lay;
}

std::vector<double> relu(std::span<const double> a) {
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = std::max(a[i], 0.0);
  return r;
}

}  // namespace

std::vector<ParamView> trainable_params(Pipeline& p, TrainStage stage,
                                        FreezeMask freeze) {
  std::vector<ParamView> views;
  for (const TensorRef& t : tensor_list(p, stage, freeze))
    views.push_back({t.name, const_cast<double*>(t.data), t.size});
  return views;
}

std::vector<ParamView> all_params(Pipeline& p) {
  return trainable_params(p, TrainStage::kJoint, FreezeMask{});
}

std::size_t param_scalar_count(std::span<const ParamView> views) {
  std::size_t n = 0;
  for (const ParamView& v : views) n += v.size;
  return n;
}

std::vector<double> read_params(std::span<const ParamView> views) {
  std::vector<double> flat;
  flat.reserve(param_scalar_count(views));
  for (const ParamView& v : views) flat.insert(flat.end(), v.data, v.data + v.size);
  return flat;
}

void write_params(std::span<const ParamView> views, std::span<const double> flat) {
  if (flat.size() != param_scalar_count(views))
    throw DataError("flat parameter size mismatch");
  std::size_t off = 0;
  for (const ParamView& v : views) {
    std::copy(flat.begin() + off, flat.begin() + off + v.size, v.data);
    off += v.size;
  }
}

std::vector<double> stack_logits(const Pipeline& p, const LfrStack& stack,
                                 TrainStage stage, StackCache* cache) {
  if (static_cast<int>(stack.frames.size()) != p.frame_cfg.lfr_factor)
    throw DataError("stack length disagrees with the LFR factor");
  const int filters = p.fe.filters;
  const int bins = p.fe.bins;

  StackCache local;
  StackCache& c = cache ? *cache : local;
  c.frames.assign(stack.frames.size(), FrameCache{});
  c.cls_in.assign(stack.frames.size() * static_cast<std::size_t>(filters), 0.0);

  for (std::size_t f = 0; f < stack.frames.size(); ++f) {
    const MultiChannelSpectrum& frame = stack.frames[f];
    if (frame.bins != bins) throw DataError("frame/pipeline bin mismatch");
    std::vector<double> fe_out;
    switch (stage) {
      case TrainStage::kClassifierOnly: {
        // Fixed log mel filter-bank features of the channel-0 power
        // spectrum; nothing upstream of the classifier trains.
        const std::vector<double> z = power_op(
            {frame.data.data(), static_cast<std::size_t>(bins)});
        fe_out = ref::lfbe(z, p.fe.weights, filters, p.fe.log_floor);
        break;
      }
      case TrainStage::kFePlusClassifier: {
        c.frames[f].fe_in =
            power_op({frame.data.data(), static_cast<std::size_t>(bins)});
        fe_out = fe_forward(c.frames[f].fe_in, p.fe, &c.frames[f].fe_pre);
        break;
      }
      case TrainStage::kJoint: {
        c.frames[f].fe_in = mc_forward(p.mc, frame, &c.frames[f].mc);
        fe_out = fe_forward(c.frames[f].fe_in, p.fe, &c.frames[f].fe_pre);
        break;
      }
    }
    std::copy(fe_out.begin(), fe_out.end(),
              c.cls_in.begin() + f * static_cast<std::size_t>(filters));
  }

  c.a1 = affine_forward(c.cls_in, p.cls.h1);
  c.r1 = relu(c.a1);
  c.a2 = affine_forward(c.r1, p.cls.h2);
  c.r2 = relu(c.a2);
  c.logits = affine_forward(c.r2, p.cls.out);
  c.probs = softmax(c.logits);
  return c.logits;
}

double example_loss(const Pipeline& p, const StackExample& ex, TrainStage stage,
                    StackCache* cache) {
  const std::vector<double> logits = stack_logits(p, ex.stack, stage, cache);
  return cross_entropy(logits, ex.label);
}

double forward_loss(const Pipeline& p, std::span<const StackExample> batch,
                    TrainStage stage) {
  if (batch.empty()) throw DataError("empty batch");
  std::vector<double> losses(batch.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(batch.size());
       ++e) {
    try {
      losses[e] = example_loss(p, batch[e], stage, nullptr);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  double total = 0.0;
  for (const double l : losses) total += l;
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean)) throw NumericError("non-finite loss");
  return mean;
}

void affine_backward(std::span<const double> x, const AffineLayer& layer,
                     std::span<const double> dy, std::span<double> dw,
                     std::span<double> db, std::span<double> dx) {
  for (int o = 0; o < layer.out; ++o) {
    const double g = dy[o];
    const std::size_t row = static_cast<std::size_t>(o) * layer.in;
    if (!dw.empty())
      for (int i = 0; i < layer.in; ++i) dw[row + i] += g * x[i];
    if (!db.empty()) db[o] += g;
    if (!dx.empty())
      for (int i = 0; i < layer.in; ++i) dx[i] += layer.weights[row + i] * g;
  }
}

void fe_backward(std::span<const double> z, std::span<const double> pre,
                 const FeLayer& layer, std::span<const double> dout,
                 std::span<double> dw, std::span<double> db,
                 std::span<double> dz) {
  for (int f = 0; f < layer.filters; ++f) {
    // out = log(max(pre, 0) + eps): zero slope on the dead side.
    const double da =
        pre[f] > 0.0 ? dout[f] / (pre[f] + layer.log_floor) : 0.0;
    if (da == 0.0) continue;
    const std::size_t row = static_cast<std::size_t>(f) * layer.bins;
    if (!dw.empty())
      for (int k = 0; k < layer.bins; ++k) dw[row + k] += da * z[k];
    if (!db.empty()) db[f] += da;
    if (!dz.empty())
      for (int k = 0; k < layer.bins; ++k) dz[k] += layer.weights[row + k] * da;
  }
}

void fan_backward(std::span<const double> y, int bins, const FanLayer& layer,
                  std::span<const int> argmax, std::span<const double> dz,
                  std::span<double> dw, std::span<double> db,
                  std::span<double> dy) {
  const int d_count = layer.directions;
  const int n_count = layer.filters;
  if (layer.pooling == Pooling::kMax) {
    for (int k = 0; k < bins; ++k) {
      const double g = dz[k];
      const int n = argmax[k];
      const std::size_t row = static_cast<std::size_t>(n) * d_count;
      if (!dw.empty())
        for (int d = 0; d < d_count; ++d)
          dw[row + d] += g * y[static_cast<std::size_t>(d) * bins + k];
      if (!db.empty()) db[n] += g;
      if (!dy.empty())
        for (int d = 0; d < d_count; ++d)
          dy[static_cast<std::size_t>(d) * bins + k] += g * layer.weights[row + d];
    }
    return;
  }
  const double inv_n = 1.0 / n_count;
  // Column sums of the filters drive dY under average pooling.
  std::vector<double> colsum(d_count, 0.0);
  if (!dy.empty())
    for (int n = 0; n < n_count; ++n)
      for (int d = 0; d < d_count; ++d)
        colsum[d] += layer.weights[static_cast<std::size_t>(n) * d_count + d];
  for (int k = 0; k < bins; ++k) {
    const double g = dz[k] * inv_n;
    if (!dw.empty())
      for (int n = 0; n < n_count; ++n)
        for (int d = 0; d < d_count; ++d)
          dw[static_cast<std::size_t>(n) * d_count + d] +=
              g * y[static_cast<std::size_t>(d) * bins + k];
    if (!db.empty())
      for (int n = 0; n < n_count; ++n) db[n] += g;
    if (!dy.empty())
      for (int d = 0; d < d_count; ++d)
        dy[static_cast<std::size_t>(d) * bins + k] += g * colsum[d];
  }
}

void power_backward(std::span<const cplx> z, std::span<const double> dp,
                    std::span<cplx> dz) {
  for (std::size_t i = 0; i < z.size(); ++i) dz[i] = 2.0 * dp[i] * z[i];
}

void bat_backward(const MultiChannelSpectrum& x, const BatLayer& layer,
                  std::span<const cplx> dout, std::span<double> dw,
                  std::span<double> db) {
  for (int d = 0; d < layer.directions; ++d) {
    for (int k = 0; k < layer.bins; ++k) {
      const std::size_t bi = layer.bidx(d, k);
      const cplx go = dout[bi];
      if (!db.empty()) {
        db[2 * bi] += go.real();
        db[2 * bi + 1] += go.imag();
      }
      if (!dw.empty()) {
        for (int m = 0; m < layer.channels; ++m) {
          // d/d(re w), d/d(im w) of re(conj(w) x) * go.re + im(...) * go.im
          // packs as conj(go) * x.
          const cplx g = std::conj(go) * x.at(m, k);
          const std::size_t wi = layer.widx(d, k, m);
          dw[2 * wi] += g.real();
          dw[2 * wi + 1] += g.imag();
        }
      }
    }
  }
}

void backward_example(const Pipeline& p, const StackExample& ex,
                      const StackCache& c, TrainStage stage, FreezeMask freeze,
                      double scale, std::span<double> grad) {
  const Layout lay = make_layout(p, stage, freeze, grad);
  const int hidden = p.cls.hidden;
  const int filters = p.fe.filters;
  const int bins = p.fe.bins;

  std::vector<double> dlogits(c.probs);
  dlogits[ex.label] -= 1.0;
  for (double& v : dlogits) v *= scale;

  std::vector<double> dr2(hidden, 0.0);
  affine_backward(c.r2, p.cls.out, dlogits, lay.slots[kOutW], lay.slots[kOutB],
                  dr2);
  std::vector<double> da2(hidden);
  for (int i = 0; i < hidden; ++i) da2[i] = c.a2[i] > 0.0 ? dr2[i] : 0.0;

  std::vector<double> dr1(hidden, 0.0);
  affine_backward(c.r1, p.cls.h2, da2, lay.slots[kH2W], lay.slots[kH2B], dr1);
  std::vector<double> da1(hidden);
  for (int i = 0; i < hidden; ++i) da1[i] = c.a1[i] > 0.0 ? dr1[i] : 0.0;

  const bool need_dx = stage != TrainStage::kClassifierOnly;
  std::vector<double> dx;
  if (need_dx) dx.assign(c.cls_in.size(), 0.0);
  affine_backward(c.cls_in, p.cls.h1, da1, lay.slots[kH1W], lay.slots[kH1B],
                  need_dx ? std::span<double>(dx) : std::span<double>());
  if (!need_dx) return;

  for (std::size_t f = 0; f < c.frames.size(); ++f) {
    const FrameCache& fc = c.frames[f];
    const std::span<const double> dfe(dx.data() + f * filters,
                                      static_cast<std::size_t>(filters));
    const bool need_dz = stage == TrainStage::kJoint;
    std::vector<double> dz;
    if (need_dz) dz.assign(bins, 0.0);
    fe_backward(fc.fe_in, fc.fe_pre, p.fe, dfe, lay.slots[kFeW],
                lay.slots[kFeB],
                need_dz ? std::span<double>(dz) : std::span<double>());
    if (!need_dz) continue;

    const McVariant& v = p.mc;
    const McCache& m = fc.mc;
    switch (v.tag) {
      case McTag::kRaw1ch:
      case McTag::kRaw2ch:
        affine_backward(m.affine_in, *v.affine, dz, lay.slots[kAffW],
                        lay.slots[kAffB], {});
        break;
      case McTag::kFanMax:
        fan_backward(m.power, bins, *v.fan, m.fan_argmax, dz, lay.slots[kFanW],
                     lay.slots[kFanB], {});
        break;
      case McTag::kBatAt: {
        const int d_count = v.cfg.directions;
        std::vector<double> dflat(m.affine_in.size(), 0.0);
        affine_backward(m.affine_in, *v.affine, dz, lay.slots[kAffW],
                        lay.slots[kAffB], dflat);
        // Invert the bin-major flattening back to direction-major.
        std::vector<double> dp(dflat.size());
        for (int kk = 0; kk < bins; ++kk)
          for (int d = 0; d < d_count; ++d)
            dp[static_cast<std::size_t>(d) * bins + kk] =
                dflat[static_cast<std::size_t>(kk) * d_count + d];
        std::vector<cplx> dbat(m.bat_out.size());
        power_backward(m.bat_out, dp, dbat);
        bat_backward(ex.stack.frames[f], *v.bat, dbat, lay.slots[kBatW],
                     lay.slots[kBatB]);
        break;
      }
      case McTag::kBatFanMax:
      case McTag::kBatFanAvg: {
        std::vector<double> dp(m.power.size(), 0.0);
        fan_backward(m.power, bins, *v.fan, m.fan_argmax, dz, lay.slots[kFanW],
                     lay.slots[kFanB], dp);
        std::vector<cplx> dbat(m.bat_out.size());
        power_backward(m.bat_out, dp, dbat);
        bat_backward(ex.stack.frames[f], *v.bat, dbat, lay.slots[kBatW],
                     lay.slots[kBatB]);
        break;
      }
    }
  }
}

double batch_gradient(const Pipeline& p, std::span<const StackExample> batch,
                      TrainStage stage, FreezeMask freeze,
                      std::span<double> grad, GradWorkspace* ws) {
  if (batch.empty()) throw DataError("empty batch");
  std::size_t expect = 0;
  for (const TensorRef& t : tensor_list(p, stage, freeze)) expect += t.size;
  if (expect != grad.size()) throw DataError("gradient vector size mismatch");
  GradWorkspace local;
  GradWorkspace& w = ws ? *ws : local;
  w.per_example.resize(batch.size());
  w.losses.assign(batch.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::exception_ptr err;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(batch.size());
       ++e) {
    try {
      StackCache cache;
      w.losses[e] = example_loss(p, batch[e], stage, &cache) * scale;
      w.per_example[e].assign(grad.size(), 0.0);
      backward_example(p, batch[e], cache, stage, freeze, scale,
                       w.per_example[e]);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  // Fixed-order reduction: identical result for any thread count.
  for (std::size_t e = 0; e < batch.size(); ++e) {
    loss += w.losses[e];
    const std::vector<double>& g = w.per_example[e];
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
  }
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grad.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw DataError("adam shape mismatch");
  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

GradCheckReport gradient_check(Pipeline& p, std::span<const StackExample> batch,
                               TrainStage stage, double h) {
  const std::vector<ParamView> views = trainable_params(p, stage, FreezeMask{});
  std::vector<double> grad(param_scalar_count(views), 0.0);
  batch_gradient(p, batch, stage, FreezeMask{}, grad, nullptr);

  GradCheckReport rep;
  std::size_t off = 0;
  for (const ParamView& view : views) {
    for (std::size_t i = 0; i < view.size; ++i) {
      const double saved = view.data[i];
      view.data[i] = saved + h;
      const double lp = forward_loss(p, batch, stage);
      view.data[i] = saved - h;
      const double lm = forward_loss(p, batch, stage);
      view.data[i] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double g = grad[off + i];
      const double rel = std::abs(fd - g) /
                         std::max({std::abs(fd), std::abs(g), 1e-2});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = view.name + "[" + std::to_string(i) + "]";
      }
      ++rep.checked;
    }
    off += view.size;
  }
  return rep;
}

Pipeline make_gradcheck_pipeline(McTag tag, const McConfig& cfg, int lfr,
                                 int fe_filters, int hidden, int classes,
                                 std::uint64_t seed) {
  Pipeline p;
  p.frame_cfg.lfr_factor = lfr;
  McConfig mc_cfg = cfg;
  mc_cfg.seed = seed;
  p.mc = assemble_variant(tag, mc_cfg);

  std::mt19937_64 rng(seed ^ 0xfeedf00dULL);
  p.fe.bins = cfg.bins;
  p.fe.filters = fe_filters;
  p.fe.weights.resize(static_cast<std::size_t>(fe_filters) * cfg.bins);
  p.fe.biases.resize(fe_filters);
  std::uniform_real_distribution<double> wdist(0.05, 0.5);
  // Biases large enough that pre-activations stay positive (and clear of
  // the ReLU kink) for unit-scale inputs; a dead unit would zero out the
  // upstream gradients and make the finite-difference comparison vacuous.
  std::uniform_real_distribution<double> bdist(2.0, 3.0);
  for (double& w : p.fe.weights) w = wdist(rng);
  for (double& b : p.fe.biases) b = bdist(rng);

  p.cls = ToyClassifier::init(lfr * fe_filters, hidden, classes, rng());
  return p;
}

std::vector<StackExample> make_gradcheck_batch(const Pipeline& p, int count,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xbadc0deULL);
  std::normal_distribution<double> dist(0.0, 0.7);
  std::vector<StackExample> batch(count);
  for (int i = 0; i < count; ++i) {
    batch[i].label = i % p.cls.classes;
    for (int f = 0; f < p.frame_cfg.lfr_factor; ++f) {
      MultiChannelSpectrum frame;
      frame.frame_index = f;
      frame.channels = p.mc.cfg.channels;
      frame.bins = p.mc.cfg.bins;
      frame.data.resize(static_cast<std::size_t>(frame.channels) * frame.bins);
      for (cplx& z : frame.data) z = cplx(dist(rng), dist(rng));
      batch[i].stack.frames.push_back(std::move(frame));
    }
  }
  return batch;
}

}  // namespace fan
