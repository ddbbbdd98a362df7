#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fan/pipeline.hpp"

namespace fan {

/// A named window onto one parameter tensor of a Pipeline. Complex
/// tensors are exposed through their interleaved real/imaginary scalars.
struct ParamView {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

/// Layer groups excluded from a phase's trainable set. Frozen layers
/// still propagate gradients downstream; they just receive no updates.
struct FreezeMask {
  bool mc = false;
  bool fe = false;
  bool cls = false;
};

/// Trainable parameter views for a stage, in a fixed order. Flat
/// gradient/optimizer vectors align with the concatenation of these.
std::vector<ParamView> trainable_params(Pipeline& p, TrainStage stage,
                                        FreezeMask freeze = {});

/// Every parameter of the pipeline, in checkpoint order.
std::vector<ParamView> all_params(Pipeline& p);

std::size_t param_scalar_count(std::span<const ParamView> views);
std::vector<double> read_params(std::span<const ParamView> views);
void write_params(std::span<const ParamView> views, std::span<const double> flat);

/// One training example: an LFR stack of *already normalized* spectra
/// plus its class label.
struct StackExample {
  LfrStack stack;
  int label = 0;
};

/// Per-frame activations recorded by the forward pass.
struct FrameCache {
  std::vector<double> fe_in;   // FE input: power spectrum or MC output
  std::vector<double> fe_pre;  // FE pre-activation W z + b
  McCache mc;                  // joint stage only
};

struct StackCache {
  std::vector<FrameCache> frames;
  std::vector<double> cls_in;  // concatenated FE outputs, lfr * F
  std::vector<double> a1, r1;  // first hidden pre/post ReLU
  std::vector<double> a2, r2;  // second hidden pre/post ReLU
  std::vector<double> logits;
  std::vector<double> probs;
};

/// Class logits for one stack under a stage's dataflow. The stack is not
/// normalized here; examples carry normalized spectra.
std::vector<double> stack_logits(const Pipeline& p, const LfrStack& stack,
                                 TrainStage stage, StackCache* cache = nullptr);

/// Cross-entropy of one example (and its activations via *cache).
double example_loss(const Pipeline& p, const StackExample& ex, TrainStage stage,
                    StackCache* cache = nullptr);

/// Mean cross-entropy over a batch; NaN/Inf raises NumericError.
double forward_loss(const Pipeline& p, std::span<const StackExample> batch,
                    TrainStage stage);

// Standalone backward pieces mirroring the forward operations. Gradient
// output spans may be empty to skip that tensor; non-empty spans are
// accumulated into (+=).
void affine_backward(std::span<const double> x, const AffineLayer& layer,
                     std::span<const double> dy, std::span<double> dw,
                     std::span<double> db, std::span<double> dx);
void fe_backward(std::span<const double> z, std::span<const double> pre,
                 const FeLayer& layer, std::span<const double> dout,
                 std::span<double> dw, std::span<double> db,
                 std::span<double> dz);
void fan_backward(std::span<const double> y, int bins, const FanLayer& layer,
                  std::span<const int> argmax, std::span<const double> dz,
                  std::span<double> dw, std::span<double> db,
                  std::span<double> dy);
/// d|z|^2 pulled back to the complex plane: dz[i] = 2 * dp[i] * z[i],
/// packed as (d/d re, d/d im) pairs.
void power_backward(std::span<const cplx> z, std::span<const double> dp,
                    std::span<cplx> dz);
/// BAT parameter gradients; dw/db are interleaved (re, im) scalar views
/// matching the flat gradient layout.
void bat_backward(const MultiChannelSpectrum& x, const BatLayer& layer,
                  std::span<const cplx> dout, std::span<double> dw,
                  std::span<double> db);

/// Gradient of this example's loss (scaled by `scale`) with respect to
/// the stage's trainable set, accumulated into `grad`, which must align
/// with trainable_params(p, stage, freeze).
void backward_example(const Pipeline& p, const StackExample& ex,
                      const StackCache& cache, TrainStage stage,
                      FreezeMask freeze, double scale, std::span<double> grad);

/// Reusable per-example gradient buffers for batch_gradient.
struct GradWorkspace {
  std::vector<std::vector<double>> per_example;
  std::vector<double> losses;
};

/// Mean batch loss plus its gradient. Examples run in parallel; their
/// buffers are reduced in example order, so the result is bit-identical
/// for any thread count.
double batch_gradient(const Pipeline& p, std::span<const StackExample> batch,
                      TrainStage stage, FreezeMask freeze,
                      std::span<double> grad, GradWorkspace* ws = nullptr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

/// Bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state, const AdamConfig& cfg);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Central finite differences against backward_example for every
/// trainable scalar. Relative error uses max(|fd|, |grad|, 1e-2) in the
/// denominator to keep near-zero gradients from inflating the ratio.
GradCheckReport gradient_check(Pipeline& p, std::span<const StackExample> batch,
                               TrainStage stage, double h = 1e-4);

/// Small pipeline for finite-difference checks, assembled directly so the
/// bin count need not match any real DFT size. All layers (including the
/// FE, which would normally start from mel triangles) get dense random
/// parameters so no unit starts dead.
Pipeline make_gradcheck_pipeline(McTag tag, const McConfig& cfg, int lfr,
                                 int fe_filters, int hidden, int classes,
                                 std::uint64_t seed);

/// Random normalized-scale spectra stacks with cycling labels, shaped for
/// `p`.
std::vector<StackExample> make_gradcheck_batch(const Pipeline& p, int count,
                                               std::uint64_t seed);

}  // namespace fan
