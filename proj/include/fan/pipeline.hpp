#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fan/fe.hpp"
#include "fan/frame.hpp"
#include "fan/gmvn.hpp"
#include "fan/layers.hpp"

namespace fan {

/// Small feed-forward head over the concatenated low-frame-rate FE
/// outputs: two affine+ReLU hidden layers and an affine layer producing
/// class logits.
struct ToyClassifier {
  int input_dim = 0;
  int hidden = 128;
  int classes = 0;
  AffineLayer h1;
  AffineLayer h2;
  AffineLayer out;

  static ToyClassifier init(int input_dim, int hidden, int classes,
                            std::uint64_t seed);
};

std::vector<double> classifier_logits(std::span<const double> x,
                                      const ToyClassifier& cls);

/// Numerically stable softmax (log-sum-exp shifted by the max logit).
std::vector<double> softmax(std::span<const double> logits);

/// -log softmax(logits)[label]; labels outside [0, classes) are a data
/// error.
double cross_entropy(std::span<const double> logits, int label);

/// Which slice of the pipeline runs (and trains):
///   kClassifierOnly   classifier on fixed log mel filter-bank features,
///   kFePlusClassifier FE + classifier on the channel-0 power spectrum,
///   kJoint            the full multi-channel pipeline.
enum class TrainStage { kClassifierOnly = 1, kFePlusClassifier = 2, kJoint = 3 };

/// Full model state. The GMVN statistics are fit once on the training
/// split and stay fixed; only MC/FE/classifier parameters train.
struct Pipeline {
  FrameConfig frame_cfg;
  GmvnStats gmvn;
  McVariant mc;
  FeLayer fe;
  ToyClassifier cls;

  int classifier_input_dim() const { return frame_cfg.lfr_factor * fe.filters; }
};

/// Assembles a freshly initialized pipeline: variant per `tag` (BAT
/// weights superdirective when `init` is given), mel-initialized FE, and
/// a randomly initialized classifier. GMVN starts as identity stats.
Pipeline make_pipeline(McTag tag, const McConfig& mc_cfg,
                       const FrameConfig& frame_cfg, int fe_filters,
                       int hidden, int classes,
                       const SuperdirectiveWeights* init = nullptr);

}  // namespace fan
