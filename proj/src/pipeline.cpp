#include "fan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fan/error.hpp"

namespace fan {

ToyClassifier ToyClassifier::init(int input_dim, int hidden, int classes,
                                  std::uint64_t seed) {
  if (input_dim <= 0 || hidden <= 0 || classes <= 0)
    throw DataError("classifier dimensions must be positive");
  ToyClassifier cls;
  cls.input_dim = input_dim;
  cls.hidden = hidden;
  cls.classes = classes;
  std::mt19937_64 rng(seed);
  cls.h1 = make_affine(input_dim, hidden, rng);
  cls.h2 = make_affine(hidden, hidden, rng);
  cls.out = make_affine(hidden, classes, rng);
  return cls;
}

std::vector<double> classifier_logits(std::span<const double> x,
                                      const ToyClassifier& cls) {
  std::vector<double> a1 = affine_forward(x, cls.h1);
  for (double& v : a1) v = std::max(v, 0.0);
  std::vector<double> a2 = affine_forward(a1, cls.h2);
  for (double& v : a2) v = std::max(v, 0.0);
  return affine_forward(a2, cls.out);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    denom += p[i];
  }
  for (double& v : p) v /= denom;
  return p;
}

double cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw DataError("class label out of range");
  const double top = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (const double v : logits) denom += std::exp(v - top);
  return std::log(denom) - (logits[label] - top);
}

Pipeline make_pipeline(McTag tag, const McConfig& mc_cfg,
                       const FrameConfig& frame_cfg, int fe_filters,
                       int hidden, int classes,
                       const SuperdirectiveWeights* init) {
  frame_cfg.validate();
  if (mc_cfg.bins != frame_cfg.bins())
    throw DataError("variant bins disagree with the frame config");
  Pipeline p;
  p.frame_cfg = frame_cfg;
  p.mc = assemble_variant(tag, mc_cfg, init);
  p.fe = FeLayer::init(mc_cfg.bins, fe_filters, frame_cfg.sample_rate_hz);
  p.cls = ToyClassifier::init(frame_cfg.lfr_factor * fe_filters, hidden,
                              classes, mc_cfg.seed + 0x9e3779b97f4a7c15ULL);
  // Identity normalization until statistics are fit on a corpus.
  p.gmvn.channels = mc_cfg.channels;
  p.gmvn.bins = mc_cfg.bins;
  p.gmvn.frame_count = 0;
  p.gmvn.mean.assign(static_cast<std::size_t>(mc_cfg.channels) * mc_cfg.bins * 2,
                     0.0);
  p.gmvn.variance.assign(
      static_cast<std::size_t>(mc_cfg.channels) * mc_cfg.bins * 2, 1.0);
  return p;
}

}  // namespace fan
