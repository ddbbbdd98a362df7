#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fan/grad.hpp"
#include "fan/sim.hpp"

namespace fan {

/// Reads one WAV and produces DFT feature frames; the file's sample rate
/// must match the config.
std::vector<MultiChannelSpectrum> extract_features(const std::string& wav_path,
                                                   const FrameConfig& cfg);

/// One utterance's label, oracle metadata, and normalized feature stacks.
struct UtteranceFeatures {
  int label = 0;
  double snr_db = 0.0;
  bool playback = false;
  std::vector<LfrStack> stacks;
};

struct FeatureDataset {
  int channels = 0;
  int bins = 0;
  int classes = 0;
  int lfr = 1;
  GmvnStats gmvn;  // fit on the train split
  std::vector<UtteranceFeatures> train, dev, test;
};

/// Loads every manifest entry (paths resolved against the manifest's
/// directory), fits GMVN on the train split, and normalizes all frames.
/// Pass `stats` (e.g. from a checkpoint) to normalize with fixed
/// statistics instead of refitting.
FeatureDataset load_dataset(const std::string& manifest_path,
                            const FrameConfig& cfg, int classes,
                            const GmvnStats* stats = nullptr);

/// Hyperparameters of one stage of the ladder.
struct StageConfig {
  int epochs = 8;
  int warmup_epochs = 1;  // earlier-stage layers stay frozen during these
  double lr = 1e-3;
  int batch_size = 32;
};

struct TrainConfig {
  StageConfig stage1;  // classifier on fixed LFBE features
  StageConfig stage2;  // FE + classifier on channel-0 power spectra
  StageConfig stage3;  // full multi-channel pipeline
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;

  TrainConfig() {
    stage1.warmup_epochs = 0;  // nothing upstream to freeze
    stage2.epochs = 6;
  }
};

struct MetricRow {
  int epoch = 0;  // 1-based within the stage
  int stage = 0;  // 1..3
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  Pipeline pipeline;
  std::vector<MetricRow> log;
};

/// Runs one stage: shuffled mini-batches under Adam, with a fresh
/// optimizer state per freeze phase (warm-up, then unfrozen). Appends one
/// metric row per epoch.
void train_stage(Pipeline& p, const FeatureDataset& data, TrainStage stage,
                 const StageConfig& hp, const TrainConfig& cfg,
                 std::vector<MetricRow>& log);

/// The stage-wise recipe: classifier on oracle LFBE, then FE+classifier
/// on single-channel power spectra, then the joint multi-channel model.
/// `stage2_snapshot` resumes from a pipeline already trained through
/// stage 2 (its MC module is replaced by a freshly assembled `tag`
/// variant), which lets several variants share one stage-1/2 run.
/// `stop_after_stage` ends the ladder early (1..3).
TrainResult train_stagewise(const FeatureDataset& data, McTag tag,
                            const McConfig& mc_cfg,
                            const FrameConfig& frame_cfg,
                            const TrainConfig& cfg, int fe_filters = 64,
                            int hidden = 128,
                            const SuperdirectiveWeights* sd_init = nullptr,
                            const Pipeline* stage2_snapshot = nullptr,
                            int stop_after_stage = 3);

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& log);

/// Utterance-level decision: class with the highest sum of per-stack log
/// softmax scores (ties to the lowest index). `stage` picks the dataflow,
/// so per-epoch dev accuracy matches what is being trained.
int classify_utterance(const Pipeline& p, const UtteranceFeatures& utt,
                       TrainStage stage = TrainStage::kJoint);

struct BucketStat {
  int total = 0;
  int correct = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

/// Accuracy bucketed by SNR tertile and playback flag, per the manifest
/// metadata.
struct EvalReport {
  BucketStat cells[3][2];  // [snr bucket][playback]
  BucketStat overall;
};

EvalReport evaluate(const Pipeline& p,
                    const std::vector<UtteranceFeatures>& utts);

/// Relative error-rate reduction (percent) of `model` versus `baseline`:
/// 100 * (err_b - err_m) / err_b; 0 when both errors are zero.
double relative_error_reduction(const BucketStat& model,
                                const BucketStat& baseline);

}  // namespace fan
