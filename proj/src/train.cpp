#include "fan/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "fan/error.hpp"
#include "fan/wav.hpp"

namespace fan {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i)
    std::swap(items[i - 1], items[rng() % i]);
}

/// Dev-split utterance accuracy under the stage's dataflow; parallel over
/// utterances, tallied in order.
double split_accuracy(const Pipeline& p,
                      const std::vector<UtteranceFeatures>& utts,
                      TrainStage stage) {
  std::vector<int> pred(utts.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(utts.size()); ++u)
    pred[u] = classify_utterance(p, utts[u], stage);
  int correct = 0;
  for (std::size_t u = 0; u < utts.size(); ++u)
    if (pred[u] == utts[u].label) ++correct;
  return utts.empty() ? 0.0 : static_cast<double>(correct) / utts.size();
}

std::vector<StackExample> flatten(const std::vector<UtteranceFeatures>& utts) {
  std::vector<StackExample> out;
  for (const UtteranceFeatures& utt : utts)
    for (const LfrStack& stack : utt.stacks) out.push_back({stack, utt.label});
  return out;
}

}  // namespace

std::vector<MultiChannelSpectrum> extract_features(const std::string& wav_path,
                                                   const FrameConfig& cfg) {
  const WavData wav = read_wav(wav_path);
  if (wav.sample_rate != cfg.sample_rate_hz)
    throw DataError(wav_path + ": sample rate " +
                    std::to_string(wav.sample_rate) + " != config " +
                    std::to_string(cfg.sample_rate_hz));
  return frame_and_transform(wav.channels, cfg);
}

FeatureDataset load_dataset(const std::string& manifest_path,
                            const FrameConfig& cfg, int classes,
                            const GmvnStats* stats) {
  cfg.validate();
  if (classes < 1) throw DataError("class count must be positive");
  const CorpusManifest manifest = read_manifest(manifest_path);
  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();

  FeatureDataset data;
  data.bins = cfg.bins();
  data.classes = classes;
  data.lfr = cfg.lfr_factor;

  struct Loaded {
    UtteranceFeatures utt;
    std::vector<MultiChannelSpectrum> frames;
  };
  std::vector<Loaded> loaded(manifest.size());

  // Exceptions cannot cross the parallel region; capture the first one.
  std::string error;
  bool failed = false;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(manifest.size());
       ++i) {
    try {
      const ManifestEntry& e = manifest[i];
      if (e.class_id < 0 || e.class_id >= classes)
        throw DataError(e.path + ": class id out of range");
      Loaded& l = loaded[i];
      l.utt.label = e.class_id;
      l.utt.snr_db = e.snr_db;
      l.utt.playback = e.playback;
      l.frames = extract_features((base / e.path).string(), cfg);
    } catch (const std::exception& ex) {
#pragma omp critical
      {
        if (!failed) {
          failed = true;
          error = ex.what();
        }
      }
    }
  }
  if (failed) throw DataError(error);

  int channels = 0;
  for (const Loaded& l : loaded)
    if (!l.frames.empty()) {
      channels = l.frames[0].channels;
      break;
    }
  if (channels == 0) throw DataError("no frames in any utterance");
  for (const Loaded& l : loaded)
    if (!l.frames.empty() && l.frames[0].channels != channels)
      throw DataError("utterances disagree on channel count");
  data.channels = channels;

  if (stats) {
    if (stats->channels != channels || stats->bins != data.bins)
      throw DataError("normalization statistics shape mismatch");
    data.gmvn = *stats;
  } else {
    // Normalization statistics from training frames only, merged in
    // manifest order.
    GmvnAccumulator acc(channels, data.bins);
    for (std::size_t i = 0; i < manifest.size(); ++i)
      if (manifest[i].split == "train")
        for (const MultiChannelSpectrum& f : loaded[i].frames) acc.add(f);
    data.gmvn = acc.finalize();
  }

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(loaded.size());
       ++i) {
    for (MultiChannelSpectrum& f : loaded[i].frames)
      f = gmvn_apply(f, data.gmvn);
    loaded[i].utt.stacks =
        lfr_stack(std::move(loaded[i].frames), cfg.lfr_factor);
  }

  for (std::size_t i = 0; i < manifest.size(); ++i) {
    auto& dst = manifest[i].split == "train"
                    ? data.train
                    : (manifest[i].split == "dev" ? data.dev : data.test);
    dst.push_back(std::move(loaded[i].utt));
  }
  return data;
}

void train_stage(Pipeline& p, const FeatureDataset& data, TrainStage stage,
                 const StageConfig& hp, const TrainConfig& cfg,
                 std::vector<MetricRow>& log) {
  if (data.train.empty()) throw DataError("empty training split");
  if (data.dev.empty()) throw DataError("empty dev split");
  if (hp.batch_size < 1) throw DataError("batch size must be positive");
  const int stage_no = static_cast<int>(stage);

  std::vector<std::pair<int, int>> order;  // (utterance, stack)
  for (std::size_t u = 0; u < data.train.size(); ++u)
    for (std::size_t s = 0; s < data.train[u].stacks.size(); ++s)
      order.emplace_back(static_cast<int>(u), static_cast<int>(s));
  if (order.empty()) throw DataError("training split has no feature stacks");
  const std::vector<StackExample> dev_flat = flatten(data.dev);
  if (dev_flat.empty()) throw DataError("dev split has no feature stacks");

  std::mt19937_64 rng(mix(cfg.seed ^ (0x5747u + stage_no)));
  int epoch = 0;

  const auto run_phase = [&](int epochs, FreezeMask freeze) {
    if (epochs <= 0) return;
    const std::vector<ParamView> views = trainable_params(p, stage, freeze);
    const std::size_t n = param_scalar_count(views);
    AdamState state(n);
    const AdamConfig adam{hp.lr, cfg.beta1, cfg.beta2, cfg.eps};
    std::vector<double> grad(n);
    GradWorkspace ws;
    std::vector<StackExample> batch;

    for (int e = 0; e < epochs; ++e) {
      ++epoch;
      seeded_shuffle(order, rng);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size();
           start += hp.batch_size) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
        batch.clear();
        for (std::size_t i = start; i < stop; ++i)
          batch.push_back({data.train[order[i].first].stacks[order[i].second],
                           data.train[order[i].first].label});
        const double loss = batch_gradient(p, batch, stage, freeze, grad, &ws);
        std::vector<double> flat = read_params(views);
        adam_step(flat, grad, state, adam);
        write_params(views, flat);
        loss_sum += loss * static_cast<double>(batch.size());
      }
      MetricRow row;
      row.epoch = epoch;
      row.stage = stage_no;
      row.train_loss = loss_sum / static_cast<double>(order.size());
      row.dev_loss = forward_loss(p, dev_flat, stage);
      row.dev_accuracy = split_accuracy(p, data.dev, stage);
      log.push_back(row);
    }
  };

  FreezeMask warm;
  int warm_epochs = std::min(hp.warmup_epochs, hp.epochs);
  switch (stage) {
    case TrainStage::kClassifierOnly:
      warm_epochs = 0;  // nothing upstream to hold fixed
      break;
    case TrainStage::kFePlusClassifier:
      warm.cls = true;
      break;
    case TrainStage::kJoint:
      warm.fe = true;
      warm.cls = true;
      break;
  }
  run_phase(warm_epochs, warm);
  run_phase(hp.epochs - warm_epochs, FreezeMask{});
}

TrainResult train_stagewise(const FeatureDataset& data, McTag tag,
                            const McConfig& mc_cfg,
                            const FrameConfig& frame_cfg,
                            const TrainConfig& cfg, int fe_filters, int hidden,
                            const SuperdirectiveWeights* sd_init,
                            const Pipeline* stage2_snapshot,
                            int stop_after_stage) {
  if (data.train.empty()) throw DataError("empty training split");
  if (data.dev.empty()) throw DataError("empty dev split");
  if (mc_cfg.channels != data.channels)
    throw DataError("variant channel count disagrees with the dataset");
  if (stop_after_stage < 1 || stop_after_stage > 3)
    throw DataError("stop_after_stage must be 1, 2, or 3");

  TrainResult res;
  if (stage2_snapshot) {
    if (stage2_snapshot->fe.bins != mc_cfg.bins ||
        stage2_snapshot->cls.classes != data.classes ||
        stage2_snapshot->frame_cfg.lfr_factor != frame_cfg.lfr_factor)
      throw DataError("stage-2 snapshot shape disagrees with this run");
    res.pipeline = *stage2_snapshot;
    res.pipeline.mc = assemble_variant(tag, mc_cfg, sd_init);
  } else {
    res.pipeline = make_pipeline(tag, mc_cfg, frame_cfg, fe_filters, hidden,
                                 data.classes, sd_init);
  }
  res.pipeline.gmvn = data.gmvn;

  if (!stage2_snapshot) {
    train_stage(res.pipeline, data, TrainStage::kClassifierOnly, cfg.stage1,
                cfg, res.log);
    if (stop_after_stage >= 2)
      train_stage(res.pipeline, data, TrainStage::kFePlusClassifier,
                  cfg.stage2, cfg, res.log);
  }
  if (stop_after_stage >= 3)
    train_stage(res.pipeline, data, TrainStage::kJoint, cfg.stage3, cfg,
                res.log);
  return res;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write metrics: " + path);
  os << "epoch,stage,train_loss,dev_loss,dev_accuracy\n";
  for (const MetricRow& r : log) {
    char line[256];
    std::snprintf(line, sizeof(line), "%d,%d,%.17g,%.17g,%.17g\n", r.epoch,
                  r.stage, r.train_loss, r.dev_loss, r.dev_accuracy);
    os << line;
  }
  if (!os) throw DataError("short write: " + path);
}

int classify_utterance(const Pipeline& p, const UtteranceFeatures& utt,
                       TrainStage stage) {
  std::vector<double> score(p.cls.classes, 0.0);
  for (const LfrStack& stack : utt.stacks) {
    const std::vector<double> logits = stack_logits(p, stack, stage, nullptr);
    // Accumulate log softmax: logit - logsumexp.
    const double top = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (const double v : logits) denom += std::exp(v - top);
    const double lse = top + std::log(denom);
    for (int c = 0; c < p.cls.classes; ++c) score[c] += logits[c] - lse;
  }
  int best = 0;
  for (int c = 1; c < p.cls.classes; ++c)
    if (score[c] > score[best]) best = c;
  return best;
}

EvalReport evaluate(const Pipeline& p,
                    const std::vector<UtteranceFeatures>& utts) {
  std::vector<int> pred(utts.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(utts.size()); ++u)
    pred[u] = classify_utterance(p, utts[u], TrainStage::kJoint);

  EvalReport rep;
  for (std::size_t u = 0; u < utts.size(); ++u) {
    const int bucket = snr_bucket(utts[u].snr_db);
    const int pb = utts[u].playback ? 1 : 0;
    const bool ok = pred[u] == utts[u].label;
    rep.cells[bucket][pb].total += 1;
    rep.cells[bucket][pb].correct += ok ? 1 : 0;
    rep.overall.total += 1;
    rep.overall.correct += ok ? 1 : 0;
  }
  return rep;
}

double relative_error_reduction(const BucketStat& model,
                                const BucketStat& baseline) {
  const double err_m = model.total ? 1.0 - model.accuracy() : 0.0;
  const double err_b = baseline.total ? 1.0 - baseline.accuracy() : 0.0;
  if (err_b <= 0.0)
    return err_m <= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return 100.0 * (err_b - err_m) / err_b;
}

}  // namespace fan
