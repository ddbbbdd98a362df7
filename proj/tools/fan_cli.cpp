// Command-line front end for the multi-channel acoustic pipeline:
// corpus synthesis, feature extraction, beampattern dumps, gradient
// checks, training, evaluation, and parameter accounting.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fan/array.hpp"
#include "fan/checkpoint.hpp"
#include "fan/error.hpp"
#include "fan/feature_io.hpp"
#include "fan/grad.hpp"
#include "fan/layers.hpp"
#include "fan/sim.hpp"
#include "fan/threads.hpp"
#include "fan/train.hpp"

namespace {

namespace fs = std::filesystem;

// The two perimeter mics sitting diagonally across the center of the
// default circular array; every corpus and model here is two-channel.
fan::ArrayGeometry default_pair() {
  const fan::ArrayGeometry full = fan::ArrayGeometry::default_circular();
  const auto [a, b] = fan::select_diagonal_pair(full);
  return full.subset({a, b});
}

fan::ArrayGeometry resolve_geometry(const std::string& path) {
  return path.empty() ? default_pair() : fan::load_geometry(path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw fan::DataError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir,
                 const std::string& geometry_path, std::uint64_t seed,
                 bool seed_given) {
  fan::CorpusSpec spec = spec_path.empty()
                             ? fan::default_corpus_spec()
                             : fan::parse_corpus_spec(read_text_file(spec_path));
  if (seed_given) spec.seed = seed;
  const fan::ArrayGeometry geom = resolve_geometry(geometry_path);
  const fan::BuildResult result = fan::build_corpus(spec, geom, out_dir);

  int split_counts[3] = {0, 0, 0};  // train, dev, test
  int bucket_counts[3][2] = {};     // [snr bucket][playback]
  for (const fan::ManifestEntry& e : result.manifest) {
    split_counts[e.split == "train" ? 0 : (e.split == "dev" ? 1 : 2)] += 1;
    bucket_counts[fan::snr_bucket(e.snr_db)][e.playback ? 1 : 0] += 1;
  }
  std::printf("wrote %zu utterances to %s (train %d, dev %d, test %d)\n",
              result.manifest.size(), out_dir.c_str(), split_counts[0],
              split_counts[1], split_counts[2]);
  for (int b = 0; b < 3; ++b)
    for (int pb = 0; pb < 2; ++pb)
      std::printf("  snr %-9s playback %d: %d\n",
                  fan::snr_bucket_label(b).c_str(), pb, bucket_counts[b][pb]);
  std::printf("clipped samples: %lld\n",
              static_cast<long long>(result.clipped_samples));
  std::printf("manifest: %s\n", (fs::path(out_dir) / "manifest.tsv").string().c_str());
  return 0;
}

int cmd_extract(const std::string& manifest_path, const std::string& out_dir) {
  const fan::CorpusManifest manifest = fan::read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  fs::create_directories(out_dir);
  const fan::FrameConfig cfg;

  int failures = 0;
  for (const fan::ManifestEntry& e : manifest) {
    try {
      const auto frames =
          fan::extract_features((base / e.path).string(), cfg);
      const fs::path out =
          fs::path(out_dir) / (fs::path(e.path).stem().string() + ".fanf");
      fan::write_fanf(out.string(), frames);
    } catch (const std::exception& ex) {
      std::fprintf(stderr, "error: %s: %s\n", e.path.c_str(), ex.what());
      ++failures;
    }
  }
  std::printf("wrote %zu feature files to %s\n", manifest.size() - failures,
              out_dir.c_str());
  if (failures) {
    std::fprintf(stderr, "%d of %zu files failed\n", failures, manifest.size());
    return 2;
  }
  return 0;
}

int cmd_params(const std::string& variant) {
  const fan::McTag tag = fan::parse_mc_tag(variant);
  const fan::McConfig cfg;  // M=2, K=127, D=12, N=24
  const fan::ParamBreakdown breakdown =
      fan::parameter_count(fan::assemble_variant(tag, cfg));

  std::printf("variant: %s\n", fan::to_string(tag).c_str());
  std::printf("  %-8s %12s %14s\n", "layer", "total", "weights-only");
  for (const fan::LayerParamCount& row : breakdown.layers)
    std::printf("  %-8s %12lld %14lld\n", row.name.c_str(),
                static_cast<long long>(row.total),
                static_cast<long long>(row.weights_only));
  std::printf("  %-8s %12lld\n", "total",
              static_cast<long long>(breakdown.total));

  // The headline comparison at the standard dimensions: one shared FAN
  // versus the full per-bin affine map over the BAT output.
  const std::int64_t fan_params =
      static_cast<std::int64_t>(cfg.filters) * cfg.directions + cfg.filters;
  const std::int64_t affine_params =
      static_cast<std::int64_t>(cfg.directions) * cfg.bins * cfg.bins +
      cfg.bins;
  std::printf("fan/affine ratio: %lld / %lld = %.4f%% (D=%d, K=%d, N=%d)\n",
              static_cast<long long>(fan_params),
              static_cast<long long>(affine_params),
              100.0 * static_cast<double>(fan_params) / affine_params,
              cfg.directions, cfg.bins, cfg.filters);
  return 0;
}

int cmd_beampattern(const std::string& out_dir,
                    const std::string& geometry_path, int directions,
                    double sigma2, double step_deg) {
  if (directions < 1) throw fan::DataError("need at least one direction");
  if (step_deg <= 0) throw fan::DataError("grid step must be positive");
  const fan::ArrayGeometry geom = resolve_geometry(geometry_path);
  const fan::FrameConfig cfg;
  std::vector<double> omegas(cfg.bins());
  for (int k = 0; k < cfg.bins(); ++k) omegas[k] = cfg.bin_omega(k);
  const fan::SuperdirectiveWeights sd = fan::superdirective_weights(
      geom, fan::uniform_look_directions(directions), omegas, sigma2);

  std::vector<double> grid;
  for (double az = 0.0; az < 360.0; az += step_deg)
    grid.push_back(az * std::numbers::pi / 180.0);

  fs::create_directories(out_dir);
  for (int d = 0; d < sd.directions; ++d) {
    for (int k = 0; k < sd.bins; ++k) {
      const std::vector<double> gains =
          fan::beampattern(sd.at(d, k), geom, omegas[k], grid);
      char name[64];
      std::snprintf(name, sizeof(name), "beam_d%02d_k%03d.csv", d, k);
      std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
      if (!os) throw fan::DataError("cannot write beampattern CSV");
      os << "azimuth_deg,gain\n";
      for (std::size_t i = 0; i < grid.size(); ++i) {
        char line[96];
        std::snprintf(line, sizeof(line), "%.6f,%.17g\n",
                      grid[i] * 180.0 / std::numbers::pi, gains[i]);
        os << line;
      }
    }
  }
  std::printf("wrote %d beampattern files to %s\n", sd.directions * sd.bins,
              out_dir.c_str());
  return 0;
}

int cmd_gradcheck(const std::string& variant, std::uint64_t seed) {
  // Small dimensions keep the finite-difference sweep fast while touching
  // every layer type.
  fan::McConfig cfg;
  cfg.channels = 2;
  cfg.bins = 5;
  cfg.directions = 3;
  cfg.filters = 2;

  std::vector<fan::McTag> tags;
  if (variant == "all") {
    for (int t = 0; t <= static_cast<int>(fan::McTag::kBatFanAvg); ++t)
      tags.push_back(static_cast<fan::McTag>(t));
  } else {
    tags.push_back(fan::parse_mc_tag(variant));
  }

  bool ok = true;
  for (const fan::McTag tag : tags) {
    fan::Pipeline p =
        fan::make_gradcheck_pipeline(tag, cfg, /*lfr=*/2, /*fe_filters=*/3,
                                     /*hidden=*/4, /*classes=*/2, seed);
    const std::vector<fan::StackExample> batch =
        fan::make_gradcheck_batch(p, 3, seed);
    const fan::GradCheckReport rep =
        fan::gradient_check(p, batch, fan::TrainStage::kJoint);
    const bool pass = rep.max_rel_err < 1e-4;
    ok = ok && pass;
    std::printf("%-11s max rel err %.3e over %zu params (worst %s): %s\n",
                fan::to_string(tag).c_str(), rep.max_rel_err, rep.checked,
                rep.worst_param.c_str(), pass ? "ok" : "FAIL");
  }
  if (!ok) throw fan::NumericError("gradient check exceeded 1e-4");
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& variant,
              const std::string& out_dir, const std::string& geometry_path,
              std::uint64_t seed, int epochs, double lr, bool random_init) {
  const fan::McTag tag = fan::parse_mc_tag(variant);
  const fan::FrameConfig frame_cfg;
  const fan::McConfig mc_cfg{2, frame_cfg.bins(), 12, 24, seed};

  fan::TrainConfig cfg;
  cfg.seed = seed;
  if (epochs > 0) {
    cfg.stage1.epochs = epochs;
    cfg.stage2.epochs = epochs;
    cfg.stage3.epochs = epochs;
  }
  if (lr > 0) {
    cfg.stage1.lr = lr;
    cfg.stage2.lr = lr;
    cfg.stage3.lr = lr;
  }

  std::printf("loading dataset from %s\n", manifest_path.c_str());
  int classes = 0;
  for (const fan::ManifestEntry& e : fan::read_manifest(manifest_path))
    classes = std::max(classes, e.class_id + 1);
  const fan::FeatureDataset data =
      fan::load_dataset(manifest_path, frame_cfg, classes);
  std::printf("train %zu, dev %zu, test %zu utterances (%d channels)\n",
              data.train.size(), data.dev.size(), data.test.size(),
              data.channels);

  const bool wants_sd = !random_init && (tag == fan::McTag::kBatAt ||
                                         tag == fan::McTag::kBatFanMax ||
                                         tag == fan::McTag::kBatFanAvg);
  fan::SuperdirectiveWeights sd;
  if (wants_sd) {
    const fan::ArrayGeometry geom = resolve_geometry(geometry_path);
    std::vector<double> omegas(frame_cfg.bins());
    for (int k = 0; k < frame_cfg.bins(); ++k) omegas[k] = frame_cfg.bin_omega(k);
    sd = fan::superdirective_weights(
        geom, fan::uniform_look_directions(mc_cfg.directions), omegas);
  }

  const fan::TrainResult result =
      fan::train_stagewise(data, tag, mc_cfg, frame_cfg, cfg,
                           /*fe_filters=*/64, /*hidden=*/128,
                           wants_sd ? &sd : nullptr);

  fs::create_directories(out_dir);
  const fs::path ckpt = fs::path(out_dir) / "checkpoint.fanm";
  const fs::path csv = fs::path(out_dir) / "metrics.csv";
  fan::write_checkpoint(ckpt.string(), result.pipeline);
  fan::write_metrics_csv(csv.string(), result.log);

  for (const fan::MetricRow& r : result.log)
    std::printf("stage %d epoch %d: train loss %.4f, dev loss %.4f, "
                "dev accuracy %.4f\n",
                r.stage, r.epoch, r.train_loss, r.dev_loss, r.dev_accuracy);
  std::printf("checkpoint: %s\nmetrics: %s\n", ckpt.string().c_str(),
              csv.string().c_str());
  return 0;
}

void print_report(const fan::EvalReport& rep, const fan::EvalReport* base,
                  const std::string& csv_path) {
  std::printf("%-10s %-9s %6s %8s %9s", "snr", "playback", "total", "correct",
              "accuracy");
  if (base) std::printf(" %8s", "rer%");
  std::printf("\n");

  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path, std::ios::binary);
    if (!csv) throw fan::DataError("cannot write report CSV: " + csv_path);
    csv << "snr_bucket,playback,total,correct,accuracy";
    if (base) csv << ",relative_error_reduction";
    csv << "\n";
  }

  const auto emit = [&](const std::string& label, int pb,
                        const fan::BucketStat& stat,
                        const fan::BucketStat* bstat) {
    std::printf("%-10s %-9s %6d %8d %9.4f", label.c_str(),
                pb < 0 ? "-" : (pb ? "yes" : "no"), stat.total, stat.correct,
                stat.accuracy());
    if (bstat) std::printf(" %8.2f", fan::relative_error_reduction(stat, *bstat));
    std::printf("\n");
    if (csv.is_open()) {
      char line[160];
      if (bstat)
        std::snprintf(line, sizeof(line), "%s,%d,%d,%d,%.17g,%.17g\n",
                      label.c_str(), pb < 0 ? -1 : pb, stat.total, stat.correct,
                      stat.accuracy(),
                      fan::relative_error_reduction(stat, *bstat));
      else
        std::snprintf(line, sizeof(line), "%s,%d,%d,%d,%.17g\n", label.c_str(),
                      pb < 0 ? -1 : pb, stat.total, stat.correct,
                      stat.accuracy());
      csv << line;
    }
  };

  for (int b = 0; b < 3; ++b)
    for (int pb = 0; pb < 2; ++pb)
      emit(fan::snr_bucket_label(b), pb, rep.cells[b][pb],
           base ? &base->cells[b][pb] : nullptr);
  emit("overall", -1, rep.overall, base ? &base->overall : nullptr);
}

int cmd_eval(const std::string& manifest_path, const std::string& ckpt_path,
             const std::string& baseline_path, const std::string& split,
             const std::string& csv_path) {
  const fan::Pipeline model = fan::read_checkpoint(ckpt_path);
  const fan::FeatureDataset data =
      fan::load_dataset(manifest_path, model.frame_cfg, model.cls.classes,
                        &model.gmvn);
  const std::vector<fan::UtteranceFeatures>& utts =
      split == "train" ? data.train : (split == "dev" ? data.dev : data.test);
  if (utts.empty()) throw fan::DataError("selected split is empty: " + split);

  const fan::EvalReport rep = fan::evaluate(model, utts);
  fan::EvalReport base_rep;
  bool has_base = false;
  if (!baseline_path.empty()) {
    const fan::Pipeline baseline = fan::read_checkpoint(baseline_path);
    if (baseline.cls.classes != model.cls.classes)
      throw fan::DataError("baseline class count differs from the model");
    const fan::FeatureDataset base_data = fan::load_dataset(
        manifest_path, baseline.frame_cfg, baseline.cls.classes,
        &baseline.gmvn);
    const std::vector<fan::UtteranceFeatures>& base_utts =
        split == "train" ? base_data.train
                         : (split == "dev" ? base_data.dev : base_data.test);
    base_rep = fan::evaluate(baseline, base_utts);
    has_base = true;
  }
  print_report(rep, has_base ? &base_rep : nullptr, csv_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-channel acoustic front-end toolkit"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "cap for parallel workers (0 = auto)");

  std::string spec_path, out_path, geometry_path, manifest_path;
  std::string variant = "all", checkpoint_path, baseline_path;
  std::string split = "test", csv_path;
  std::uint64_t seed = 1;
  int epochs = 0, directions = 12;
  double lr = 0.0, sigma2 = 1e-2, step_deg = 1.0;
  bool random_init = false;

  CLI::App* sim = app.add_subcommand("simulate", "synthesize a labeled corpus");
  sim->add_option("--spec", spec_path, "corpus spec JSON (default recipe if omitted)");
  sim->add_option("--out", out_path, "output directory")->required();
  sim->add_option("--geometry", geometry_path, "mic positions file (x y z rows)");
  CLI::Option* sim_seed =
      sim->add_option("--seed", seed, "overrides the corpus spec seed");

  CLI::App* ext = app.add_subcommand("extract", "write DFT feature files");
  ext->add_option("--manifest", manifest_path, "corpus manifest")->required();
  ext->add_option("--out", out_path, "output directory")->required();

  CLI::App* par = app.add_subcommand("params", "per-layer parameter counts");
  par->add_option("--variant", variant, "module variant")->required();

  CLI::App* beam = app.add_subcommand("beampattern", "spatial response CSVs");
  beam->add_option("--out", out_path, "output directory")->required();
  beam->add_option("--geometry", geometry_path, "mic positions file (x y z rows)");
  beam->add_option("--directions", directions, "look direction count");
  beam->add_option("--sigma2", sigma2, "diagonal loading");
  beam->add_option("--step-deg", step_deg, "azimuth grid step in degrees");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check");
  gc->add_option("--variant", variant, "module variant or 'all'");
  gc->add_option("--seed", seed, "initialization seed");

  CLI::App* tr = app.add_subcommand("train", "stage-wise training run");
  tr->add_option("--manifest", manifest_path, "corpus manifest")->required();
  tr->add_option("--variant", variant, "module variant")->required();
  tr->add_option("--out", out_path, "output directory")->required();
  tr->add_option("--geometry", geometry_path, "mic positions file (x y z rows)");
  tr->add_option("--seed", seed, "training seed");
  tr->add_option("--epochs", epochs, "epochs per stage (0 = defaults)");
  tr->add_option("--lr", lr, "learning rate (0 = default)");
  tr->add_flag("--random-init", random_init, "skip superdirective initialization");

  CLI::App* ev = app.add_subcommand("eval", "bucketed accuracy report");
  ev->add_option("--manifest", manifest_path, "corpus manifest")->required();
  ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  ev->add_option("--baseline-checkpoint", baseline_path,
                 "baseline for relative error reduction");
  ev->add_option("--split", split, "train | dev | test")
      ->check(CLI::IsMember({"train", "dev", "test"}));
  ev->add_option("--out", csv_path, "also write the report as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    fan::set_num_threads(threads);
    if (sim->parsed())
      return cmd_simulate(spec_path, out_path, geometry_path, seed,
                          sim_seed->count() > 0);
    if (ext->parsed()) return cmd_extract(manifest_path, out_path);
    if (par->parsed()) return cmd_params(variant);
    if (beam->parsed())
      return cmd_beampattern(out_path, geometry_path, directions, sigma2,
                             step_deg);
    if (gc->parsed()) return cmd_gradcheck(variant, seed);
    if (tr->parsed())
      return cmd_train(manifest_path, variant, out_path, geometry_path, seed,
                       epochs, lr, random_init);
    if (ev->parsed())
      return cmd_eval(manifest_path, checkpoint_path, baseline_path, split,
                      csv_path);
  } catch (const fan::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const fan::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
