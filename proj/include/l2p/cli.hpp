#pragma once

// Command-line front end: synth, train, predict, eval, export, pipeline.
// run() is the whole program minus main(), so tests can drive it in-process.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "l2p/dataset_io.hpp"
#include "l2p/evaluate.hpp"

namespace l2p::cli {

namespace fs = std::filesystem;

struct SynthOptions {
  int count = 10;
  std::uint64_t seed = 0;
  int size = 64;
  int subsample = 4;
  std::string mode = "reflectance_distance";
  double test_fraction = 0.2;
  double black_probability = 0.25;
  int min_cars = 1;
  int max_cars = 4;
  std::string out = "dataset";
};

struct TrainOptions {
  std::string dataset = "dataset";
  std::string preset = "exp2";
  std::optional<int> epochs;
  std::uint64_t seed = 0;
  int base_filters = 32;
  int disc_layers = 3;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double lambda_l1 = 100.0;
  double val_fraction = 0.1;
  std::string out = "model.l2ck";
  std::string last;
  std::string log;
};

struct PredictOptions {
  std::string checkpoint;
  std::string input;
  std::string out;
};

struct DetectorOptions {
  double color_tolerance = 0.2;
  int min_area = 4;
  double iou = 0.3;

  DetectorConfig config() const { return {color_tolerance, min_area, iou}; }
};

struct EvalOptions {
  std::string checkpoint;
  std::string dataset = "dataset";
  std::string split = "test";
  std::string report = "eval.csv";
  bool ground_truth = false;
  DetectorOptions det;
};

struct ExportOptions {
  std::string checkpoint;
  std::string dataset = "dataset";
  std::string split = "test";
  std::string out = "frames";
  int limit = 0;
  int separator = 2;
};

struct PipelineOptions {
  std::string out = "run";
  SynthOptions synth{250};
  TrainOptions train;
  DetectorOptions det;
};

// ---------------------------------------------------------------------------

inline ChannelMode preset_mode(const std::string& preset, ChannelMode dataset_mode) {
  if (preset == "custom") return dataset_mode;
  return l2p::preset(preset).mode;
}

inline int depth_for_size(int width, int height) {
  if (width != height) throw InvalidArgument("images must be square, got " + std::to_string(width) + "x" + std::to_string(height));
  int depth = 0;
  while ((1 << depth) < width) ++depth;
  if ((1 << depth) != width) throw InvalidArgument("image size " + std::to_string(width) + " is not a power of two");
  return depth;
}

inline DatasetManifest cmd_synth(const SynthOptions& o, std::ostream& out) {
  DatasetOptions d;
  d.count = o.count;
  d.seed = o.seed;
  d.size = o.size;
  d.subsample = o.subsample;
  d.mode = parse_channel_mode(o.mode);
  d.scene.black_car_probability = o.black_probability;
  d.scene.min_cars = o.min_cars;
  d.scene.max_cars = o.max_cars;
  if (!(o.test_fraction > 0.0 && o.test_fraction < 1.0)) throw InvalidArgument("--test-fraction must be in (0,1)");
  if (d.count < 2) throw InvalidArgument("--count must be >= 2 so both splits can be non-empty");
  depth_for_size(o.size, o.size);
  // Refuse before rendering anything when the split would be empty on one side.
  const auto n_test = std::llround(o.count * o.test_fraction);
  if (n_test < 1 || n_test >= o.count) {
    throw InvalidArgument("--test-fraction " + detail::num(o.test_fraction) + " leaves an empty split for " +
                          std::to_string(o.count) + " pairs");
  }
  DatasetManifest m = split(build_dataset(d, o.out), o.test_fraction, o.seed);
  write_manifest(m);
  out << (m.root / "manifest.txt").string() << "\n";
  out << m.split_entries("train").size() << " train / " << m.split_entries("test").size() << " test pairs\n";
  return m;
}

inline Checkpoint cmd_train(const TrainOptions& o, std::ostream& out) {
  const DatasetManifest m = read_manifest(o.dataset);
  TrainConfig cfg;
  if (o.preset == "custom") {
    cfg.mode = m.mode;
  } else {
    cfg = l2p::preset(o.preset);
    if (cfg.mode != m.mode) {
      throw InvalidArgument("preset " + o.preset + " expects " + std::string(to_string(cfg.mode)) + " (" +
                            std::to_string(channel_count(cfg.mode)) + " channel) input but dataset " + o.dataset +
                            " is " + std::string(to_string(m.mode)) + " (" + std::to_string(channel_count(m.mode)) +
                            " channel)");
    }
  }
  if (o.epochs) cfg.epochs = *o.epochs;
  cfg.seed = o.seed;
  cfg.learning_rate = o.learning_rate;
  cfg.adam_beta1 = o.beta1;
  cfg.lambda_l1 = o.lambda_l1;
  cfg.validate();
  if (!(o.val_fraction >= 0.0 && o.val_fraction < 1.0)) throw InvalidArgument("--val-fraction must be in [0,1)");
  const ModelConfig model = ModelConfig::standard(channel_count(m.mode), depth_for_size(m.width, m.height),
                                                  o.base_filters, o.disc_layers);
  model.validate();

  const auto entries = m.split_entries("train");
  if (entries.empty()) throw InvalidArgument("dataset " + o.dataset + " has no training pairs");
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(entries.size()) * o.val_fraction));
  const bool use_val = n_val >= 1 && n_val < entries.size();
  if (use_val) Rng(o.seed ^ 0x5851F42D4C957F2Dull).shuffle(order);
  std::vector<TrainingPair> data, validation;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const LoadedPair p = load_pair(m, entries[order[k]]);
    (use_val && k < n_val ? validation : data).push_back(make_training_pair(p.input, p.target));
  }
  out << "training on " << data.size() << " pairs, validating on " << validation.size() << ", " << cfg.epochs
      << " epochs, mode " << to_string(cfg.mode) << "\n";

  const fs::path log_path = o.log.empty() ? fs::path(o.out).replace_extension(".csv") : fs::path(o.log);
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write " + log_path.string());
  log << "epoch,d_loss,g_loss,g_l1,val_l1\n";
  const TrainResult r = train(data, validation, model, cfg, [&](const EpochLog& e) {
    const std::string val = std::isnan(e.val_l1) ? std::string("nan") : detail::num(e.val_l1);
    log << e.epoch << "," << detail::num(e.d_loss) << "," << detail::num(e.g_loss) << "," << detail::num(e.g_l1)
        << "," << val << "\n";
    log.flush();
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %d/%d d_loss=%.4f g_loss=%.4f l1=%.4f val_l1=%.4f\n", e.epoch,
                  cfg.epochs, e.d_loss, e.g_loss, e.g_l1, e.val_l1);
    out << line << std::flush;
  });
  if (!log) throw IoError("failed writing " + log_path.string());
  save_checkpoint(o.out, r.best);
  if (!o.last.empty()) save_checkpoint(o.last, r.last);
  out << "checkpoint " << o.out << " (epoch " << r.best.epoch << ")\n";
  return r.best;
}

inline void cmd_predict(const PredictOptions& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const auto& g = ck.config.gen;
  const fs::path in(o.input);
  RasterImage raster;
  if (in.extension() == ".l2ri") {
    raster = read_raster(in);
  } else if (in.extension() == ".l2pc" || in.extension() == ".csv") {
    raster = project_frame(read_point_cloud(in), SensorConfig{}, mode_for_channels(g.input_channels), g.image_size(),
                           g.image_size());
  } else {
    throw InvalidArgument("unsupported input " + o.input + " (expected .l2ri, .l2pc or .csv)");
  }
  const RasterImage image = predict(ck, raster);
  const fs::path dst(o.out);
  if (dst.extension() == ".l2ri") {
    write_raster(dst, image);
  } else if (dst.extension() == ".png") {
    write_png(dst, image);
  } else {
    throw InvalidArgument("unsupported output " + o.out + " (expected .png or .l2ri)");
  }
  out << dst.string() << "\n";
}

inline std::vector<EvalSample> load_nonempty_split(const std::string& dataset, const std::string& which) {
  if (which != "train" && which != "test") throw InvalidArgument("--split must be train or test");
  const DatasetManifest m = read_manifest(dataset);
  auto samples = load_split(m, which);
  if (samples.empty()) throw InvalidArgument("split '" + which + "' of dataset " + dataset + " is empty");
  return samples;
}

inline EvalReport cmd_eval(const EvalOptions& o, std::ostream& out) {
  const auto samples = load_nonempty_split(o.dataset, o.split);
  EvalReport r;
  if (o.ground_truth) {
    r = evaluate_ground_truth(samples, o.det.config());
  } else {
    if (o.checkpoint.empty()) throw InvalidArgument("--checkpoint is required unless --ground-truth is given");
    r = evaluate_run(load_checkpoint(o.checkpoint), samples, o.det.config());
  }
  detail::write_text_file(o.report, format_report_csv(r));
  out << summary_line(r) << "\n";
  out << "black cars detected: " << r.black_detected() << "/" << r.black_total() << "\n";
  return r;
}

// input preview | prediction | target, separated by white columns.
inline RasterImage compose_frame(const RasterImage& input, const RasterImage& predicted, const RasterImage& target,
                                 int separator) {
  const int s = input.width;
  RasterImage frame(3 * s + 2 * separator, input.height, 3);
  std::fill(frame.values.begin(), frame.values.end(), 1.0f);
  auto blit = [&](const RasterImage& src, int x0, bool gray) {
    for (int c = 0; c < 3; ++c) {
      for (int v = 0; v < src.height; ++v) {
        for (int u = 0; u < src.width; ++u) frame.at(c, v, x0 + u) = src.at(gray ? 0 : c, v, u);
      }
    }
  };
  blit(input, 0, true);
  blit(predicted, s + separator, false);
  blit(target, 2 * (s + separator), false);
  return frame;
}

inline int cmd_export(const ExportOptions& o, std::ostream& out) {
  if (o.limit < 0) throw InvalidArgument("--limit must be >= 0");
  if (o.separator < 0) throw InvalidArgument("--separator must be >= 0");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const auto samples = load_nonempty_split(o.dataset, o.split);
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create " + o.out + ": " + ec.message());
  Predictor predictor(ck);
  const std::size_t n = o.limit == 0 ? samples.size() : std::min<std::size_t>(samples.size(), o.limit);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = samples[i];
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05zu.png", i);
    write_png(fs::path(o.out) / name, compose_frame(s.input, predictor.predict(s.input), s.target, o.separator));
  }
  out << n << " frames in " << o.out << "\n";
  return static_cast<int>(n);
}

inline EvalReport cmd_pipeline(const PipelineOptions& o, std::ostream& out) {
  SynthOptions synth = o.synth;
  synth.out = (fs::path(o.out) / "dataset").string();
  synth.mode = std::string(to_string(preset_mode(o.train.preset, parse_channel_mode(synth.mode))));
  cmd_synth(synth, out);
  TrainOptions train = o.train;
  train.dataset = synth.out;
  train.out = (fs::path(o.out) / "model.l2ck").string();
  train.log = (fs::path(o.out) / "train_log.csv").string();
  cmd_train(train, out);
  EvalOptions ev;
  ev.checkpoint = train.out;
  ev.dataset = synth.out;
  ev.report = (fs::path(o.out) / "eval.csv").string();
  ev.det = o.det;
  return cmd_eval(ev, out);
}

// ---------------------------------------------------------------------------
// Option wiring.

inline void add_synth_flags(CLI::App& app, SynthOptions& o, bool with_out) {
  app.add_option("--count", o.count, "number of scene pairs")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "base scene seed (pair i uses seed + i); also seeds the split");
  app.add_option("--size", o.size, "image side in pixels (power of two)");
  app.add_option("--subsample", o.subsample, "fire every n-th ray in each direction")->check(CLI::PositiveNumber);
  app.add_option("--mode", o.mode, "raster channels: reflectance | reflectance_distance");
  app.add_option("--test-fraction", o.test_fraction, "share of pairs assigned to the test split");
  app.add_option("--black-probability", o.black_probability, "chance that a car is painted black");
  app.add_option("--min-cars", o.min_cars, "fewest cars per scene");
  app.add_option("--max-cars", o.max_cars, "most cars per scene");
  if (with_out) app.add_option("--out", o.out, "output dataset directory");
}

inline void add_train_flags(CLI::App& app, TrainOptions& o, bool with_paths) {
  // The pipeline already has a --seed for scenes.
  const std::string seed_flag = with_paths ? "--seed" : "--train-seed";
  if (with_paths) app.add_option("--dataset", o.dataset, "dataset directory or manifest");
  app.add_option("--preset", o.preset, "exp1 (reflectance, 50 epochs) | exp2 (reflectance+distance, 40 epochs) | custom")
      ->check(CLI::IsMember({"exp1", "exp2", "custom"}));
  app.add_option("--epochs", o.epochs, "override the preset epoch count (custom default 40)");
  app.add_option(seed_flag, o.seed, "initialization, shuffling and dropout seed");
  app.add_option("--base-filters", o.base_filters, "filters in the first generator/discriminator layer")
      ->check(CLI::PositiveNumber);
  app.add_option("--disc-layers", o.disc_layers, "stride-2 discriminator layers");
  app.add_option("--lr", o.learning_rate, "Adam learning rate");
  app.add_option("--beta1", o.beta1, "Adam beta1");
  app.add_option("--lambda-l1", o.lambda_l1, "weight of the L1 term in the generator loss");
  app.add_option("--val-fraction", o.val_fraction, "share of training pairs held out to pick the best epoch");
  if (with_paths) {
    app.add_option("--out", o.out, "checkpoint path (best validation epoch)");
    app.add_option("--last", o.last, "optional path for the final-epoch checkpoint");
    app.add_option("--log", o.log, "per-epoch CSV (default: checkpoint path with .csv)");
  }
}

inline void add_detector_flags(CLI::App& app, DetectorOptions& o) {
  app.add_option("--color-tolerance", o.color_tolerance, "per-channel color match tolerance");
  app.add_option("--min-area", o.min_area, "smallest blob counted, in pixels");
  app.add_option("--iou", o.iou, "box overlap needed to count a car as detected");
}

// Expands `--config <file>` into `--key=value` arguments placed right after the
// subcommand name, so flags given on the command line win.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  std::vector<std::string> extra;
  const std::string text = detail::read_text_file(*path);
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError(*path + ": expected key=value at line " + std::to_string(line_no));
    }
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::string value = line.substr(eq + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    extra.push_back("--" + key + "=" + value);
  }
  const std::size_t at = args.empty() ? 0 : 1;
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), extra.begin(), extra.end());
  return args;
}

inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"LiDAR-to-photo translation with a conditional GAN", "l2p"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");
  app.add_option("--config", "key=value file; flags on the command line override it");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic paired dataset and split it");
  add_synth_flags(*synth_cmd, synth, true);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a model on the train split of a dataset");
  add_train_flags(*train_cmd, train, true);

  PredictOptions pred;
  auto* pred_cmd = app.add_subcommand("predict", "translate one raster (.l2ri) or point cloud (.l2pc/.csv) to an image");
  pred_cmd->add_option("--checkpoint", pred.checkpoint, "trained checkpoint")->required();
  pred_cmd->add_option("--input", pred.input, "input raster or point cloud")->required();
  pred_cmd->add_option("--out", pred.out, "output image (.png or .l2ri)")->required();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "car-presence score of a checkpoint on a dataset split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "trained checkpoint");
  eval_cmd->add_option("--dataset", ev.dataset, "dataset directory or manifest");
  eval_cmd->add_option("--split", ev.split, "train | test");
  eval_cmd->add_option("--report", ev.report, "per-pair CSV report");
  eval_cmd->add_flag("--ground-truth", ev.ground_truth, "score the target images instead of predictions");
  add_detector_flags(*eval_cmd, ev.det);

  ExportOptions ex;
  auto* export_cmd = app.add_subcommand("export", "write side-by-side frames: input | prediction | target");
  export_cmd->add_option("--checkpoint", ex.checkpoint, "trained checkpoint")->required();
  export_cmd->add_option("--dataset", ex.dataset, "dataset directory or manifest");
  export_cmd->add_option("--split", ex.split, "train | test");
  export_cmd->add_option("--out", ex.out, "frame directory");
  export_cmd->add_option("--limit", ex.limit, "at most this many frames (0 = all)");
  export_cmd->add_option("--separator", ex.separator, "white gap between panels, in pixels");

  PipelineOptions pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "synth, train and eval in one go");
  pipe_cmd->add_option("--out", pipe.out, "working directory");
  add_synth_flags(*pipe_cmd, pipe.synth, false);
  add_train_flags(*pipe_cmd, pipe.train, false);
  add_detector_flags(*pipe_cmd, pipe.det);

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  try {
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*synth_cmd) {
      cmd_synth(synth, out);
    } else if (*train_cmd) {
      cmd_train(train, out);
    } else if (*pred_cmd) {
      cmd_predict(pred, out);
    } else if (*eval_cmd) {
      cmd_eval(ev, out);
    } else if (*export_cmd) {
      cmd_export(ex, out);
    } else if (*pipe_cmd) {
      cmd_pipeline(pipe, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace l2p::cli
