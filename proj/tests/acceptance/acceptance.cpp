// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [--only N ...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "../gradcheck.hpp"
#include "../oracles.hpp"
#include "../support.hpp"
#include "l2p/cli.hpp"
#include "l2p/evaluate.hpp"

using namespace l2p;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t tree_hash(const std::filesystem::path& root) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [name, bytes] : fixture::snapshot(root)) h = fnv1a(bytes, fnv1a(name, h));
  return h;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "l2p");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<std::pair<int, int>> counts(1 + rng.below(40));
    std::vector<PairCounts> pc;
    for (auto& [np, ng] : counts) {
      ng = static_cast<int>(rng.below(6));
      np = static_cast<int>(rng.below(8));
    }
    counts[rng.below(counts.size())].second = 1 + static_cast<int>(rng.below(5));
    for (auto [np, ng] : counts) pc.push_back({np, ng});
    worst = std::max(worst, std::abs(score(pc).score - oracle::score(counts)));
  }
  const double fixed = score(std::vector<PairCounts>{{2, 4}, {3, 3}}).score;
  return {worst <= 1e-12 && fixed == 0.75, "max |diff| " + fmt("%.3g", worst) + ", [(2,4),(3,3)] -> " + fmt("%.17g", fixed)};
}

Outcome projection_oracle() {
  const SensorConfig cfg;
  Rng rng(99);
  int identical = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud cloud = oracle::random_cloud(rng, 1000);
    const auto mode = trial % 2 ? ChannelMode::ReflectanceOnly : ChannelMode::ReflectanceAndDistance;
    identical += project_frame(cloud, cfg, mode, 64, 32) == oracle::projection(cloud, cfg, mode, 64, 32);
  }
  int pixels = 0;
  for (int i = 0; i < 10000; ++i) {
    const LidarPoint p{rng.uniform(-5, 80), rng.uniform(-80, 80), rng.uniform(-15, 15), 0.5};
    pixels += pixel_of(cartesian_to_spherical(p), cfg, 64, 64) == oracle::pixel(p, cfg, 64, 64);
  }
  return {identical == 100 && pixels == 10000,
          std::to_string(identical) + "/100 rasters bit-identical, " + std::to_string(pixels) + "/10000 pixels"};
}

Outcome geometry_oracle() {
  const SceneSpec empty;
  Rng rng(8);
  double worst_plane = 0.0;
  int plane_hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const double az = rng.uniform(-57, 57);
    const double el = rng.uniform(-12.4, -0.05);
    const auto hit = cast_ray(empty, direction_of(az, el));
    if (!hit || hit->kind != SurfaceKind::Ground) continue;
    ++plane_hits;
    worst_plane = std::max(worst_plane, std::abs(hit->range - empty.sensor_height / std::sin(-el * kDegToRad)));
  }
  double worst_box = 0.0;
  int box_hits = 0;
  for (int checked = 0; checked < 1000;) {
    const auto fc = oracle::random_face_case(rng, -empty.sensor_height);
    if (!fc) continue;
    ++checked;
    const double r = oracle::norm(fc->point);
    const auto hit = intersect_cuboid(fc->box, -empty.sensor_height, {fc->point[0] / r, fc->point[1] / r, fc->point[2] / r});
    if (!hit) continue;
    ++box_hits;
    worst_box = std::max(worst_box, std::abs(hit->first - r));
  }
  return {plane_hits == 1000 && box_hits == 1000 && worst_plane <= 1e-6 && worst_box <= 1e-6,
          "plane " + std::to_string(plane_hits) + "/1000 max err " + fmt("%.3g", worst_plane) + " m, box " +
              std::to_string(box_hits) + "/1000 max err " + fmt("%.3g", worst_box) + " m"};
}

Outcome gradient_check() {
  double worst = 0.0;
  int directions = 0;
  for (int in : {1, 2}) {
    Pix2PixModel<double> model(fixture::micro_config(in));
    model.init(100 + in);
    Rng rng(200 + in);
    const auto x = fixture::uniform_tensor(rng, in, 16, 16);
    const auto y = fixture::uniform_tensor(rng, 3, 16, 16);
    for (const auto& r : {fixture::check_generator_loss(model, x, y, 100.0, 10, rng),
                          fixture::check_discriminator_loss(model, x, y, 10, rng)}) {
      worst = std::max(worst, r.max_rel_error);
      directions += r.directions;
    }
  }
  return {worst < 1e-3 && directions >= 40,
          "generator and discriminator losses, both channel modes, " + std::to_string(directions) +
              " directions, max rel err " + fmt("%.3g", worst)};
}

// Passes when at least `need` of the seeds pass; stops once that is settled.
Outcome best_of_seeds(const std::vector<std::uint64_t>& seeds, int need,
                      const std::function<Outcome(std::uint64_t)>& run_seed) {
  int passed = 0, failed = 0;
  std::string detail;
  for (std::uint64_t seed : seeds) {
    if (passed >= need || failed > static_cast<int>(seeds.size()) - need) break;
    const Outcome o = run_seed(seed);
    (o.pass ? passed : failed) += 1;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": " + o.detail +
              (o.pass ? " ok" : " FAIL");
    std::printf("    seed %llu: %s\n", static_cast<unsigned long long>(seed), o.detail.c_str());
    std::fflush(stdout);
  }
  return {passed >= need, std::to_string(passed) + " seed(s) passed (" + detail + ")"};
}

Outcome memorization() {
  const SensorConfig sensor;
  const auto pair = render_pair(generate_scene(1000, {}, sensor), sensor, ChannelMode::ReflectanceAndDistance, 64, 4);
  const TrainingPair tp = make_training_pair(pair.input, quantize_8bit(pair.target));
  return best_of_seeds({1, 2, 3}, 2, [&](std::uint64_t seed) {
    TrainConfig cfg = preset("exp2");
    cfg.epochs = 2000;
    cfg.seed = seed;
    const auto r = train({tp}, {}, ModelConfig::standard(2, 6, 32, 3), cfg);
    Predictor pred(r.last);
    const double mae = mean_abs_error(pred.forward(tp.input), tp.target);
    return Outcome{mae < 0.08, "MAE " + fmt("%.4f", mae)};
  });
}

Outcome desk_scale() {
  fixture::TempDir dir;
  DatasetOptions opt;
  opt.count = 250;
  opt.seed = 1000;
  const DatasetManifest m = split(build_dataset(opt, dir / "data"), 0.2, 1);
  const auto train_samples = load_split(m, "train");
  const auto test_samples = load_split(m, "test");
  // Validation scenes come from a disjoint seed range and only select the checkpoint.
  opt.count = 20;
  opt.seed = 50000;
  const DatasetManifest vm = build_dataset(opt, dir / "val");
  const auto val_pairs = to_training_pairs(load_split(vm, "train"));
  const auto train_pairs = to_training_pairs(train_samples);
  const EvalReport gt = evaluate_ground_truth(test_samples);
  std::printf("    %zu train / %zu test pairs, ground-truth score %.3f, %d black cars in test\n", train_samples.size(),
              test_samples.size(), gt.score, gt.black_total());
  std::fflush(stdout);
  if (train_samples.size() != 200 || test_samples.size() != 50) return {false, "unexpected split sizes"};

  return best_of_seeds({1, 2, 3}, 2, [&](std::uint64_t seed) {
    TrainConfig cfg = preset("exp2");
    cfg.seed = seed;
    const auto r = train(train_pairs, val_pairs, ModelConfig::standard(2, 6, 32, 3), cfg);
    const EvalReport rep = evaluate_run(r.best, test_samples);
    const double black = rep.black_total() ? static_cast<double>(rep.black_detected()) / rep.black_total() : 0.0;
    return Outcome{rep.score >= 0.6 && black >= 0.5,
                   "epoch " + std::to_string(r.best.epoch) + " score " + fmt("%.3f", rep.score) + ", black cars " +
                       std::to_string(rep.black_detected()) + "/" + std::to_string(rep.black_total())};
  });
}

Outcome determinism() {
  ::setenv("L2P_DETERMINISTIC", "1", 1);
  fixture::TempDir dir;
  std::vector<std::string> notes;
  bool ok = true;

  auto synth = [&](const std::string& name) {
    return run_cli({"synth", "--count", "10", "--seed", "7", "--size", "16", "--out", (dir / name).string()});
  };
  ok &= synth("a") == 0 && synth("b") == 0;
  const bool synth_same = ok && tree_hash(dir / "a") == tree_hash(dir / "b");
  notes.push_back(std::string("synth ") + (synth_same ? "identical" : "DIFFERS"));

  auto train = [&](const std::string& name) {
    return run_cli({"train", "--dataset", (dir / "a").string(), "--preset", "exp2", "--base-filters", "4",
                    "--disc-layers", "2", "--seed", "3", "--out", (dir / (name + ".l2ck")).string()});
  };
  ok &= train("r1") == 0 && train("r2") == 0;
  const bool logs_same = ok && fixture::slurp(dir / "r1.csv") == fixture::slurp(dir / "r2.csv") &&
                         fixture::slurp(dir / "r1.l2ck") == fixture::slurp(dir / "r2.l2ck");
  notes.push_back(std::string("training logs ") + (logs_same ? "identical" : "DIFFER"));

  bool round_trip = false;
  if (ok) {
    const Checkpoint ck = load_checkpoint(dir / "r1.l2ck");
    save_checkpoint(dir / "again.l2ck", ck);
    round_trip = fnv1a(fixture::slurp(dir / "again.l2ck")) == fnv1a(fixture::slurp(dir / "r1.l2ck")) &&
                 load_checkpoint(dir / "again.l2ck").same_as(ck);
  }
  notes.push_back(std::string("checkpoint round trip ") + (round_trip ? "identical" : "DIFFERS"));
  ::unsetenv("L2P_DETERMINISTIC");
  return {ok && synth_same && logs_same && round_trip, notes[0] + ", " + notes[1] + ", " + notes[2]};
}

Outcome shapes() {
  std::vector<std::string> seen;
  bool ok = true;
  for (int side : {256, 64}) {
    for (int in : {1, 2}) {
      Pix2PixModel<float> model(ModelConfig::standard(in, static_cast<int>(std::log2(side)), 8, 3));
      model.init(1);
      const nn::Tensor<float> x(in, side, side, 0.1f);
      const auto y = model.gen.forward(x, nullptr);
      const auto d = model.disc.forward(x, y);
      const int want = side == 256 ? 30 : 6;
      ok &= y.shape_str() == "3x" + std::to_string(side) + "x" + std::to_string(side);
      ok &= d.shape_str() == "1x" + std::to_string(want) + "x" + std::to_string(want);
      seen.push_back("S=" + std::to_string(side) + "/" + std::to_string(in) + "ch: G " + y.shape_str() + ", D " + d.shape_str());
    }
  }
  std::string detail;
  for (const auto& s : seen) detail += (detail.empty() ? "" : "; ") + s;
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria (1-8)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric oracle", metric_oracle},
      {"projection oracle", projection_oracle},
      {"ray-plane / ray-box geometry", geometry_oracle},
      {"gradient check", gradient_check},
      {"memorization", memorization},
      {"desk-scale experiment 2", desk_scale},
      {"determinism", determinism},
      {"shape contracts", shapes},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
