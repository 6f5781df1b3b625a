// Renders one synthetic scene through the whole chain: scene -> LiDAR frame ->
// front-view raster -> (optionally) a trained generator.
//
//   scene_to_image <seed> <out_dir> [checkpoint.l2ck]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "l2p/evaluate.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <seed> <out_dir> [checkpoint.l2ck]\n", argv[0]);
    return 2;
  }
  try {
    const std::uint64_t seed = std::strtoull(argv[1], nullptr, 10);
    const std::filesystem::path out = argv[2];
    std::filesystem::create_directories(out);

    const l2p::SensorConfig sensor;
    const l2p::SceneSpec scene = l2p::generate_scene(seed, {}, sensor);
    const l2p::PointCloud cloud = l2p::simulate_lidar(scene, sensor, 4);
    const auto mode = l2p::ChannelMode::ReflectanceAndDistance;
    const l2p::RasterImage raster = l2p::project_frame(cloud, sensor, mode, 64, 64);
    const l2p::CameraFrame camera = l2p::render_camera(scene, sensor, 64, 64);

    l2p::write_point_cloud(out / "frame.l2pc", cloud);
    l2p::write_png(out / "reflectance.png", l2p::channel_preview(raster, 0));
    l2p::write_png(out / "distance.png", l2p::channel_preview(raster, 1));
    l2p::write_png(out / "camera.png", camera.image);
    std::printf("%zu points, %d car(s) visible, %d black\n", cloud.points.size(), camera.meta.n_g(),
                camera.meta.black_count());

    if (argc > 3) {
      const l2p::Checkpoint ck = l2p::load_checkpoint(argv[3]);
      const l2p::RasterImage predicted = l2p::predict(ck, raster);
      l2p::write_png(out / "predicted.png", predicted);
      std::printf("detected %d of %d car(s) in the prediction\n", l2p::detect_cars(predicted, camera.meta),
                  camera.meta.n_g());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
