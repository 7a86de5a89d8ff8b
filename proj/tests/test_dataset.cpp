// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <ctime>
#include <fstream>

#include "gpnerf/dataset.hpp"
#include "gpnerf/image.hpp"
#include "gpnerf/rng.hpp"

using namespace gpnerf;
namespace fs = std::filesystem;

namespace {

Dataset tiny_dataset() {
  SceneConfig cfg;
  cfg.room_extent = {4.0, 4.0, 3.0};
  cfg.n_objects = 2;
  cfg.class_palette = SceneConfig::default_palette(4);
  cfg.image_h = cfg.image_w = 32;
  return make_dataset(cfg, 2, 3, 21);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gpnerf_test_" + std::to_string(Rng(::time(nullptr)).next_u64() % 100000000));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("dataset round trip: poses, labels, depth quantization bound") {
  const Dataset ds = tiny_dataset();
  TempDir tmp;
  save_dataset(ds, tmp.path.string(), false);
  const Dataset back = load_dataset(tmp.path.string());
  REQUIRE(back.scenes.size() == ds.scenes.size());

  for (size_t s = 0; s < ds.scenes.size(); ++s) {
    const SceneDataset& a = ds.scenes[s];
    const SceneDataset& b = back.scenes[s];
    REQUIRE(a.views.size() == b.views.size());
    CHECK(b.t_near == doctest::Approx(a.t_near).epsilon(1e-12));
    REQUIRE(b.scene.boxes.size() == a.scene.boxes.size());

    const double depth_step = (a.t_far - a.t_near) / 65535.0;
    for (size_t v = 0; v < a.views.size(); ++v) {
      const ViewRecord& va = a.views[v];
      const ViewRecord& vb = b.views[v];
      // Poses to 1e-7 absolute.
      for (int i = 0; i < 9; ++i)
        CHECK(std::abs(va.camera.rot.m[i] - vb.camera.rot.m[i]) < 1e-7);
      CHECK(std::abs(va.camera.center.x - vb.camera.center.x) < 1e-7);
      CHECK(va.camera.fx == doctest::Approx(vb.camera.fx).epsilon(1e-12));
      // Labels bit-identical.
      for (int64_t i = 0; i < va.semantic.numel(); ++i) {
        CHECK(va.semantic[i] == vb.semantic[i]);
        CHECK(va.instance[i] == vb.instance[i]);
      }
      // Depth within one quantization step, RGB within one 8-bit step.
      for (int64_t i = 0; i < va.depth.numel(); ++i)
        CHECK(std::abs(va.depth[i] - vb.depth[i]) <= depth_step);
      for (int64_t i = 0; i < va.rgb.numel(); ++i)
        CHECK(std::abs(va.rgb[i] - vb.rgb[i]) <= 0.5 / 255.0 + 1e-12);
    }
  }
}

TEST_CASE("save refuses to overwrite without force") {
  const Dataset ds = tiny_dataset();
  TempDir tmp;
  save_dataset(ds, tmp.path.string(), false);
  CHECK_THROWS_AS(save_dataset(ds, tmp.path.string(), false), Error);
  save_dataset(ds, tmp.path.string(), true);  // force succeeds
}

TEST_CASE("missing pose file is reported with the view name") {
  const Dataset ds = tiny_dataset();
  TempDir tmp;
  save_dataset(ds, tmp.path.string(), false);
  fs::remove(tmp.path / "scene_001" / "views" / "001_pose.json");
  try {
    load_dataset(tmp.path.string());
    FAIL("expected a load error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("001") != std::string::npos);
    CHECK(msg.find("pose") != std::string::npos);
  }
}

TEST_CASE("corrupt scene.json is reported with path and field") {
  const Dataset ds = tiny_dataset();
  TempDir tmp;
  save_dataset(ds, tmp.path.string(), false);
  {
    std::ofstream out(tmp.path / "scene_000" / "scene.json");
    out << "{\"room_extent\": [4,4,3]}";  // drop everything else
  }
  try {
    load_dataset(tmp.path.string());
    FAIL("expected a load error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("scene.json") != std::string::npos);
    CHECK(msg.find("depth_range") != std::string::npos);
  }
}

TEST_CASE("single scene directory loads directly") {
  const Dataset ds = tiny_dataset();
  TempDir tmp;
  save_dataset(ds, tmp.path.string(), false);
  const Dataset one = load_dataset((tmp.path / "scene_000").string());
  CHECK(one.scenes.size() == 1);
  CHECK(one.scenes[0].views.size() == ds.scenes[0].views.size());
}

TEST_CASE("png round trips are exact for 8 and 16 bit payloads") {
  TempDir tmp;
  ImageU8 img;
  img.h = 5;
  img.w = 7;
  img.channels = 3;
  Rng rng(4);
  img.pix.resize(5 * 7 * 3);
  for (auto& p : img.pix) p = (uint8_t)(rng.next_u64() % 256);
  const std::string p8 = (tmp.path / "t8.png").string();
  write_png8(p8, img);
  const ImageU8 back = read_png8(p8);
  CHECK(back.pix == img.pix);

  ImageU16 img16;
  img16.h = 4;
  img16.w = 6;
  img16.pix.resize(24);
  for (auto& p : img16.pix) p = (uint16_t)(rng.next_u64() % 65536);
  const std::string p16 = (tmp.path / "t16.png").string();
  write_png16(p16, img16);
  const ImageU16 back16 = read_png16(p16);
  CHECK(back16.pix == img16.pix);
}
