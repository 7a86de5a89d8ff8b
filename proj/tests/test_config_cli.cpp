// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gpnerf/commands.hpp"
#include "gpnerf/dataset.hpp"
#include "gpnerf/image.hpp"

using namespace gpnerf;
namespace fs = std::filesystem;

namespace {
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("gpnerf_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
}  // namespace

TEST_CASE("config files: sections, comments, overrides, unknown keys") {
  TempDir tmp;
  const fs::path cfg_path = tmp.path / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << "# toy experiment\n"
        "[scene]\n"
        "n_objects = 3\n"
        "room_extent = 4.0, 4.0, 3.0\n"
        "\n"
        "[train]\n"
        "steps = 250   # short\n"
        "lr_extractor = 1e-3\n"
        "stratified = false\n";
  }
  RunConfig cfg = RunConfig::from_file(cfg_path.string());
  CHECK(cfg.n_objects == 3);
  CHECK(cfg.room_extent[2] == 3.0);
  CHECK(cfg.steps == 250);
  CHECK(cfg.lr_extractor == 1e-3);
  CHECK_FALSE(cfg.stratified);

  CHECK_THROWS_AS(cfg.set("not_a_key", "1"), Error);
  CHECK_THROWS_AS(cfg.set("steps", "many"), Error);
  CHECK_THROWS_AS(cfg.set("room_extent", "1,2"), Error);

  // The dump round-trips through set().
  RunConfig copy;
  std::istringstream dump(cfg.dump());
  std::string line;
  while (std::getline(dump, line)) {
    const auto eq = line.find('=');
    REQUIRE(eq != std::string::npos);
    const std::string key = line.substr(0, eq - 1);
    const std::string value = line.substr(eq + 1);
    if (!value.empty() && value != " ") copy.set(key, value);
  }
  CHECK(copy.dump() == cfg.dump());
}

TEST_CASE("GPNERF_SEED overrides the configured seed") {
  RunConfig cfg;
  cfg.seed = 7;
  ::setenv("GPNERF_SEED", "1234", 1);
  cfg.apply_env();
  ::unsetenv("GPNERF_SEED");
  CHECK(cfg.seed == 1234);
}

TEST_CASE("cmd_generate: counts, determinism, force semantics, bad config") {
  TempDir tmp;
  RunConfig cfg;
  cfg.scenes = 2;
  cfg.views = 3;
  cfg.image_h = cfg.image_w = 32;
  cfg.n_objects = 2;
  cfg.n_classes = 3;
  cfg.seed = 1;
  cfg.dataset_dir = (tmp.path / "ds").string();

  CHECK(cmd_generate(cfg, false) == kExitOk);
  int scene_dirs = 0;
  for (const auto& e : fs::directory_iterator(cfg.dataset_dir))
    if (e.is_directory()) ++scene_dirs;
  CHECK(scene_dirs == 2);
  int view_files = 0;
  for (const auto& e :
       fs::directory_iterator(fs::path(cfg.dataset_dir) / "scene_000" / "views"))
    ++view_files;
  CHECK(view_files == 3 * 5);  // rgb, depth, sem, inst, pose per view

  // Rerunning the same command writes identical bytes.
  const auto rgb_before =
      slurp(fs::path(cfg.dataset_dir) / "scene_001" / "views" / "002_rgb.png");
  const auto pose_before =
      slurp(fs::path(cfg.dataset_dir) / "scene_001" / "views" / "002_pose.json");
  CHECK(cmd_generate(cfg, true) == kExitOk);
  CHECK(slurp(fs::path(cfg.dataset_dir) / "scene_001" / "views" / "002_rgb.png") ==
        rgb_before);
  CHECK(slurp(fs::path(cfg.dataset_dir) / "scene_001" / "views" / "002_pose.json") ==
        pose_before);

  // Existing directory without --force is refused.
  CHECK_THROWS_AS(cmd_generate(cfg, false), Error);

  // Invalid class count fails validation.
  RunConfig bad = cfg;
  bad.n_classes = 0;
  bad.dataset_dir = (tmp.path / "ds2").string();
  CHECK_THROWS_AS(cmd_generate(bad, false), Error);
}

TEST_CASE("cmd_train + cmd_render + cmd_evaluate end to end") {
  TempDir tmp;
  RunConfig cfg;
  cfg.scenes = 1;
  cfg.views = 7;
  cfg.image_h = cfg.image_w = 32;
  cfg.n_objects = 2;
  cfg.n_classes = 3;
  cfg.enc_channels = {4, 4, 8, 8};
  cfg.d_rgb = 8;
  cfg.steps = 6;
  cfg.rays_per_step = 12;
  cfg.samples_per_ray = 6;
  cfg.n_ref = 3;
  cfg.holdout_views = 2;
  cfg.checkpoint_every = 3;
  cfg.seed = 2;
  cfg.dataset_dir = (tmp.path / "ds").string();
  cfg.out_dir = (tmp.path / "out").string();
  REQUIRE(cmd_generate(cfg, false) == kExitOk);
  REQUIRE(cmd_train(cfg, "") == kExitOk);

  const std::string ckpt = cfg.out_dir + "/checkpoint.gpnerf";
  CHECK(fs::exists(ckpt));
  // One CSV row per step plus the header.
  std::ifstream csv(cfg.out_dir + "/train_log.csv");
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  CHECK(line == "step,lr,l_rgb,l_sem,l_sd,l_dg,l_all");
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);

  const std::string render_dir = (tmp.path / "renders").string();
  REQUIRE(cmd_render(cfg, ckpt, cfg.dataset_dir, 0, {5, 6}, render_dir) == kExitOk);
  for (const char* suffix : {"_rgb.png", "_label.png", "_pca.png", "_err.png"}) {
    CHECK(fs::exists(render_dir + "/s000_v005" + suffix));
    CHECK(fs::exists(render_dir + "/s000_v006" + suffix));
  }
  // Rendered RGB (pre-quantization) was finite and in range; the written
  // bytes are deterministic given checkpoint and view.
  const auto png1 = slurp(render_dir + "/s000_v005_rgb.png");
  REQUIRE(cmd_render(cfg, ckpt, cfg.dataset_dir, 0, {5}, render_dir) == kExitOk);
  CHECK(slurp(render_dir + "/s000_v005_rgb.png") == png1);

  const std::string report = (tmp.path / "eval.json").string();
  REQUIRE(cmd_evaluate(cfg, ckpt, cfg.dataset_dir, report) == kExitOk);
  std::ifstream rep(report);
  std::string body((std::istreambuf_iterator<char>(rep)),
                   std::istreambuf_iterator<char>());
  for (const char* key : {"psnr", "ssim", "miou", "total_acc", "avg_acc", "config"})
    CHECK(body.find(key) != std::string::npos);

  // Evaluation is deterministic across reruns.
  REQUIRE(cmd_evaluate(cfg, ckpt, cfg.dataset_dir, report) == kExitOk);
  std::ifstream rep2(report);
  std::string body2((std::istreambuf_iterator<char>(rep2)),
                    std::istreambuf_iterator<char>());
  CHECK(body == body2);

  // Missing checkpoint is a runtime error.
  CHECK_THROWS_AS(cmd_render(cfg, ckpt + ".missing", cfg.dataset_dir, 0, {5}, render_dir),
                  Error);
}

TEST_CASE("finetune resumes from a generalized checkpoint") {
  TempDir tmp;
  RunConfig cfg;
  cfg.scenes = 2;
  cfg.views = 7;
  cfg.image_h = cfg.image_w = 32;
  cfg.n_objects = 2;
  cfg.n_classes = 3;
  cfg.enc_channels = {4, 4, 8, 8};
  cfg.d_rgb = 8;
  cfg.steps = 4;
  cfg.rays_per_step = 10;
  cfg.samples_per_ray = 5;
  cfg.n_ref = 3;
  cfg.holdout_views = 2;
  cfg.checkpoint_every = 0;
  cfg.seed = 3;
  cfg.dataset_dir = (tmp.path / "ds").string();
  cfg.out_dir = (tmp.path / "out").string();
  REQUIRE(cmd_generate(cfg, false) == kExitOk);
  REQUIRE(cmd_train(cfg, "") == kExitOk);

  RunConfig ft = cfg;
  ft.mode = "finetune";
  ft.dataset_dir = (tmp.path / "ds" / "scene_000").string();
  ft.out_dir = (tmp.path / "ft").string();
  ft.steps = 3;
  REQUIRE(cmd_train(ft, cfg.out_dir + "/checkpoint.gpnerf") == kExitOk);
  // Step counter continues from the generalized run.
  std::ifstream csv(ft.out_dir + "/train_log.csv");
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  CHECK(line.rfind("4,", 0) == 0);
}
