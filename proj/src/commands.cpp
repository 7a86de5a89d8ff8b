// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>

#include "gpnerf/checkpoint.hpp"
#include "gpnerf/evaluator.hpp"
#include "gpnerf/gradcheck.hpp"
#include "gpnerf/image.hpp"
#include "gpnerf/trainer.hpp"

namespace gpnerf {

namespace fs = std::filesystem;

int cmd_generate(const RunConfig& cfg, bool force) {
  cfg.validate();
  GPNERF_CHECK(!cfg.dataset_dir.empty(), "generate needs dataset_dir");
  SceneConfig sc;
  sc.room_extent = cfg.room_extent;
  sc.n_objects = cfg.n_objects;
  sc.class_palette = SceneConfig::default_palette(cfg.n_classes);
  sc.image_h = cfg.image_h;
  sc.image_w = cfg.image_w;
  const Dataset ds = make_dataset(sc, cfg.scenes, cfg.views, cfg.seed);
  save_dataset(ds, cfg.dataset_dir, force);

  std::set<int> classes;
  for (const auto& e : ds.scenes[0].scene.palette) classes.insert(e.class_id);
  std::cout << "dataset: " << cfg.dataset_dir << "\n"
            << "  scenes:  " << ds.scenes.size() << "\n"
            << "  views:   " << cfg.views << " per scene\n"
            << "  classes: " << classes.size() << " (incl. background)\n"
            << "  images:  " << cfg.image_h << "x" << cfg.image_w << "\n";
  {
    std::ofstream out(fs::path(cfg.dataset_dir) / "effective_config.txt");
    out << cfg.dump();
  }
  return kExitOk;
}

int cmd_train(RunConfig cfg, const std::string& resume_or_init_checkpoint) {
  cfg.validate();
  GPNERF_CHECK(!cfg.dataset_dir.empty(), "train needs dataset_dir");
  const Dataset data = load_dataset(cfg.dataset_dir);
  fs::create_directories(cfg.out_dir);
  const std::string ckpt_path = cfg.checkpoint_path.empty()
                                    ? (fs::path(cfg.out_dir) / "checkpoint.gpnerf").string()
                                    : cfg.checkpoint_path;

  TrainState state = make_train_state(cfg);
  bool resumed = false;
  if (!resume_or_init_checkpoint.empty()) {
    const CheckpointMeta meta =
        load_checkpoint(resume_or_init_checkpoint, state.model.params, state.adam);
    // Finetuning continues the step counter from the generalized run.
    state.step = meta.step;
    resumed = true;
    std::cout << "loaded checkpoint " << resume_or_init_checkpoint << " at step "
              << meta.step << "\n";
    if (cfg.mode == "finetune") cfg.steps += (int)meta.step;
    state.model.cfg.steps = cfg.steps;
  }

  const std::string csv_path = (fs::path(cfg.out_dir) / "train_log.csv").string();
  const bool fresh_log = !resumed || !fs::exists(csv_path) ||
                         fs::file_size(csv_path) == 0;
  std::ofstream csv(csv_path, resumed ? std::ios::app : std::ios::trunc);
  GPNERF_CHECK(csv.good(), "cannot open training log " + csv_path);
  if (fresh_log) csv << "step,lr,l_rgb,l_sem,l_sd,l_dg,l_all\n";

  train_loop(state, data, &csv, ckpt_path);
  std::cout << "trained to step " << state.step << "; checkpoint: " << ckpt_path
            << "\nlog: " << csv_path << "\n";
  {
    std::ofstream out(fs::path(cfg.out_dir) / "effective_config.txt");
    out << cfg.dump();
  }
  return kExitOk;
}

namespace {

GpnerfModel load_model(RunConfig cfg, const std::string& checkpoint) {
  GPNERF_CHECK(!checkpoint.empty(), "missing checkpoint path");
  const CheckpointMeta meta = peek_checkpoint(checkpoint);
  // Rebuild the model exactly as trained: the snapshot is authoritative for
  // model dimensions.
  RunConfig trained;
  std::istringstream in(meta.config_dump);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq - 1);
    trained.set(key.substr(0, key.find_last_not_of(' ') + 1),
                line.substr(eq + 1));
  }
  trained.dataset_dir = cfg.dataset_dir.empty() ? trained.dataset_dir : cfg.dataset_dir;
  trained.out_dir = cfg.out_dir;
  GpnerfModel model = GpnerfModel::create(trained);
  Adam adam;
  load_checkpoint(checkpoint, model.params, adam);
  return model;
}

ImageU8 colorize_labels(const LabelArray& labels,
                        const std::vector<PaletteEntry>& palette) {
  ImageU8 img;
  img.h = labels.dim(0);
  img.w = labels.dim(1);
  img.channels = 3;
  img.pix.resize((size_t)img.h * img.w * 3);
  for (int64_t i = 0; i < labels.numel(); ++i) {
    std::array<double, 3> c{1, 0, 1};  // magenta marks ids outside the palette
    for (const auto& e : palette)
      if (e.class_id == labels[i]) c = e.color;
    for (int k = 0; k < 3; ++k)
      img.pix[i * 3 + k] = (uint8_t)std::lround(std::clamp(c[k], 0.0, 1.0) * 255);
  }
  return img;
}

std::vector<PaletteEntry> instance_palette(int n) {
  std::vector<PaletteEntry> p;
  Rng rng(41);
  p.push_back({0, {0.1, 0.1, 0.1}});
  for (int i = 1; i <= n; ++i)
    p.push_back({i, {rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)}});
  return p;
}

}  // namespace

int cmd_render(const RunConfig& cfg, const std::string& checkpoint,
               const std::string& dataset_dir, int scene,
               const std::vector<int>& view_ids, const std::string& out_dir) {
  GpnerfModel model = load_model(cfg, checkpoint);
  const Dataset data = load_dataset(dataset_dir);
  GPNERF_CHECK(scene >= 0 && scene < (int)data.scenes.size(), "scene index out of range");
  const SceneDataset& sd = data.scenes[scene];
  fs::create_directories(out_dir);

  std::vector<CameraModel> cams;
  for (const auto& v : sd.views) cams.push_back(v.camera);
  const auto train_ids = train_view_ids(sd, model.cfg.holdout_views);

  for (int view : view_ids) {
    GPNERF_CHECK(view >= 0 && view < (int)sd.views.size(), "view index out of range");
    const auto refs = select_reference_views(cams, train_ids, view, model.cfg.n_ref);
    const FullViewRender r = render_full_view(model, sd, refs, sd.views[view].camera);

    std::ostringstream stem;
    stem << "s" << std::setw(3) << std::setfill('0') << scene << "_v"
         << std::setw(3) << std::setfill('0') << view;
    const fs::path base = fs::path(out_dir) / stem.str();

    write_png8(base.string() + "_rgb.png", rgb_to_u8(r.rgb));
    const auto palette = model.cfg.instance_mode
                             ? instance_palette(model.head_classes() - 1)
                             : sd.scene.palette;
    write_png8(base.string() + "_label.png", colorize_labels(r.labels, palette));
    pca_feature_export(r.sem_map, base.string() + "_pca.png");

    // Per-pixel L2 color error against GT, when GT exists for the view.
    const Tensor& gt = sd.views[view].rgb;
    Tensor err({gt.dim(0), gt.dim(1), 3});
    for (int64_t i = 0; i < gt.numel() / 3; ++i) {
      double e2 = 0;
      for (int c = 0; c < 3; ++c) {
        const double d = r.rgb[i * 3 + c] - gt[i * 3 + c];
        e2 += d * d;
      }
      const double e = std::min(1.0, std::sqrt(e2));
      for (int c = 0; c < 3; ++c) err[i * 3 + c] = e;
    }
    write_png8(base.string() + "_err.png", rgb_to_u8(err));
    std::cout << "rendered view " << view << " -> " << base.string() << "_{rgb,label,pca,err}.png\n";
  }
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint,
                 const std::string& dataset_dir, const std::string& report_path) {
  GpnerfModel model = load_model(cfg, checkpoint);
  const Dataset data = load_dataset(dataset_dir);
  const EvalReport report = evaluate_model(model, data);

  std::ostream& os = std::cout;
  os << std::fixed << std::setprecision(4);
  os << "view        psnr     ssim     miou  tot_acc  avg_acc\n";
  for (const auto& v : report.views)
    os << "s" << v.scene << "/v" << std::setw(2) << v.view << "  " << std::setw(8)
       << v.psnr << " " << std::setw(8) << v.ssim << " " << std::setw(8) << v.miou
       << " " << std::setw(8) << v.total_acc << " " << std::setw(8) << v.avg_acc
       << (v.ap75 ? (" ap75=" + std::to_string(*v.ap75)) : "") << "\n";
  os << "mean      " << std::setw(8) << report.psnr << " " << std::setw(8)
     << report.ssim << " " << std::setw(8) << report.miou << " " << std::setw(8)
     << report.total_acc << " " << std::setw(8) << report.avg_acc;
  if (report.ap75) os << " ap75=" << *report.ap75;
  os << "\n";

  if (!report_path.empty()) {
    fs::create_directories(fs::path(report_path).parent_path().empty()
                               ? "."
                               : fs::path(report_path).parent_path().string());
    std::ofstream out(report_path);
    out << report.to_json(model.cfg.dump()) << "\n";
    std::cout << "report: " << report_path << "\n";
  }
  return kExitOk;
}

int cmd_gradcheck() {
  const GradCheckResult r = run_gradcheck(std::cout);
  return r.all_pass ? kExitOk : kExitGradcheck;
}

}  // namespace gpnerf
