// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "gpnerf/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* app, CommonArgs& args) {
  app->add_option("--config", args.config_path, "flat key=value config file");
  app->add_option("--set", args.overrides,
                  "override a config key, e.g. --set steps=2000")
      ->take_all();
}

gpnerf::RunConfig resolve_config(const CommonArgs& args) {
  gpnerf::RunConfig cfg;
  try {
    if (!args.config_path.empty())
      cfg = gpnerf::RunConfig::from_file(args.config_path);
    for (const auto& kv : args.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw gpnerf::UsageError("--set expects key=value, got " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const gpnerf::Error& e) {
    throw gpnerf::UsageError(e.what());
  }
  cfg.apply_env();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gpnerf: generalizable radiance + semantic field renderer"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, ft_args, render_args, eval_args;
  bool force = false;
  std::string resume, init_ckpt, ckpt, dataset_dir, out_dir = "out", report;
  int scene = 0;
  std::vector<int> views;
  bool instance = false;

  CLI::App* gen = app.add_subcommand("generate", "generate a procedural dataset");
  add_common(gen, gen_args);
  gen->add_flag("--force", force, "overwrite an existing dataset directory");

  CLI::App* train = app.add_subcommand("train", "generalization training");
  add_common(train, train_args);
  train->add_option("--resume", resume, "checkpoint to resume from");

  CLI::App* finetune = app.add_subcommand("finetune", "per-scene finetuning");
  add_common(finetune, ft_args);
  finetune->add_option("--checkpoint", init_ckpt, "generalized checkpoint to start from")
      ->required();
  finetune->add_flag("--instance", instance, "decode per-scene instance ids");

  CLI::App* render = app.add_subcommand("render", "render novel views from a checkpoint");
  add_common(render, render_args);
  render->add_option("--checkpoint", ckpt)->required();
  render->add_option("--dataset", dataset_dir)->required();
  render->add_option("--scene", scene);
  render->add_option("--views", views, "view indices")->required();
  render->add_option("--out", out_dir);

  CLI::App* evaluate = app.add_subcommand("evaluate", "metrics over held-out views");
  add_common(evaluate, eval_args);
  evaluate->add_option("--checkpoint", ckpt)->required();
  evaluate->add_option("--dataset", dataset_dir)->required();
  evaluate->add_option("--report", report, "write the JSON report here");

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient verification");
  (void)gradcheck;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? gpnerf::kExitOk : gpnerf::kExitUsage;
  }

  try {
    if (gen->parsed()) return gpnerf::cmd_generate(resolve_config(gen_args), force);
    if (train->parsed()) {
      gpnerf::RunConfig cfg = resolve_config(train_args);
      cfg.mode = "generalization";
      return gpnerf::cmd_train(cfg, resume);
    }
    if (finetune->parsed()) {
      gpnerf::RunConfig cfg = resolve_config(ft_args);
      cfg.mode = "finetune";
      if (instance) cfg.instance_mode = true;
      return gpnerf::cmd_train(cfg, init_ckpt);
    }
    if (render->parsed())
      return gpnerf::cmd_render(resolve_config(render_args), ckpt, dataset_dir,
                                scene, views, out_dir);
    if (evaluate->parsed()) {
      gpnerf::RunConfig cfg = resolve_config(eval_args);
      if (report.empty()) report = cfg.out_dir + "/eval_report.json";
      return gpnerf::cmd_evaluate(cfg, ckpt, dataset_dir, report);
    }
    if (gradcheck->parsed()) return gpnerf::cmd_gradcheck();
  } catch (const gpnerf::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return gpnerf::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gpnerf::kExitRuntime;
  }
  return gpnerf::kExitUsage;
}
