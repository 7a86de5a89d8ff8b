// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gpnerf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    GPNERF_CHECK(pos == v.size(), "trailing characters");
    return d;
  } catch (const std::exception&) {
    throw Error("config: bad numeric value for '" + key + "': " + v);
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  GPNERF_CHECK(d == (int64_t)d, "config: '" + key + "' expects an integer");
  return (int)d;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config: bad boolean for '" + key + "': " + v);
}

template <typename T, size_t K>
std::array<T, K> to_array(const std::string& key, const std::string& v) {
  std::array<T, K> out{};
  std::stringstream ss(v);
  std::string item;
  size_t i = 0;
  while (std::getline(ss, item, ',')) {
    GPNERF_CHECK(i < K, "config: too many values for '" + key + "'");
    out[i++] = (T)to_double(key, trim(item));
  }
  GPNERF_CHECK(i == K, "config: '" + key + "' expects " + std::to_string(K) +
                           " comma-separated values");
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "room_extent") room_extent = to_array<double, 3>(key, v);
  else if (key == "n_objects") n_objects = to_int(key, v);
  else if (key == "n_classes") n_classes = to_int(key, v);
  else if (key == "image_h") image_h = to_int(key, v);
  else if (key == "image_w") image_w = to_int(key, v);
  else if (key == "scenes") scenes = to_int(key, v);
  else if (key == "views") views = to_int(key, v);
  else if (key == "enc_channels") enc_channels = to_array<int, 4>(key, v);
  else if (key == "d_rgb") d_rgb = to_int(key, v);
  else if (key == "rgb_stride") rgb_stride = to_int(key, v);
  else if (key == "n_heads") n_heads = to_int(key, v);
  else if (key == "n_blocks") n_blocks = to_int(key, v);
  else if (key == "pe_freqs") pe_freqs = to_int(key, v);
  else if (key == "mode") mode = v;
  else if (key == "steps") steps = to_int(key, v);
  else if (key == "rays_per_step") rays_per_step = to_int(key, v);
  else if (key == "samples_per_ray") samples_per_ray = to_int(key, v);
  else if (key == "n_ref") n_ref = to_int(key, v);
  else if (key == "lr_extractor") lr_extractor = to_double(key, v);
  else if (key == "lr_transformer") lr_transformer = to_double(key, v);
  else if (key == "lr_head") lr_head = to_double(key, v);
  else if (key == "lr_decay") lr_decay = to_double(key, v);
  else if (key == "adam_beta1") adam_beta1 = to_double(key, v);
  else if (key == "adam_beta2") adam_beta2 = to_double(key, v);
  else if (key == "adam_eps") adam_eps = to_double(key, v);
  else if (key == "alpha_rgb") loss.rgb = to_double(key, v);
  else if (key == "alpha_sem") loss.sem = to_double(key, v);
  else if (key == "alpha_sd") loss.sem_distill = to_double(key, v);
  else if (key == "alpha_dg") loss.depth_guided = to_double(key, v);
  else if (key == "gradient_block") gradient_block = to_bool(key, v);
  else if (key == "ce_support") ce_support = v;
  else if (key == "ce_rendered_boost") ce_rendered_boost = to_double(key, v);
  else if (key == "stratified") stratified = to_bool(key, v);
  else if (key == "checkpoint_every") checkpoint_every = to_int(key, v);
  else if (key == "instance_mode") instance_mode = to_bool(key, v);
  else if (key == "holdout_views") holdout_views = to_int(key, v);
  else if (key == "seed") seed = (uint64_t)std::stoull(v);
  else if (key == "dataset_dir") dataset_dir = v;
  else if (key == "out_dir") out_dir = v;
  else if (key == "checkpoint_path") checkpoint_path = v;
  else throw Error("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config file missing: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') continue;  // section header
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config: line " + std::to_string(lineno) + " is not key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string RunConfig::dump() const {
  std::ostringstream os;
  os.precision(17);
  os << "room_extent = " << room_extent[0] << "," << room_extent[1] << ","
     << room_extent[2] << "\n";
  os << "n_objects = " << n_objects << "\n";
  os << "n_classes = " << n_classes << "\n";
  os << "image_h = " << image_h << "\n";
  os << "image_w = " << image_w << "\n";
  os << "scenes = " << scenes << "\n";
  os << "views = " << views << "\n";
  os << "enc_channels = " << enc_channels[0] << "," << enc_channels[1] << ","
     << enc_channels[2] << "," << enc_channels[3] << "\n";
  os << "d_rgb = " << d_rgb << "\n";
  os << "rgb_stride = " << rgb_stride << "\n";
  os << "n_heads = " << n_heads << "\n";
  os << "n_blocks = " << n_blocks << "\n";
  os << "pe_freqs = " << pe_freqs << "\n";
  os << "mode = " << mode << "\n";
  os << "steps = " << steps << "\n";
  os << "rays_per_step = " << rays_per_step << "\n";
  os << "samples_per_ray = " << samples_per_ray << "\n";
  os << "n_ref = " << n_ref << "\n";
  os << "lr_extractor = " << lr_extractor << "\n";
  os << "lr_transformer = " << lr_transformer << "\n";
  os << "lr_head = " << lr_head << "\n";
  os << "lr_decay = " << lr_decay << "\n";
  os << "adam_beta1 = " << adam_beta1 << "\n";
  os << "adam_beta2 = " << adam_beta2 << "\n";
  os << "adam_eps = " << adam_eps << "\n";
  os << "alpha_rgb = " << loss.rgb << "\n";
  os << "alpha_sem = " << loss.sem << "\n";
  os << "alpha_sd = " << loss.sem_distill << "\n";
  os << "alpha_dg = " << loss.depth_guided << "\n";
  os << "gradient_block = " << (gradient_block ? "true" : "false") << "\n";
  os << "ce_support = " << ce_support << "\n";
  os << "ce_rendered_boost = " << ce_rendered_boost << "\n";
  os << "stratified = " << (stratified ? "true" : "false") << "\n";
  os << "checkpoint_every = " << checkpoint_every << "\n";
  os << "instance_mode = " << (instance_mode ? "true" : "false") << "\n";
  os << "holdout_views = " << holdout_views << "\n";
  os << "seed = " << seed << "\n";
  os << "dataset_dir = " << dataset_dir << "\n";
  os << "out_dir = " << out_dir << "\n";
  os << "checkpoint_path = " << checkpoint_path << "\n";
  return os.str();
}

void RunConfig::apply_env() {
  if (const char* s = std::getenv("GPNERF_SEED")) seed = std::stoull(s);
}

void RunConfig::validate() const {
  GPNERF_CHECK(mode == "generalization" || mode == "finetune",
               "mode must be generalization or finetune");
  GPNERF_CHECK(ce_support == "fused" || ce_support == "rendered",
               "ce_support must be fused or rendered");
  GPNERF_CHECK(lr_extractor > 0 && lr_transformer > 0 && lr_head > 0,
               "learning rates must be positive");
  GPNERF_CHECK(rays_per_step >= 1, "rays_per_step must be >= 1");
  GPNERF_CHECK(steps >= 1, "steps must be >= 1");
  GPNERF_CHECK(samples_per_ray >= 1 && n_ref >= 1, "need samples and refs");
  GPNERF_CHECK(d_rgb % 4 == 0, "d_rgb must be a multiple of 4");
  loss.validate();
}

}  // namespace gpnerf
