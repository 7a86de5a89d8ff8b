// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0

#include "gpnerf/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace gpnerf {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'G', 'P', 'N', 'E', 'R', 'F', 'C', '1'};

void append_tensor(json& manifest, std::string name, const char* kind,
                   const Tensor& t, uint64_t& offset) {
  manifest["tensors"].push_back({{"name", std::move(name)},
                                 {"kind", kind},
                                 {"dtype", "f8"},
                                 {"shape", t.shape()},
                                 {"offset", offset},
                                 {"bytes", t.numel() * 8}});
  offset += t.numel() * 8;
}
}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const Adam& adam, int64_t step,
                     const std::string& config_dump) {
  json manifest;
  manifest["step"] = step;
  manifest["config"] = config_dump;
  manifest["adam"] = {{"t", adam.t()},
                      {"beta1", adam.beta1()},
                      {"beta2", adam.beta2()},
                      {"eps", adam.eps()}};
  manifest["tensors"] = json::array();

  auto& m1 = const_cast<Adam&>(adam).moment1();
  auto& m2 = const_cast<Adam&>(adam).moment2();
  uint64_t offset = 0;
  std::vector<const Tensor*> buffers;
  for (const auto& [name, v] : params.items()) {
    append_tensor(manifest, name, "param", v.value(), offset);
    buffers.push_back(&v.node()->value);
    if (auto it = m1.find(name); it != m1.end()) {
      append_tensor(manifest, name, "adam_m", it->second, offset);
      buffers.push_back(&it->second);
      append_tensor(manifest, name, "adam_v", m2.at(name), offset);
      buffers.push_back(&m2.at(name));
    }
  }

  const std::string mstr = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  const uint64_t mlen = mstr.size();
  out.write(reinterpret_cast<const char*>(&mlen), 8);
  out.write(mstr.data(), (std::streamsize)mstr.size());
  for (const Tensor* t : buffers)
    out.write(reinterpret_cast<const char*>(t->data()),
              (std::streamsize)(t->numel() * 8));
  GPNERF_CHECK(out.good(), "checkpoint write failed: " + path);
}

namespace {
json read_archive(const std::string& path, std::ifstream& in) {
  in.open(path, std::ios::binary);
  if (!in) throw Error("checkpoint missing: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in.good() || std::memcmp(magic, kMagic, 8) != 0)
    throw Error("not a gpnerf checkpoint: " + path);
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 8);
  std::string mstr(mlen, '\0');
  in.read(mstr.data(), (std::streamsize)mlen);
  GPNERF_CHECK(in.good(), "truncated checkpoint manifest: " + path);
  return json::parse(mstr);
}
}  // namespace

CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream in;
  json manifest = read_archive(path, in);
  return {manifest.at("step").get<int64_t>(),
          manifest.at("config").get<std::string>()};
}

CheckpointMeta load_checkpoint(const std::string& path, ParamStore& params,
                               Adam& adam) {
  std::ifstream in;
  json manifest = read_archive(path, in);
  const std::streampos data_start = in.tellg();

  adam.set_t(manifest.at("adam").at("t").get<int64_t>());
  for (const auto& tj : manifest.at("tensors")) {
    const std::string name = tj.at("name").get<std::string>();
    const std::string kind = tj.at("kind").get<std::string>();
    const auto shape = tj.at("shape").get<std::vector<int>>();
    GPNERF_CHECK(tj.at("dtype").get<std::string>() == "f8",
                 "unsupported dtype for tensor " + name);
    Tensor* dst = nullptr;
    if (kind == "param") {
      GPNERF_CHECK(params.has(name), "checkpoint tensor unknown to model: " + name);
      dst = &params.get(name).node()->value;
      GPNERF_CHECK(dst->shape() == shape, "shape mismatch for " + name);
    } else {
      auto& store = kind == "adam_m" ? adam.moment1() : adam.moment2();
      store[name] = Tensor(shape);
      dst = &store[name];
    }
    in.seekg(data_start + (std::streampos)tj.at("offset").get<uint64_t>());
    in.read(reinterpret_cast<char*>(dst->data()),
            (std::streamsize)(dst->numel() * 8));
    GPNERF_CHECK(in.good(), "truncated checkpoint tensor " + name);
  }
  return {manifest.at("step").get<int64_t>(),
          manifest.at("config").get<std::string>()};
}

}  // namespace gpnerf
