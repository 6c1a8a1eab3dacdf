/* Copyright 2026 The oodlr Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "oodlr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace oodlr {

namespace {

using json = nlohmann::json;

std::filesystem::path WithExt(const std::filesystem::path& stem, const char* ext) {
  return std::filesystem::path(stem.string() + ext);
}

void WriteLe(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double ReadLe(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw std::runtime_error("checkpoint payload is truncated");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

template <typename Map>
const typename Map::mapped_type& Lookup(const Map& map, const std::string& key,
                                        const char* what) {
  auto it = map.find(key);
  if (it == map.end()) {
    throw std::runtime_error(std::string("checkpoint manifest lacks ") + what +
                             " '" + key + "'");
  }
  return it->second;
}

}  // namespace

double CheckpointManifest::Number(const std::string& key) const {
  return Lookup(numbers, key, "number");
}

const std::string& CheckpointManifest::String(const std::string& key) const {
  return Lookup(strings, key, "string");
}

const std::vector<double>& CheckpointManifest::Array(const std::string& key) const {
  return Lookup(arrays, key, "array");
}

void SaveCheckpoint(const std::filesystem::path& stem,
                    const nn::ParameterStore& store,
                    const CheckpointManifest& manifest) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  json params = json::array();
  for (const auto& p : store.all()) {
    params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  json doc = {{"model_kind", manifest.model_kind},
              {"seed", manifest.seed},
              {"numbers", manifest.numbers},
              {"strings", manifest.strings},
              {"arrays", manifest.arrays},
              {"optimizer_steps", store.optimizer_steps()},
              {"parameters", params}};

  const auto bin = WithExt(stem, ".bin");
  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + bin.string());
    for (const auto& p : store.all()) {
      const double* data = p.value.data();
      for (Eigen::Index i = 0; i < p.value.size(); ++i) WriteLe(out, data[i]);
    }
    if (!out) throw std::runtime_error("failed writing " + bin.string());
  }
  const auto manifest_path = WithExt(stem, ".json");
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
  out << doc.dump(2) << '\n';
}

CheckpointManifest ReadManifest(const std::filesystem::path& stem) {
  const auto path = WithExt(stem, ".json");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
    CheckpointManifest m;
    m.model_kind = doc.at("model_kind").get<std::string>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.numbers = doc.at("numbers").get<std::map<std::string, double>>();
    m.strings = doc.at("strings").get<std::map<std::string, std::string>>();
    m.arrays = doc.at("arrays").get<std::map<std::string, std::vector<double>>>();
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed checkpoint manifest " + path.string() +
                             ": " + e.what());
  }
}

void LoadParameters(const std::filesystem::path& stem, nn::ParameterStore& store) {
  const auto path = WithExt(stem, ".json");
  std::ifstream manifest_in(path);
  if (!manifest_in) throw std::runtime_error("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(manifest_in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed checkpoint manifest " + path.string() +
                             ": " + e.what());
  }
  const json& params = doc.at("parameters");
  auto& all = store.all();
  if (params.size() != all.size()) {
    throw std::runtime_error("checkpoint " + path.string() + " holds " +
                             std::to_string(params.size()) +
                             " parameters, model expects " + std::to_string(all.size()));
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& p = params[i];
    const auto name = p.at("name").get<std::string>();
    const auto rows = p.at("rows").get<Eigen::Index>();
    const auto cols = p.at("cols").get<Eigen::Index>();
    if (name != all[i].name || rows != all[i].value.rows() || cols != all[i].value.cols()) {
      throw std::runtime_error("checkpoint parameter '" + name + "' (" +
                               std::to_string(rows) + "x" + std::to_string(cols) +
                               ") does not match model parameter '" + all[i].name + "'");
    }
  }
  const auto bin = WithExt(stem, ".bin");
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + bin.string());
  for (auto& p : all) {
    double* data = p.value.data();
    for (Eigen::Index i = 0; i < p.value.size(); ++i) data[i] = ReadLe(in);
    p.grad.setZero();
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint payload " + bin.string() + " has trailing bytes");
  }
  store.set_optimizer_steps(doc.value("optimizer_steps", std::int64_t{0}));
}

bool CheckpointExists(const std::filesystem::path& stem) {
  return std::filesystem::exists(WithExt(stem, ".json")) &&
         std::filesystem::exists(WithExt(stem, ".bin"));
}

}  // namespace oodlr
