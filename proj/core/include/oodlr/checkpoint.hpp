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
// Checkpoint files: a JSON manifest (<stem>.json) describing parameter names,
// shapes and training metadata, plus a flat little-endian float64 payload
// (<stem>.bin) holding every parameter in manifest order, each matrix in
// column-major order.

#ifndef OODLR_CHECKPOINT_HPP_
#define OODLR_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "oodlr/neural.hpp"

namespace oodlr {

struct CheckpointManifest {
  std::string model_kind;
  std::uint64_t seed = 0;
  std::map<std::string, double> numbers;
  std::map<std::string, std::string> strings;
  std::map<std::string, std::vector<double>> arrays;

  double Number(const std::string& key) const;
  const std::string& String(const std::string& key) const;
  const std::vector<double>& Array(const std::string& key) const;
};

void SaveCheckpoint(const std::filesystem::path& stem,
                    const nn::ParameterStore& store,
                    const CheckpointManifest& manifest);

CheckpointManifest ReadManifest(const std::filesystem::path& stem);

/// Loads values into an already-constructed store; names and shapes must
/// match the manifest exactly.
void LoadParameters(const std::filesystem::path& stem, nn::ParameterStore& store);

bool CheckpointExists(const std::filesystem::path& stem);

}  // namespace oodlr

#endif  // OODLR_CHECKPOINT_HPP_
