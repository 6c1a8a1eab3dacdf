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
// Experiment configuration: a plain "key = value" document ('#' comments,
// comma-separated lists). Every key doubles as a --key command-line flag.

#ifndef OODLR_CONFIG_HPP_
#define OODLR_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "oodlr/noising.hpp"
#include "oodlr/scoring.hpp"

namespace oodlr {

enum class LabelMode { kFine, kCoarse };

struct ExperimentConfig {
  // Data. ood_path holds extra OOD rows that are split between valid/test.
  std::string train_path, valid_path, test_path, ood_path;
  std::string schema = "label,text";
  std::string ood_label{kDefaultOodLabel};
  LabelMode label_mode = LabelMode::kFine;
  std::string label_separator = "/";
  int holdout_k = 0;                  // 0 = dataset already carries OOD rows
  double ood_valid_fraction = -1.0;   // < 0: proportional to ID valid/test sizes
  int min_freq = 1;

  std::vector<Method> methods = AllMethods();
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output_dir = "out";

  int embedding_dim = 100;
  int projection_dim = 300;
  int classifier_hidden = 300;
  int label_embedding_dim = 20;
  int lm_hidden = 300;
  int background_hidden = 64;
  double init_scale = 0.1;
  std::string glove_path;

  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;

  double noise_p = kDefaultNoiseProbability;
  bool noise_resample = true;
  int lof_k = 20;
  double lmcl_margin = 0.35;
  double lmcl_scale = 30.0;
  double msp_temperature = 1000.0;
  int jobs = 1;
  bool cache_models = true;

  /// Assigns one key from its textual value. Throws std::invalid_argument
  /// for unknown keys or unparsable values.
  void Set(std::string_view key, std::string_view value);
  /// Cross-field checks (paths present, positive sizes, ...).
  void Validate() const;
  /// Every key with its current value, in declaration order.
  std::vector<std::pair<std::string, std::string>> Entries() const;
  std::string ToText() const;
};

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};
const std::vector<ConfigKey>& ConfigKeys();

ExperimentConfig ParseConfig(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig LoadConfig(const std::filesystem::path& path);

}  // namespace oodlr

#endif  // OODLR_CONFIG_HPP_
