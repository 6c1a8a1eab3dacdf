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
#include "oodlr/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace oodlr {

namespace {

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> SplitList(std::string_view s) {
  std::vector<std::string_view> out;
  if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto item = Trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T ParseNumber(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("config key '" + std::string(key) +
                                "': cannot parse '" + std::string(v) + "'");
  }
  return out;
}

bool ParseBool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + std::string(key) +
                              "': expected a boolean, got '" + std::string(v) + "'");
}

std::string Num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

struct Field {
  ConfigKey key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field IntField(std::string_view name, std::string_view help, T ExperimentConfig::*m) {
  return {{name, help},
          [name, m](ExperimentConfig& c, std::string_view v) { c.*m = ParseNumber<T>(name, v); },
          [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

Field RealField(std::string_view name, std::string_view help, double ExperimentConfig::*m) {
  return {{name, help},
          [name, m](ExperimentConfig& c, std::string_view v) { c.*m = ParseNumber<double>(name, v); },
          [m](const ExperimentConfig& c) { return Num(c.*m); }};
}

Field TextField(std::string_view name, std::string_view help, std::string ExperimentConfig::*m) {
  return {{name, help},
          [m](ExperimentConfig& c, std::string_view v) { c.*m = std::string(v); },
          [m](const ExperimentConfig& c) { return c.*m; }};
}

Field BoolField(std::string_view name, std::string_view help, bool ExperimentConfig::*m) {
  return {{name, help},
          [name, m](ExperimentConfig& c, std::string_view v) { c.*m = ParseBool(name, v); },
          [m](const ExperimentConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

const std::vector<Field>& Fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> fields = {
      TextField("train_path", "training TSV", &C::train_path),
      TextField("valid_path", "validation TSV", &C::valid_path),
      TextField("test_path", "test TSV", &C::test_path),
      TextField("ood_path", "extra OOD TSV split between validation and test", &C::ood_path),
      TextField("schema", "TSV column roles, e.g. id,label,text", &C::schema),
      TextField("ood_label", "label marking OOD rows", &C::ood_label),
      {{"label_mode", "fine or coarse intent labels"},
       [](C& c, std::string_view v) {
         if (v == "fine") {
           c.label_mode = LabelMode::kFine;
         } else if (v == "coarse") {
           c.label_mode = LabelMode::kCoarse;
         } else {
           throw std::invalid_argument("label_mode must be fine or coarse, got '" +
                                       std::string(v) + "'");
         }
       },
       [](const C& c) { return std::string(c.label_mode == LabelMode::kFine ? "fine" : "coarse"); }},
      TextField("label_separator", "separator of hierarchical labels", &C::label_separator),
      IntField("holdout_k", "retain classes covering K% of training data (0: native OOD)",
               &C::holdout_k),
      RealField("ood_valid_fraction", "share of extra OOD rows sent to validation (<0: auto)",
                &C::ood_valid_fraction),
      IntField("min_freq", "minimum training frequency for a vocabulary entry", &C::min_freq),
      {{"methods", "comma-separated scorer names"},
       [](C& c, std::string_view v) {
         c.methods.clear();
         for (auto item : SplitList(v)) {
           if (item == "all") {
             c.methods = AllMethods();
             return;
           }
           c.methods.push_back(ParseMethod(item));
         }
       },
       [](const C& c) {
         std::string s;
         for (Method m : c.methods) s += (s.empty() ? "" : ",") + std::string(MethodName(m));
         return s;
       }},
      {{"seeds", "comma-separated seeds"},
       [](C& c, std::string_view v) {
         c.seeds.clear();
         for (auto item : SplitList(v)) c.seeds.push_back(ParseNumber<std::uint64_t>("seeds", item));
       },
       [](const C& c) {
         std::string s;
         for (auto seed : c.seeds) s += (s.empty() ? "" : ",") + std::to_string(seed);
         return s;
       }},
      TextField("output_dir", "artifact directory", &C::output_dir),
      IntField("embedding_dim", "word embedding size", &C::embedding_dim),
      IntField("projection_dim", "discriminative projection size", &C::projection_dim),
      IntField("classifier_hidden", "classifier LSTM hidden size", &C::classifier_hidden),
      IntField("label_embedding_dim", "generative label embedding size", &C::label_embedding_dim),
      IntField("lm_hidden", "language model hidden size", &C::lm_hidden),
      IntField("background_hidden", "background LM hidden size", &C::background_hidden),
      RealField("init_scale", "uniform initialization half-width", &C::init_scale),
      TextField("glove_path", "pretrained word vectors (text format)", &C::glove_path),
      IntField("epochs", "training epochs", &C::epochs),
      IntField("batch_size", "minibatch size", &C::batch_size),
      RealField("learning_rate", "Adam learning rate", &C::learning_rate),
      RealField("clip_norm", "global gradient norm clip", &C::clip_norm),
      RealField("noise_p", "word substitution probability", &C::noise_p),
      BoolField("noise_resample", "draw fresh noise every epoch", &C::noise_resample),
      IntField("lof_k", "LOF neighbor count", &C::lof_k),
      RealField("lmcl_margin", "cosine margin", &C::lmcl_margin),
      RealField("lmcl_scale", "cosine scale", &C::lmcl_scale),
      RealField("msp_temperature", "temperature of the msp_t1e3 scorer", &C::msp_temperature),
      IntField("jobs", "worker threads", &C::jobs),
      BoolField("cache_models", "reuse existing checkpoints", &C::cache_models),
  };
  return fields;
}

}  // namespace

const std::vector<ConfigKey>& ConfigKeys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : Fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

void ExperimentConfig::Set(std::string_view key, std::string_view value) {
  for (const auto& f : Fields()) {
    if (f.key.name == key) {
      f.set(*this, Trim(value));
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::Entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : Fields()) out.emplace_back(std::string(f.key.name), f.get(*this));
  return out;
}

std::string ExperimentConfig::ToText() const {
  std::string out;
  for (const auto& [k, v] : Entries()) out += k + " = " + v + "\n";
  return out;
}

void ExperimentConfig::Validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("invalid config: " + msg);
  };
  require(!train_path.empty(), "train_path is required");
  require(!valid_path.empty(), "valid_path is required");
  require(!test_path.empty(), "test_path is required");
  TsvSchema::Parse(schema);
  require(!methods.empty(), "methods is empty");
  require(!seeds.empty(), "seeds is empty");
  require(holdout_k >= 0 && holdout_k < 100, "holdout_k must be in [0, 100)");
  require(ood_valid_fraction <= 1.0, "ood_valid_fraction must be <= 1");
  require(label_separator.size() == 1, "label_separator must be one character");
  require(min_freq >= 1, "min_freq must be >= 1");
  require(embedding_dim > 0 && projection_dim > 0 && classifier_hidden > 0 &&
              label_embedding_dim > 0 && lm_hidden > 0 && background_hidden > 0,
          "layer sizes must be positive");
  require(init_scale > 0.0, "init_scale must be positive");
  require(epochs > 0 && batch_size > 0, "epochs and batch_size must be positive");
  require(learning_rate > 0.0 && clip_norm > 0.0, "learning_rate and clip_norm must be positive");
  require(noise_p >= 0.0 && noise_p <= 1.0, "noise_p must be in [0, 1]");
  require(lof_k >= 1, "lof_k must be >= 1");
  require(lmcl_margin >= 0.0 && lmcl_scale > 0.0, "bad LMCL parameters");
  require(msp_temperature > 0.0, "msp_temperature must be positive");
  require(jobs >= 1, "jobs must be >= 1");
}

ExperimentConfig ParseConfig(std::string_view text, std::string_view origin) {
  ExperimentConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = Trim(view);
    if (view.empty() || view.front() == '[') continue;  // blank or section header
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(std::string(origin) + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    }
    try {
      config.Set(Trim(view.substr(0, eq)), Trim(view.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(origin) + ":" + std::to_string(line_no) +
                                  ": " + e.what());
    }
  }
  return config;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str(), path.string());
}

}  // namespace oodlr
