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
#include <filesystem>
#include <stdexcept>
#include <string>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "oodlr/pipeline.hpp"
#include "oodlr/synthetic.hpp"
#include "temp_dir.hpp"

using namespace oodlr;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  testing::TempDir dir;
  ExperimentConfig config;

  Fixture() {
    SyntheticSpec spec;
    spec.train = 150;
    spec.valid = 45;
    spec.test = 45;
    spec.ood_valid = 20;
    spec.ood_test = 20;
    WriteSyntheticBenchmark(MakeSyntheticBenchmark(3, spec), dir / "data");
    config.train_path = (dir / "data" / "train.tsv").string();
    config.valid_path = (dir / "data" / "valid.tsv").string();
    config.test_path = (dir / "data" / "test.tsv").string();
    config.schema = kSyntheticSchema;
    config.methods = {Method::kMsp, Method::kNegKlRatio, Method::kLof, Method::kLSimple,
                      Method::kLGen, Method::kLGenBackUniroot};
    config.seeds = {1};
    config.embedding_dim = 8;
    config.projection_dim = 8;
    config.classifier_hidden = 8;
    config.label_embedding_dim = 4;
    config.lm_hidden = 8;
    config.background_hidden = 8;
    config.epochs = 2;
    config.lof_k = 5;
  }

  std::string Run(const std::string& out) {
    config.output_dir = (dir / out).string();
    RunExperiment(config);
    return testing::ReadFile(dir / out / "report.json");
  }
};

}  // namespace

TEST_CASE("end to end run is deterministic and cache independent") {
  Fixture f;
  const std::string first = f.Run("a");
  const auto doc = nlohmann::json::parse(first);
  CHECK(doc.at("methods").size() == f.config.methods.size());
  CHECK(doc.at("incomplete").empty());
  CHECK(fs::exists(f.dir / "a" / "report.tsv"));
  CHECK(fs::exists(f.dir / "a" / "1" / "curves" / "l_gen.roc.csv"));
  CHECK(testing::ReadFile(f.dir / "a" / "1" / "curves" / "msp.pr.csv").rfind("threshold,precision,recall\n", 0) == 0);
  CHECK(fs::exists(CheckpointStem(f.config, 1, "backlm_uniroot").string() + ".json"));

  CHECK(f.Run("b") == first);
  CHECK(f.Run("a") == first);
  f.config.cache_models = false;
  CHECK(f.Run("a") == first);
}

TEST_CASE("required models are shared") {
  ExperimentConfig c;
  c.methods = {Method::kMsp, Method::kMspT1e3, Method::kNegKlUniform, Method::kLSimpleBackUniroot,
               Method::kLGenBackUniroot};
  const auto keys = RequiredModels(c);
  CHECK(keys == std::vector<std::string>{"disc_softmax", "lm_main", "backlm_uniroot", "gen"});
}

TEST_CASE("stage errors name the missing input") {
  Fixture f;
  f.config.output_dir = (f.dir / "c").string();
  CHECK_THROWS(EvalSeed(f.config, 1));
  CHECK_THROWS(LoadPrepared(f.config, 1));
  f.config.test_path = (f.dir / "missing.tsv").string();
  const auto report = RunExperiment(f.config);
  CHECK(report.incomplete.size() == 1);
}

TEST_CASE("noised training copy drops labels") {
  Fixture f;
  f.config.output_dir = (f.dir / "n").string();
  PrepareSeed(f.config, 1);
  WriteNoisedTrain(f.config, 1, NoiseKind::kUniform, 0, f.dir / "noised.tsv");
  const auto rows = LoadTsv(f.dir / "noised.tsv", TsvSchema::Parse("id,label,text"));
  CHECK(rows.size() == 150);
  for (const auto& r : rows) CHECK_FALSE(r.label.has_value());
}
