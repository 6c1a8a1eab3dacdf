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
#include <stdexcept>
#include <string>

#include <doctest.h>

#include "oodlr/config.hpp"
#include "temp_dir.hpp"

using namespace oodlr;

TEST_CASE("defaults") {
  const ExperimentConfig c;
  CHECK(c.methods.size() == 14);
  CHECK(c.seeds.size() == 5);
  CHECK(c.lof_k == 20);
  CHECK(c.lmcl_margin == 0.35);
  CHECK(c.msp_temperature == 1000.0);
  CHECK(c.noise_p == 0.5);
  CHECK(c.epochs == 10);
  CHECK(c.batch_size == 32);
  CHECK(c.clip_norm == 5.0);
  CHECK(c.ood_label == "outOfDomain");
}

TEST_CASE("parse and round trip") {
  const auto c = ParseConfig(
      "# comment\n[data]\ntrain_path = a.tsv\nvalid_path=b.tsv\n test_path = c.tsv \n"
      "methods = [msp, l_gen_backlm_uniroot]\nseeds = 3, 9\nlabel_mode = coarse\n"
      "noise_resample = false\nlearning_rate = 2e-3\n");
  CHECK(c.train_path == "a.tsv");
  CHECK(c.test_path == "c.tsv");
  CHECK(c.methods == std::vector<Method>{Method::kMsp, Method::kLGenBackUniroot});
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 9});
  CHECK(c.label_mode == LabelMode::kCoarse);
  CHECK_FALSE(c.noise_resample);
  CHECK(c.learning_rate == 2e-3);
  CHECK_NOTHROW(c.Validate());

  const auto again = ParseConfig(c.ToText());
  CHECK(again.ToText() == c.ToText());
  CHECK(c.Entries().size() == ConfigKeys().size());
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(ParseConfig("methods = msp, bogus\n"), std::invalid_argument);
  CHECK_THROWS_AS(ParseConfig("no_such_key = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(ParseConfig("epochs = ten\n"), std::invalid_argument);
  CHECK_THROWS_AS(ParseConfig("just words\n"), std::invalid_argument);
  ExperimentConfig c;
  CHECK_THROWS(c.Validate());
  c.train_path = "a";
  c.valid_path = "b";
  c.test_path = "c";
  CHECK_NOTHROW(c.Validate());
  c.noise_p = 1.5;
  CHECK_THROWS(c.Validate());
  c.noise_p = 0.5;
  c.lof_k = 0;
  CHECK_THROWS(c.Validate());
  CHECK_THROWS(LoadConfig("/nonexistent/oodlr.conf"));
}

TEST_CASE("load from file") {
  testing::TempDir dir;
  dir.Write("x.conf", "train_path = t\nvalid_path = v\ntest_path = s\nepochs = 3\n");
  CHECK(LoadConfig(dir / "x.conf").epochs == 3);
}
