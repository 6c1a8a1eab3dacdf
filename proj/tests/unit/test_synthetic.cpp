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
#include <set>
#include <string>

#include <doctest.h>

#include "oodlr/synthetic.hpp"
#include "temp_dir.hpp"

using namespace oodlr;

TEST_CASE("sizes and disjoint vocabularies") {
  const auto b = MakeSyntheticBenchmark(4);
  CHECK(b.train.size() == 3000);
  std::size_t valid_ood = 0, test_ood = 0;
  for (const auto& u : b.valid) valid_ood += u.is_ood;
  for (const auto& u : b.test) test_ood += u.is_ood;
  CHECK(valid_ood == 300);
  CHECK(test_ood == 300);
  CHECK(b.valid.size() == 900);
  CHECK(b.class_names.size() == 3);
  REQUIRE(b.content_words.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      for (const auto& w : b.content_words[i])
        CHECK(std::find(b.content_words[j].begin(), b.content_words[j].end(), w) ==
              b.content_words[j].end());

  std::set<std::string> id_tokens;
  for (const auto& u : b.train) id_tokens.insert(u.tokens.begin(), u.tokens.end());
  const std::set<std::string> function(b.function_words.begin(), b.function_words.end());
  for (const auto& u : b.test) {
    if (!u.is_ood) continue;
    CHECK_FALSE(u.label.has_value());
    for (const auto& t : u.tokens)
      if (!function.count(t)) CHECK(id_tokens.count(t) == 0);
  }
}

TEST_CASE("deterministic per seed") {
  SyntheticSpec spec;
  spec.train = 60;
  spec.valid = spec.test = 12;
  spec.ood_valid = spec.ood_test = 6;
  const auto a = MakeSyntheticBenchmark(9, spec);
  const auto b = MakeSyntheticBenchmark(9, spec);
  const auto c = MakeSyntheticBenchmark(10, spec);
  bool differs = false;
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].tokens == b.train[i].tokens);
    CHECK(a.train[i].label == b.train[i].label);
    differs = differs || a.train[i].tokens != c.train[i].tokens;
  }
  CHECK(differs);

  testing::TempDir d1, d2;
  WriteSyntheticBenchmark(a, d1.path());
  WriteSyntheticBenchmark(b, d2.path());
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv"})
    CHECK(testing::ReadFile(d1 / f) == testing::ReadFile(d2 / f));
  const auto back = LoadTsv(d1 / "test.tsv", TsvSchema::Parse(kSyntheticSchema));
  REQUIRE(back.size() == a.test.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].tokens == a.test[i].tokens);
    CHECK(back[i].is_ood == a.test[i].is_ood);
  }
}
