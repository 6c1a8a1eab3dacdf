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
// Synthetic intent benchmark: each in-domain class and the OOD set are
// sampled from their own token-bigram grammar over a private content
// vocabulary; a small shared set of function words is sprinkled in.

#ifndef OODLR_SYNTHETIC_HPP_
#define OODLR_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oodlr/corpus.hpp"

namespace oodlr {

struct SyntheticSpec {
  std::size_t train = 3000;  // in-domain rows, spread evenly over classes
  std::size_t valid = 600;
  std::size_t test = 600;
  std::size_t ood_valid = 300;
  std::size_t ood_test = 300;
  int num_classes = 3;
  int words_per_grammar = 40;
  int successors = 3;  // outgoing bigram edges per word
  int min_length = 4;  // content words per sentence
  int max_length = 10;
  double function_word_p = 0.25;
};

struct SyntheticBenchmark {
  std::vector<Utterance> train, valid, test;
  std::vector<std::string> class_names;
  // Content vocabularies: one per class, then the OOD grammar's.
  std::vector<std::vector<std::string>> content_words;
  std::vector<std::string> function_words;
};

SyntheticBenchmark MakeSyntheticBenchmark(std::uint64_t seed,
                                          const SyntheticSpec& spec = {});

/// Writes train.tsv, valid.tsv and test.tsv (columns id, label, text) into
/// dir, OOD rows labeled with kDefaultOodLabel.
void WriteSyntheticBenchmark(const SyntheticBenchmark& bench,
                             const std::filesystem::path& dir);

inline constexpr const char* kSyntheticSchema = "id,label,text";

}  // namespace oodlr

#endif  // OODLR_SYNTHETIC_HPP_
