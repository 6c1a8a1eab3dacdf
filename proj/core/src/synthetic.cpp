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
#include "oodlr/synthetic.hpp"

#include <stdexcept>

#include "oodlr/rng.hpp"

namespace oodlr {

namespace {

constexpr const char* kSyllables[] = {"ba", "de", "ki", "lo", "mu", "ne",
                                      "pi", "ro", "su", "ta", "vi", "wo"};
constexpr std::size_t kNumSyllables = std::size(kSyllables);
// One prefix per grammar keeps the content vocabularies disjoint.
constexpr const char* kPrefixes[] = {"zar", "qel", "vom", "jux", "fyn", "gha", "hox", "cyr"};

struct Grammar {
  std::vector<std::string> words;
  std::vector<std::vector<int>> next;  // successor word indices
  std::vector<std::vector<double>> next_weight;
};

Grammar MakeGrammar(int index, const SyntheticSpec& spec, Rng& rng) {
  Grammar g;
  for (int w = 0; w < spec.words_per_grammar; ++w) {
    const auto a = static_cast<std::size_t>(w) % kNumSyllables;
    const auto b = static_cast<std::size_t>(w) / kNumSyllables % kNumSyllables;
    g.words.push_back(std::string(kPrefixes[index]) + kSyllables[a] + kSyllables[b]);
  }
  const auto n = static_cast<std::uint64_t>(spec.words_per_grammar);
  for (int w = 0; w < spec.words_per_grammar; ++w) {
    std::vector<int> succ;
    std::vector<double> weight;
    for (int s = 0; s < spec.successors; ++s) {
      succ.push_back(static_cast<int>(rng.Index(n)));
      weight.push_back(0.2 + rng.Uniform());
    }
    g.next.push_back(std::move(succ));
    g.next_weight.push_back(std::move(weight));
  }
  return g;
}

int Pick(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.Uniform() * total;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<std::string> Sentence(const Grammar& g,
                                  const std::vector<std::string>& function_words,
                                  const SyntheticSpec& spec, Rng& rng) {
  const auto span = static_cast<std::uint64_t>(spec.max_length - spec.min_length + 1);
  const int length = spec.min_length + static_cast<int>(rng.Index(span));
  std::vector<std::string> tokens;
  auto w = static_cast<int>(rng.Index(g.words.size()));
  for (int i = 0; i < length; ++i) {
    if (rng.Bernoulli(spec.function_word_p)) {
      tokens.push_back(function_words[rng.Index(function_words.size())]);
    }
    tokens.push_back(g.words[static_cast<std::size_t>(w)]);
    const auto& succ = g.next[static_cast<std::size_t>(w)];
    w = succ[static_cast<std::size_t>(Pick(g.next_weight[static_cast<std::size_t>(w)], rng))];
  }
  return tokens;
}

}  // namespace

SyntheticBenchmark MakeSyntheticBenchmark(std::uint64_t seed, const SyntheticSpec& spec) {
  if (spec.num_classes < 1 ||
      spec.num_classes + 1 > static_cast<int>(std::size(kPrefixes))) {
    throw std::invalid_argument("synthetic benchmark supports 1 to " +
                                std::to_string(std::size(kPrefixes) - 1) + " classes");
  }
  if (spec.words_per_grammar < 1 ||
      spec.words_per_grammar > static_cast<int>(kNumSyllables * kNumSyllables) ||
      spec.successors < 1 || spec.min_length < 1 || spec.max_length < spec.min_length) {
    throw std::invalid_argument("bad synthetic grammar parameters");
  }
  SyntheticBenchmark bench;
  bench.function_words = {"the", "a", "please", "to", "my", "for"};
  Rng grammar_rng = Rng::Derive({seed, 0x6772616d});
  std::vector<Grammar> grammars;
  for (int g = 0; g <= spec.num_classes; ++g) {
    grammars.push_back(MakeGrammar(g, spec, grammar_rng));
    bench.content_words.push_back(grammars.back().words);
  }
  for (int c = 0; c < spec.num_classes; ++c) {
    bench.class_names.push_back("intent_" + std::string(1, static_cast<char>('a' + c)));
  }

  Rng rng = Rng::Derive({seed, 0x73656e74});
  std::int64_t next_id = 0;
  auto emit = [&](std::vector<Utterance>& out, std::size_t n, int grammar) {
    for (std::size_t i = 0; i < n; ++i) {
      Utterance u;
      u.id = next_id++;
      const int g = grammar >= 0 ? grammar : static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
      u.tokens = Sentence(grammars[static_cast<std::size_t>(g)], bench.function_words, spec, rng);
      for (const auto& t : u.tokens) u.raw += (u.raw.empty() ? "" : " ") + t;
      if (g < spec.num_classes) {
        u.label = bench.class_names[static_cast<std::size_t>(g)];
      } else {
        u.is_ood = true;
      }
      out.push_back(std::move(u));
    }
  };
  emit(bench.train, spec.train, -1);
  emit(bench.valid, spec.valid, -1);
  emit(bench.valid, spec.ood_valid, spec.num_classes);
  emit(bench.test, spec.test, -1);
  emit(bench.test, spec.ood_test, spec.num_classes);
  return bench;
}

void WriteSyntheticBenchmark(const SyntheticBenchmark& bench,
                             const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SaveTsv(dir / "train.tsv", bench.train);
  SaveTsv(dir / "valid.tsv", bench.valid);
  SaveTsv(dir / "test.tsv", bench.test);
}

}  // namespace oodlr
