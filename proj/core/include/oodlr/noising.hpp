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
// Word-substitution noise for training background language models.

#ifndef OODLR_NOISING_HPP_
#define OODLR_NOISING_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "oodlr/corpus.hpp"
#include "oodlr/rng.hpp"

namespace oodlr {

enum class NoiseKind { kUniform, kUnigram, kUniroot };

std::string_view ToString(NoiseKind kind);
/// Accepts "uniform", "unigram", "uniroot" (case-insensitive).
NoiseKind ParseNoiseKind(std::string_view name);

inline constexpr double kDefaultNoiseProbability = 0.5;

/// Substitution distribution over the non-reserved vocabulary:
///   uniform  N(w) = 1 / |W|
///   unigram  N(w) ∝ f(w)
///   uniroot  N(w) ∝ sqrt(f(w))
/// Sampling uses Vose's alias tables, O(1) per draw.
class NoiseDistribution {
 public:
  static NoiseDistribution Build(const Vocabulary& vocab, NoiseKind kind);

  NoiseKind kind() const { return kind_; }
  /// Token ids in the support, parallel to weights().
  const std::vector<int>& token_ids() const { return token_ids_; }
  const std::vector<double>& weights() const { return weights_; }
  /// Probability of a vocabulary id (0 for reserved ids).
  double Probability(int token_id) const;

  int Sample(Rng& rng) const;

 private:
  NoiseKind kind_ = NoiseKind::kUniform;
  int first_id_ = 0;
  std::vector<int> token_ids_;
  std::vector<double> weights_;
  std::vector<double> alias_prob_;
  std::vector<std::size_t> alias_;
};

/// Replaces each content position of an encoded sequence with a draw from
/// dist with probability p_noise. BOS/EOS/PAD positions are left alone.
std::vector<int> NoiseUtterance(std::span<const int> ids,
                                const NoiseDistribution& dist, double p_noise,
                                Rng& rng);

/// String-level variant: substitutes token surface forms.
std::vector<std::string> NoiseUtterance(const std::vector<std::string>& tokens,
                                        const NoiseDistribution& dist,
                                        const Vocabulary& vocab,
                                        double p_noise, Rng& rng);

/// One noised, label-free copy of every training utterance. Each row draws
/// from its own generator keyed on (seed, epoch, utterance id), so the
/// output does not depend on processing order.
std::vector<Utterance> NoiseCorpus(const std::vector<Utterance>& train,
                                   const NoiseDistribution& dist,
                                   const Vocabulary& vocab, double p_noise,
                                   std::uint64_t seed, std::uint64_t epoch = 0);

/// Same as NoiseCorpus but on pre-encoded sequences (parallel to train).
std::vector<std::vector<int>> NoiseEncodedCorpus(
    const std::vector<std::vector<int>>& encoded,
    const std::vector<std::int64_t>& ids, const NoiseDistribution& dist,
    double p_noise, std::uint64_t seed, std::uint64_t epoch);

}  // namespace oodlr

#endif  // OODLR_NOISING_HPP_
