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
#include "oodlr/noising.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace oodlr {
namespace {

void CheckProbability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("p_noise must be in [0, 1], got " +
                                std::to_string(p));
  }
}

bool IsContent(int id) { return id >= Vocabulary::kNumReserved || id == Vocabulary::kUnk; }

}  // namespace

std::string_view ToString(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kUniform: return "uniform";
    case NoiseKind::kUnigram: return "unigram";
    case NoiseKind::kUniroot: return "uniroot";
  }
  return "?";
}

NoiseKind ParseNoiseKind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "uniform") return NoiseKind::kUniform;
  if (lower == "unigram") return NoiseKind::kUnigram;
  if (lower == "uniroot") return NoiseKind::kUniroot;
  throw std::invalid_argument("unknown noise kind '" + std::string(name) + "'");
}

NoiseDistribution NoiseDistribution::Build(const Vocabulary& vocab,
                                           NoiseKind kind) {
  NoiseDistribution d;
  d.kind_ = kind;
  d.first_id_ = Vocabulary::kNumReserved;
  d.token_ids_ = vocab.ContentIds();
  if (d.token_ids_.empty()) {
    throw std::invalid_argument("noise distribution needs a non-empty vocabulary");
  }
  d.weights_.resize(d.token_ids_.size());
  for (std::size_t i = 0; i < d.token_ids_.size(); ++i) {
    const auto f = static_cast<double>(vocab.Frequency(d.token_ids_[i]));
    switch (kind) {
      case NoiseKind::kUniform: d.weights_[i] = 1.0; break;
      case NoiseKind::kUnigram: d.weights_[i] = f; break;
      case NoiseKind::kUniroot: d.weights_[i] = std::sqrt(f); break;
    }
  }
  double total = 0.0;
  for (double w : d.weights_) total += w;
  if (!(total > 0.0)) {
    throw std::invalid_argument("noise distribution has zero total weight");
  }
  for (double& w : d.weights_) w /= total;

  // Vose's alias method.
  const std::size_t n = d.weights_.size();
  d.alias_prob_.assign(n, 0.0);
  d.alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = d.weights_[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    d.alias_prob_[s] = scaled[s];
    d.alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (std::size_t i : large) d.alias_prob_[i] = 1.0;
  for (std::size_t i : small) d.alias_prob_[i] = 1.0;  // rounding leftovers
  return d;
}

double NoiseDistribution::Probability(int token_id) const {
  const int idx = token_id - first_id_;
  if (idx < 0 || idx >= static_cast<int>(weights_.size())) return 0.0;
  return weights_[static_cast<std::size_t>(idx)];
}

int NoiseDistribution::Sample(Rng& rng) const {
  const std::size_t column = rng.Index(alias_prob_.size());
  const bool keep = rng.Uniform() < alias_prob_[column];
  return token_ids_[keep ? column : alias_[column]];
}

std::vector<int> NoiseUtterance(std::span<const int> ids,
                                const NoiseDistribution& dist, double p_noise,
                                Rng& rng) {
  CheckProbability(p_noise);
  std::vector<int> out(ids.begin(), ids.end());
  for (int& id : out) {
    if (!IsContent(id)) continue;
    if (rng.Bernoulli(p_noise)) id = dist.Sample(rng);
  }
  return out;
}

std::vector<std::string> NoiseUtterance(const std::vector<std::string>& tokens,
                                        const NoiseDistribution& dist,
                                        const Vocabulary& vocab,
                                        double p_noise, Rng& rng) {
  CheckProbability(p_noise);
  std::vector<std::string> out = tokens;
  for (auto& t : out) {
    if (rng.Bernoulli(p_noise)) t = vocab.Token(dist.Sample(rng));
  }
  return out;
}

std::vector<Utterance> NoiseCorpus(const std::vector<Utterance>& train,
                                   const NoiseDistribution& dist,
                                   const Vocabulary& vocab, double p_noise,
                                   std::uint64_t seed, std::uint64_t epoch) {
  CheckProbability(p_noise);
  std::vector<Utterance> out;
  out.reserve(train.size());
  for (const auto& u : train) {
    Rng rng = Rng::Derive({seed, epoch, static_cast<std::uint64_t>(u.id)});
    Utterance noised;
    noised.id = u.id;
    noised.tokens = NoiseUtterance(u.tokens, dist, vocab, p_noise, rng);
    for (std::size_t i = 0; i < noised.tokens.size(); ++i) {
      if (i) noised.raw += ' ';
      noised.raw += noised.tokens[i];
    }
    out.push_back(std::move(noised));
  }
  return out;
}

std::vector<std::vector<int>> NoiseEncodedCorpus(
    const std::vector<std::vector<int>>& encoded,
    const std::vector<std::int64_t>& ids, const NoiseDistribution& dist,
    double p_noise, std::uint64_t seed, std::uint64_t epoch) {
  if (encoded.size() != ids.size()) {
    throw std::invalid_argument("encoded corpus and ids differ in length");
  }
  std::vector<std::vector<int>> out;
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    Rng rng = Rng::Derive({seed, epoch, static_cast<std::uint64_t>(ids[i])});
    out.push_back(NoiseUtterance(encoded[i], dist, p_noise, rng));
  }
  return out;
}

}  // namespace oodlr
