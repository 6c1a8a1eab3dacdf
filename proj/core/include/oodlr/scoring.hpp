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
// OOD scorers. Every score is oriented so that a larger value means "more
// out-of-domain"; log-likelihood based scores are negated accordingly.

#ifndef OODLR_SCORING_HPP_
#define OODLR_SCORING_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oodlr/lof.hpp"
#include "oodlr/models.hpp"
#include "oodlr/noising.hpp"

namespace oodlr {

double ScoreMsp(std::span<const double> posterior);
/// Natural-log entropy with 0 log 0 = 0.
double ScoreEntropy(std::span<const double> posterior);
/// -KL(posterior || reference). Throws std::invalid_argument if the
/// reference has a non-positive entry or the sizes differ.
double ScoreNegKl(std::span<const double> posterior,
                  std::span<const double> reference);

std::vector<double> UniformReference(std::size_t num_labels);
/// Training label ratios; classes with no training rows get a pseudo-count
/// of one so the reference stays strictly positive.
std::vector<double> LabelRatioReference(std::span<const std::size_t> class_counts);

double ScoreNegLogLik(const LanguageModel& model, std::span<const int> encoded);
double ScoreNegLogLik(const GenerativeClassifier& model, std::span<const int> encoded);

/// log P_B(x) - log P_M(x). Throws std::invalid_argument when the models
/// were trained on different vocabularies.
double ScoreLlr(const LanguageModel& main, const LanguageModel& background,
                std::span<const int> encoded);
double ScoreLlr(const GenerativeClassifier& main, const LanguageModel& background,
                std::span<const int> encoded);

double ScoreLof(const DiscriminativeClassifier& classifier,
                const NeighborIndex& index, std::span<const int> encoded);

/// Replaces +-infinity by +-DBL_MAX, keeping them strictly outside every
/// finite score, and rejects NaN.
void ClampScores(std::vector<double>& eta);

enum class Method {
  kMsp,
  kMspT1e3,
  kNegKlUniform,
  kNegKlRatio,
  kLof,
  kLofLmcl,
  kLSimple,
  kLSimpleBackUniform,
  kLSimpleBackUnigram,
  kLSimpleBackUniroot,
  kLGen,
  kLGenBackUniform,
  kLGenBackUnigram,
  kLGenBackUniroot,
};

const std::vector<Method>& AllMethods();
std::string_view MethodName(Method m);
/// Throws std::invalid_argument listing the valid names.
Method ParseMethod(std::string_view name);

/// Which trained artifacts a method reads.
enum class ModelKey { kDiscSoftmax, kDiscLmcl, kLanguageModel, kGenerative, kBackground };
struct MethodNeeds {
  ModelKey main;
  std::optional<NoiseKind> background;  // set for the likelihood-ratio methods
};
MethodNeeds NeedsOf(Method m);

struct OodScore {
  std::string id;
  std::string method;
  double eta = 0.0;
  bool is_ood = false;
};

/// utterance_id<TAB>method<TAB>eta<TAB>is_ood with a header line; eta is
/// written in shortest round-trip form.
void WriteScores(const std::filesystem::path& path, const std::vector<OodScore>& scores);
std::vector<OodScore> ReadScores(const std::filesystem::path& path);

}  // namespace oodlr

#endif  // OODLR_SCORING_HPP_
