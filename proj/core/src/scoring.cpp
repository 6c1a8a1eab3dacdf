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
#include "oodlr/scoring.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace oodlr {

double ScoreMsp(std::span<const double> posterior) {
  if (posterior.empty()) throw std::invalid_argument("empty posterior");
  return 1.0 - *std::max_element(posterior.begin(), posterior.end());
}

double ScoreEntropy(std::span<const double> posterior) {
  double h = 0.0;
  for (double p : posterior) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double ScoreNegKl(std::span<const double> posterior,
                  std::span<const double> reference) {
  if (posterior.size() != reference.size()) {
    throw std::invalid_argument("posterior and reference sizes differ");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    if (!(reference[i] > 0.0)) {
      throw std::invalid_argument("KL reference entry " + std::to_string(i) +
                                  " is not strictly positive");
    }
    if (posterior[i] > 0.0) kl += posterior[i] * std::log(posterior[i] / reference[i]);
  }
  return -kl;
}

std::vector<double> UniformReference(std::size_t num_labels) {
  if (num_labels == 0) throw std::invalid_argument("uniform reference over zero labels");
  return std::vector<double>(num_labels, 1.0 / static_cast<double>(num_labels));
}

std::vector<double> LabelRatioReference(std::span<const std::size_t> class_counts) {
  if (class_counts.empty()) throw std::invalid_argument("no class counts");
  std::vector<double> ref;
  for (std::size_t c : class_counts) ref.push_back(c ? static_cast<double>(c) : 1.0);
  const double total = std::accumulate(ref.begin(), ref.end(), 0.0);
  for (double& r : ref) r /= total;
  return ref;
}

double ScoreNegLogLik(const LanguageModel& model, std::span<const int> encoded) {
  return -model.LogLikelihood(encoded);
}

double ScoreNegLogLik(const GenerativeClassifier& model, std::span<const int> encoded) {
  return -model.MarginalLogLikelihood(encoded);
}

namespace {
void RequireSameVocab(VocabularyTag a, VocabularyTag b) {
  if (!(a == b)) {
    throw std::invalid_argument(
        "likelihood ratio needs main and background models over the same vocabulary");
  }
}
}  // namespace

double ScoreLlr(const LanguageModel& main, const LanguageModel& background,
                std::span<const int> encoded) {
  RequireSameVocab(main.vocab(), background.vocab());
  return background.LogLikelihood(encoded) - main.LogLikelihood(encoded);
}

double ScoreLlr(const GenerativeClassifier& main, const LanguageModel& background,
                std::span<const int> encoded) {
  RequireSameVocab(main.vocab(), background.vocab());
  return background.LogLikelihood(encoded) - main.MarginalLogLikelihood(encoded);
}

double ScoreLof(const DiscriminativeClassifier& classifier,
                const NeighborIndex& index, std::span<const int> encoded) {
  const std::vector<double> f = classifier.PenultimateFeatures(encoded);
  return index.Score(Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())));
}

void ClampScores(std::vector<double>& eta) {
  constexpr double kMax = std::numeric_limits<double>::max();
  for (double& x : eta) {
    if (std::isnan(x)) throw std::runtime_error("NaN OOD score");
    x = std::clamp(x, -kMax, kMax);
  }
}

namespace {
struct MethodInfo {
  Method method;
  std::string_view name;
  MethodNeeds needs;
};

const std::array<MethodInfo, 14>& Table() {
  static const std::array<MethodInfo, 14> table{{
      {Method::kMsp, "msp", {ModelKey::kDiscSoftmax, {}}},
      {Method::kMspT1e3, "msp_t1e3", {ModelKey::kDiscSoftmax, {}}},
      {Method::kNegKlUniform, "neg_kl_u", {ModelKey::kDiscSoftmax, {}}},
      {Method::kNegKlRatio, "neg_kl_r", {ModelKey::kDiscSoftmax, {}}},
      {Method::kLof, "lof", {ModelKey::kDiscSoftmax, {}}},
      {Method::kLofLmcl, "lof_lmcl", {ModelKey::kDiscLmcl, {}}},
      {Method::kLSimple, "l_simple", {ModelKey::kLanguageModel, {}}},
      {Method::kLSimpleBackUniform, "l_simple_backlm_uniform",
       {ModelKey::kLanguageModel, NoiseKind::kUniform}},
      {Method::kLSimpleBackUnigram, "l_simple_backlm_unigram",
       {ModelKey::kLanguageModel, NoiseKind::kUnigram}},
      {Method::kLSimpleBackUniroot, "l_simple_backlm_uniroot",
       {ModelKey::kLanguageModel, NoiseKind::kUniroot}},
      {Method::kLGen, "l_gen", {ModelKey::kGenerative, {}}},
      {Method::kLGenBackUniform, "l_gen_backlm_uniform",
       {ModelKey::kGenerative, NoiseKind::kUniform}},
      {Method::kLGenBackUnigram, "l_gen_backlm_unigram",
       {ModelKey::kGenerative, NoiseKind::kUnigram}},
      {Method::kLGenBackUniroot, "l_gen_backlm_uniroot",
       {ModelKey::kGenerative, NoiseKind::kUniroot}},
  }};
  return table;
}
}  // namespace

const std::vector<Method>& AllMethods() {
  static const std::vector<Method> all = [] {
    std::vector<Method> v;
    for (const auto& info : Table()) v.push_back(info.method);
    return v;
  }();
  return all;
}

std::string_view MethodName(Method m) {
  return Table()[static_cast<std::size_t>(m)].name;
}

Method ParseMethod(std::string_view name) {
  for (const auto& info : Table()) {
    if (info.name == name) return info.method;
  }
  std::string valid;
  for (const auto& info : Table()) {
    if (!valid.empty()) valid += ", ";
    valid += info.name;
  }
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (valid: " + valid + ")");
}

MethodNeeds NeedsOf(Method m) { return Table()[static_cast<std::size_t>(m)].needs; }

void WriteScores(const std::filesystem::path& path, const std::vector<OodScore>& scores) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "utterance_id\tmethod\teta\tis_ood\n";
  char buf[64];
  for (const auto& s : scores) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), s.eta);
    out << s.id << '\t' << s.method << '\t' << std::string_view(buf, end - buf)
        << '\t' << (s.is_ood ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<OodScore> ReadScores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<OodScore> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::array<std::string_view, 4> f;
    std::string_view rest(line);
    for (int i = 0; i < 4; ++i) {
      const auto tab = rest.find('\t');
      if ((tab == std::string_view::npos) != (i == 3)) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": expected 4 tab-separated fields");
      }
      f[static_cast<std::size_t>(i)] = rest.substr(0, tab);
      if (tab != std::string_view::npos) rest.remove_prefix(tab + 1);
    }
    OodScore s{std::string(f[0]), std::string(f[1]), 0.0, f[3] == "1"};
    auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), s.eta);
    if (ec != std::errc() || ptr != f[2].data() + f[2].size() ||
        (f[3] != "0" && f[3] != "1")) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": malformed score row");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace oodlr
