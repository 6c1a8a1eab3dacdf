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
// OOD detection metrics. OOD is always the positive class and a larger
// score means "more OOD"; a threshold t predicts OOD when score >= t.

#ifndef OODLR_METRICS_HPP_
#define OODLR_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oodlr {

struct ScoredSet {
  std::vector<double> eta;
  std::vector<bool> is_ood;

  std::size_t n_ood() const;
  std::size_t n_id() const;
  /// Throws std::invalid_argument unless both classes are present and the
  /// vectors have equal length.
  void RequireBothClasses() const;
};

/// Mann-Whitney statistic: P(η_ood > η_id) + 0.5 P(η_ood == η_id).
double Auroc(const ScoredSet& set);

/// Non-interpolated average precision; tied scores form a single step.
/// With ood_positive=false the ID class is positive (scores negated).
double Aupr(const ScoredSet& set, bool ood_positive = true);

/// FPR at the largest threshold whose OOD recall is at least target_tpr.
double FprAtTpr(const ScoredSet& set, double target_tpr = 0.95);

struct BinaryF1 {
  double ood = 0.0;
  double id = 0.0;
  double macro = 0.0;
};

BinaryF1 F1AtThreshold(const ScoredSet& set, double threshold);

/// Threshold maximizing binary macro-F1 over the midpoints between
/// consecutive distinct scores plus ±infinity. Ties go to the smallest.
double TuneThreshold(const ScoredSet& validation);

/// Unweighted mean of per-class F1 over classes occurring in gold or
/// predictions.
double MulticlassMacroF1(std::span<const int> gold,
                         std::span<const int> predicted);

struct RocPoint {
  double threshold, tpr, fpr;
};
struct PrPoint {
  double threshold, precision, recall;
};
/// One point per distinct threshold, descending, after a (+inf, 0, 0) start.
std::vector<RocPoint> RocCurve(const ScoredSet& set);
std::vector<PrPoint> PrCurve(const ScoredSet& set);

struct MetricValues {
  double f1 = 0.0;      // binary macro-F1 at the tuned threshold
  double ood_f1 = 0.0;  // OOD-class F1 at the same threshold
  double fpr_at_95_tpr = 0.0;
  double auroc = 0.0;
  double aupr_ood = 0.0;
  double aupr_id = 0.0;
  double threshold = 0.0;
};

/// Computes every metric on test, using the given decision threshold.
MetricValues Evaluate(const ScoredSet& test, double threshold);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t count = 0;
};

Summary Summarize(std::span<const double> values);

/// "mean ± std" with values multiplied by scale, two decimals.
std::string FormatMeanStd(const Summary& s, double scale = 100.0);

struct SeedMetrics {
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, MetricValues>> methods;
};

struct MethodSummary {
  std::string method;
  Summary f1, ood_f1, fpr_at_95_tpr, auroc, aupr_ood, aupr_id;
};

struct EvalReport {
  std::vector<std::uint64_t> seeds;  // completed seeds, ascending
  std::vector<SeedMetrics> per_seed;
  std::vector<MethodSummary> methods;
  std::vector<std::pair<std::uint64_t, std::string>> incomplete;
};

/// Mean and sample stddev per method over the given seeds. Seed order does
/// not matter; per_seed is stored sorted by seed.
EvalReport AggregateSeeds(std::vector<SeedMetrics> seeds);

}  // namespace oodlr

#endif  // OODLR_METRICS_HPP_
