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
#include "oodlr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace oodlr {
namespace {

// Distinct scores ascending with per-value OOD / ID counts.
struct Level {
  double value;
  std::size_t ood;
  std::size_t id;
};

std::vector<Level> Levels(const ScoredSet& set) {
  std::vector<std::size_t> order(set.eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return set.eta[a] < set.eta[b]; });
  std::vector<Level> levels;
  for (std::size_t i : order) {
    if (levels.empty() || levels.back().value != set.eta[i]) {
      levels.push_back({set.eta[i], 0, 0});
    }
    (set.is_ood[i] ? levels.back().ood : levels.back().id) += 1;
  }
  return levels;
}

double F1(double tp, double fp, double fn) {
  const double denom = 2.0 * tp + fp + fn;
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

BinaryF1 F1FromCounts(double tp, double fp, double fn, double tn) {
  BinaryF1 r;
  r.ood = F1(tp, fp, fn);
  r.id = F1(tn, fn, fp);
  r.macro = 0.5 * (r.ood + r.id);
  return r;
}

}  // namespace

std::size_t ScoredSet::n_ood() const {
  return static_cast<std::size_t>(std::count(is_ood.begin(), is_ood.end(), true));
}

std::size_t ScoredSet::n_id() const { return is_ood.size() - n_ood(); }

void ScoredSet::RequireBothClasses() const {
  if (eta.size() != is_ood.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  if (n_ood() == 0 || n_id() == 0) {
    throw std::invalid_argument(
        "metric needs at least one OOD and one ID example");
  }
}

double Auroc(const ScoredSet& set) {
  set.RequireBothClasses();
  double correct = 0.0, ties = 0.0, id_below = 0.0;
  for (const Level& l : Levels(set)) {
    correct += static_cast<double>(l.ood) * id_below;
    ties += static_cast<double>(l.ood) * static_cast<double>(l.id);
    id_below += static_cast<double>(l.id);
  }
  return (correct + 0.5 * ties) /
         (static_cast<double>(set.n_ood()) * static_cast<double>(set.n_id()));
}

double Aupr(const ScoredSet& set, bool ood_positive) {
  set.RequireBothClasses();
  ScoredSet s = set;
  if (!ood_positive) {
    for (double& v : s.eta) v = -v;
    s.is_ood.flip();
  }
  const auto levels = Levels(s);
  const double positives = static_cast<double>(s.n_ood());
  double tp = 0.0, fp = 0.0, ap = 0.0;
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
    tp += static_cast<double>(it->ood);
    fp += static_cast<double>(it->id);
    if (it->ood > 0) ap += (static_cast<double>(it->ood) / positives) * (tp / (tp + fp));
  }
  return ap;
}

double FprAtTpr(const ScoredSet& set, double target_tpr) {
  set.RequireBothClasses();
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) {
    throw std::invalid_argument("target TPR must be in (0, 1]");
  }
  std::vector<double> ood;
  for (std::size_t i = 0; i < set.eta.size(); ++i) {
    if (set.is_ood[i]) ood.push_back(set.eta[i]);
  }
  std::sort(ood.begin(), ood.end(), std::greater<>());
  // Smallest OOD count meeting the target; the slack absorbs 0.95 * n
  // landing a hair above an integer.
  auto needed = static_cast<std::size_t>(
      std::ceil(target_tpr * static_cast<double>(ood.size()) - 1e-9));
  needed = std::clamp<std::size_t>(needed, 1, ood.size());
  const double threshold = ood[needed - 1];
  std::size_t false_pos = 0;
  for (std::size_t i = 0; i < set.eta.size(); ++i) {
    if (!set.is_ood[i] && set.eta[i] >= threshold) ++false_pos;
  }
  return static_cast<double>(false_pos) / static_cast<double>(set.n_id());
}

BinaryF1 F1AtThreshold(const ScoredSet& set, double threshold) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < set.eta.size(); ++i) {
    const bool predicted_ood = set.eta[i] >= threshold;
    if (set.is_ood[i]) {
      (predicted_ood ? tp : fn) += 1;
    } else {
      (predicted_ood ? fp : tn) += 1;
    }
  }
  return F1FromCounts(tp, fp, fn, tn);
}

double TuneThreshold(const ScoredSet& validation) {
  validation.RequireBothClasses();
  const auto levels = Levels(validation);
  const double n_ood = static_cast<double>(validation.n_ood());
  const double n_id = static_cast<double>(validation.n_id());

  // Candidate k predicts OOD for levels[k..]; k = 0 is -inf, k = size is +inf.
  double ood_above = n_ood, id_above = n_id;
  double best_f1 = -1.0;
  double best_threshold = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= levels.size(); ++k) {
    if (k > 0) {
      ood_above -= static_cast<double>(levels[k - 1].ood);
      id_above -= static_cast<double>(levels[k - 1].id);
    }
    const double f1 =
        F1FromCounts(ood_above, id_above, n_ood - ood_above, n_id - id_above).macro;
    if (f1 > best_f1) {
      best_f1 = f1;
      if (k == 0) {
        best_threshold = -std::numeric_limits<double>::infinity();
      } else if (k == levels.size()) {
        best_threshold = std::numeric_limits<double>::infinity();
      } else {
        best_threshold = std::midpoint(levels[k - 1].value, levels[k].value);
      }
    }
  }
  return best_threshold;
}

double MulticlassMacroF1(std::span<const int> gold,
                         std::span<const int> predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("gold and predicted differ in length");
  }
  std::map<int, std::array<double, 3>> counts;  // tp, fp, fn
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == predicted[i]) {
      counts[gold[i]][0] += 1;
    } else {
      counts[predicted[i]][1] += 1;
      counts[gold[i]][2] += 1;
    }
  }
  if (counts.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [label, c] : counts) total += F1(c[0], c[1], c[2]);
  return total / static_cast<double>(counts.size());
}

std::vector<RocPoint> RocCurve(const ScoredSet& set) {
  set.RequireBothClasses();
  const auto levels = Levels(set);
  const double n_ood = static_cast<double>(set.n_ood());
  const double n_id = static_cast<double>(set.n_id());
  std::vector<RocPoint> curve{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0, fp = 0;
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
    tp += static_cast<double>(it->ood);
    fp += static_cast<double>(it->id);
    curve.push_back({it->value, tp / n_ood, fp / n_id});
  }
  return curve;
}

std::vector<PrPoint> PrCurve(const ScoredSet& set) {
  set.RequireBothClasses();
  const auto levels = Levels(set);
  const double n_ood = static_cast<double>(set.n_ood());
  std::vector<PrPoint> curve;
  double tp = 0, fp = 0;
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
    tp += static_cast<double>(it->ood);
    fp += static_cast<double>(it->id);
    curve.push_back({it->value, tp / (tp + fp), tp / n_ood});
  }
  return curve;
}

MetricValues Evaluate(const ScoredSet& test, double threshold) {
  MetricValues m;
  const BinaryF1 f1 = F1AtThreshold(test, threshold);
  m.f1 = f1.macro;
  m.ood_f1 = f1.ood;
  m.fpr_at_95_tpr = FprAtTpr(test, 0.95);
  m.auroc = Auroc(test);
  m.aupr_ood = Aupr(test, true);
  m.aupr_id = Aupr(test, false);
  m.threshold = threshold;
  return m;
}

Summary Summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string FormatMeanStd(const Summary& s, double scale) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", s.mean * scale, s.stddev * scale);
  return buf;
}

EvalReport AggregateSeeds(std::vector<SeedMetrics> seeds) {
  std::sort(seeds.begin(), seeds.end(),
            [](const SeedMetrics& a, const SeedMetrics& b) { return a.seed < b.seed; });
  EvalReport report;
  std::vector<std::string> order;
  for (const auto& s : seeds) {
    report.seeds.push_back(s.seed);
    for (const auto& [name, values] : s.methods) {
      if (std::find(order.begin(), order.end(), name) == order.end()) {
        order.push_back(name);
      }
    }
  }
  for (const auto& name : order) {
    std::vector<double> f1, ood_f1, fpr, auroc, aupr_ood, aupr_id;
    for (const auto& s : seeds) {
      for (const auto& [n, v] : s.methods) {
        if (n != name) continue;
        f1.push_back(v.f1);
        ood_f1.push_back(v.ood_f1);
        fpr.push_back(v.fpr_at_95_tpr);
        auroc.push_back(v.auroc);
        aupr_ood.push_back(v.aupr_ood);
        aupr_id.push_back(v.aupr_id);
      }
    }
    report.methods.push_back({name, Summarize(f1), Summarize(ood_f1),
                              Summarize(fpr), Summarize(auroc),
                              Summarize(aupr_ood), Summarize(aupr_id)});
  }
  report.per_seed = std::move(seeds);
  return report;
}

}  // namespace oodlr
