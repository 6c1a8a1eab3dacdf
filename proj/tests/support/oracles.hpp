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
// Independent reference implementations used by the unit and acceptance
// tests. These favor directness over speed.

#ifndef OODLR_TESTS_ORACLES_HPP_
#define OODLR_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "oodlr/metrics.hpp"
#include "oodlr/rng.hpp"

namespace oodlr::oracle {

/// Random scores with deliberate ties; both classes always present.
inline ScoredSet RandomScores(Rng& rng, std::size_t n, int distinct_levels) {
  ScoredSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const bool ood = i == 0 ? true : (i == 1 ? false : rng.Bernoulli(0.4));
    double eta = distinct_levels > 0
                     ? static_cast<double>(rng.Index(static_cast<std::uint64_t>(distinct_levels)))
                     : rng.Normal();
    if (ood) eta += 0.5;
    s.eta.push_back(eta);
    s.is_ood.push_back(ood);
  }
  return s;
}

/// Area under the ROC polyline through every distinct threshold.
inline double TrapezoidAuroc(const ScoredSet& s) {
  std::set<double, std::greater<>> levels(s.eta.begin(), s.eta.end());
  double n_pos = 0, n_neg = 0;
  for (bool b : s.is_ood) (b ? n_pos : n_neg) += 1;
  double area = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
  for (double t : levels) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.eta.size(); ++i) {
      if (s.eta[i] >= t) (s.is_ood[i] ? tp : fp) += 1;
    }
    const double tpr = tp / n_pos, fpr = fp / n_neg;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  return area;
}

/// Average precision from an explicit sweep of every threshold:
/// sum over thresholds of (recall gain) x precision.
inline double BruteForceAupr(const ScoredSet& s, bool ood_positive = true) {
  std::vector<double> thresholds(s.eta.begin(), s.eta.end());
  double n_pos = 0;
  for (bool b : s.is_ood) n_pos += (b == ood_positive) ? 1 : 0;
  auto score = [&](std::size_t i) { return ood_positive ? s.eta[i] : -s.eta[i]; };
  for (auto& t : thresholds) t = ood_positive ? t : -t;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0, predicted = 0;
    for (std::size_t i = 0; i < s.eta.size(); ++i) {
      if (score(i) >= t) {
        predicted += 1;
        if (s.is_ood[i] == ood_positive) tp += 1;
      }
    }
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

using Points = std::vector<std::vector<double>>;

inline double Distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// LOF of every point of the set, straight from the defining equations:
/// k-distance, reachability distance, lrd and the neighbor lrd ratio.
inline std::vector<double> BruteForceLof(const Points& pts, int k) {
  const std::size_t n = pts.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> kdist(n);
  std::vector<std::vector<std::size_t>> hood(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> d;
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a) d.push_back(Distance(pts[a], pts[b]));
    }
    std::sort(d.begin(), d.end());
    kdist[a] = d[static_cast<std::size_t>(k - 1)];
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a && Distance(pts[a], pts[b]) <= kdist[a]) hood[a].push_back(b);
    }
  }
  std::vector<double> lrd(n);
  for (std::size_t a = 0; a < n; ++a) {
    double sum = 0.0;
    for (std::size_t b : hood[a]) sum += std::max(kdist[b], Distance(pts[a], pts[b]));
    lrd[a] = sum == 0.0 ? inf : static_cast<double>(hood[a].size()) / sum;
  }
  std::vector<double> lof(n);
  for (std::size_t a = 0; a < n; ++a) {
    double sum = 0.0;
    for (std::size_t b : hood[a]) {
      if (std::isinf(lrd[a])) {
        sum += std::isinf(lrd[b]) ? 1.0 : 0.0;
      } else if (std::isinf(lrd[b])) {
        sum = inf;
      } else {
        sum += lrd[b] / lrd[a];
      }
    }
    lof[a] = sum / static_cast<double>(hood[a].size());
  }
  return lof;
}

/// True when a and b agree within tol, treating equal infinities as equal.
inline bool Close(double a, double b, double tol) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace oodlr::oracle

#endif  // OODLR_TESTS_ORACLES_HPP_
