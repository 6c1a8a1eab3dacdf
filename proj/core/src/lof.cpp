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
#include "oodlr/lof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace oodlr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Replaces +-infinity with the largest finite magnitude present.
std::vector<double> ClampInfinite(std::vector<double> v) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (double x : v) {
    if (std::isfinite(x)) {
      lo = any ? std::min(lo, x) : x;
      hi = any ? std::max(hi, x) : x;
      any = true;
    }
  }
  for (double& x : v) {
    if (x == kInf) x = hi;
    if (x == -kInf) x = lo;
  }
  return v;
}
}  // namespace

NeighborIndex::NeighborIndex(const Eigen::MatrixXd& points, int k)
    : points_(points.transpose()), k_(k) {
  if (k < 1 || k >= points.rows()) {
    throw std::invalid_argument("LOF needs 1 <= k < number of stored points (k=" +
                                std::to_string(k) + ", n=" +
                                std::to_string(points.rows()) + ")");
  }
  const std::size_t n = size();
  std::vector<Neighborhood> hoods(n);
  kdist_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    hoods[i] = Find(points_.col(static_cast<Eigen::Index>(i)), i);
    kdist_[i] = hoods[i].kdist;
  }
  lrd_.resize(n);
  for (std::size_t i = 0; i < n; ++i) lrd_[i] = LrdOf(hoods[i]);
  scores_.resize(n);
  neighbors_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores_[i] = ScoreOf(hoods[i], lrd_[i]);
    neighbors_[i] = std::move(hoods[i].members);
  }
}

NeighborIndex::Neighborhood NeighborIndex::Find(const Eigen::VectorXd& point,
                                                std::size_t skip) const {
  if (point.size() != points_.rows()) {
    throw std::invalid_argument("LOF query has dimension " +
                                std::to_string(point.size()) + ", index has " +
                                std::to_string(points_.rows()));
  }
  const Eigen::VectorXd dist =
      (points_.colwise() - point).colwise().squaredNorm().cwiseSqrt().transpose();
  std::vector<double> others;
  others.reserve(size());
  for (std::size_t j = 0; j < size(); ++j) {
    if (j != skip) others.push_back(dist(static_cast<Eigen::Index>(j)));
  }
  const auto kth = others.begin() + (k_ - 1);
  std::nth_element(others.begin(), kth, others.end());
  Neighborhood hood;
  hood.kdist = *kth;
  for (std::size_t j = 0; j < size(); ++j) {
    const double d = dist(static_cast<Eigen::Index>(j));
    if (j != skip && d <= hood.kdist) {
      hood.members.push_back(j);
      hood.distances.push_back(d);
    }
  }
  return hood;
}

double NeighborIndex::LrdOf(const Neighborhood& n) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < n.members.size(); ++i) {
    sum += std::max(kdist_[n.members[i]], n.distances[i]);
  }
  if (sum == 0.0) return kInf;
  return static_cast<double>(n.members.size()) / sum;
}

double LofFromLrds(double own_lrd, const std::vector<double>& neighbor_lrds) {
  double sum = 0.0;
  for (double l : neighbor_lrds) {
    if (std::isinf(own_lrd)) {
      sum += std::isinf(l) ? 1.0 : 0.0;
    } else if (std::isinf(l)) {
      return kInf;
    } else {
      sum += l / own_lrd;
    }
  }
  return sum / static_cast<double>(neighbor_lrds.size());
}

double NeighborIndex::ScoreOf(const Neighborhood& n, double own_lrd) const {
  std::vector<double> lrds;
  lrds.reserve(n.members.size());
  for (std::size_t j : n.members) lrds.push_back(lrd_[j]);
  return LofFromLrds(own_lrd, lrds);
}

double NeighborIndex::KDistance(const Eigen::VectorXd& query) const {
  return Find(query, size()).kdist;
}

double NeighborIndex::ReachDistance(const Eigen::VectorXd& a, std::size_t b) const {
  const double d = (points_.col(static_cast<Eigen::Index>(b)) - a).norm();
  return std::max(kdist_.at(b), d);
}

double NeighborIndex::Lrd(const Eigen::VectorXd& query) const {
  return LrdOf(Find(query, size()));
}

double NeighborIndex::Score(const Eigen::VectorXd& query) const {
  const Neighborhood hood = Find(query, size());
  return ScoreOf(hood, LrdOf(hood));
}

std::vector<double> NeighborIndex::ScoreBatch(const Eigen::MatrixXd& queries,
                                              int jobs) const {
  const auto rows = static_cast<std::size_t>(queries.rows());
  std::vector<double> out(rows);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      out[r] = Score(Eigen::VectorXd(queries.row(static_cast<Eigen::Index>(r)).transpose()));
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(rows, 1));
  if (threads == 1) {
    work(0, rows);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (rows + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    pool.emplace_back(work, begin, std::min(rows, begin + chunk));
  }
  for (auto& th : pool) th.join();
  return out;
}

double Quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

ContaminationChoice TuneContamination(const std::vector<double>& training_scores,
                                      const ScoredSet& validation) {
  validation.RequireBothClasses();
  const std::vector<double> train = ClampInfinite(training_scores);
  ScoredSet valid{ClampInfinite(validation.eta), validation.is_ood};
  ContaminationChoice best;
  bool have = false;
  for (int i = 1; i <= 50; ++i) {
    const double c = i / 100.0;
    const double threshold = Quantile(train, 1.0 - c);
    const double f1 = F1AtThreshold(valid, threshold).macro;
    if (!have || f1 > best.f1) {
      best = {c, threshold, f1};
      have = true;
    }
  }
  return best;
}

}  // namespace oodlr
