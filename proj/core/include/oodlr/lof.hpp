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
// Exact Local Outlier Factor with Euclidean distance. Stored points are
// scored against the rest of the index; query points are scored against the
// stored points without being inserted.

#ifndef OODLR_LOF_HPP_
#define OODLR_LOF_HPP_

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "oodlr/metrics.hpp"

namespace oodlr {

inline constexpr int kDefaultLofNeighbors = 20;

class NeighborIndex {
 public:
  /// points: one row per reference vector. Throws std::invalid_argument
  /// unless k >= 1 and k < points.rows().
  NeighborIndex(const Eigen::MatrixXd& points, int k);

  int k() const { return k_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
  int dim() const { return static_cast<int>(points_.rows()); }

  double KDistance(std::size_t stored) const { return kdist_[stored]; }
  double KDistance(const Eigen::VectorXd& query) const;

  /// max(kdist(b), d(a, b)) for a stored b.
  double ReachDistance(const Eigen::VectorXd& a, std::size_t b) const;

  /// +infinity when every neighbor coincides with the point.
  double Lrd(std::size_t stored) const { return lrd_[stored]; }
  double Lrd(const Eigen::VectorXd& query) const;

  /// Neighbors of a stored point (itself excluded) including ties at rank k.
  const std::vector<std::size_t>& Neighbors(std::size_t stored) const {
    return neighbors_[stored];
  }

  double Score(std::size_t stored) const { return scores_[stored]; }
  double Score(const Eigen::VectorXd& query) const;
  const std::vector<double>& TrainingScores() const { return scores_; }

  /// Scores each row of queries; jobs > 1 splits rows across threads.
  std::vector<double> ScoreBatch(const Eigen::MatrixXd& queries, int jobs = 1) const;

 private:
  struct Neighborhood {
    std::vector<std::size_t> members;
    std::vector<double> distances;
    double kdist = 0.0;
  };
  // skip: stored index to exclude, or size() for none.
  Neighborhood Find(const Eigen::VectorXd& point, std::size_t skip) const;
  double LrdOf(const Neighborhood& n) const;
  double ScoreOf(const Neighborhood& n, double own_lrd) const;

  Eigen::MatrixXd points_;  // one column per stored point
  int k_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<double> kdist_, lrd_, scores_;
};

/// Mean neighbor-to-own lrd ratio given the lrds. Infinite own lrd gives
/// ratio 1 against infinite neighbors and 0 against finite ones; a finite own
/// lrd against an infinite neighbor gives +infinity.
double LofFromLrds(double own_lrd, const std::vector<double>& neighbor_lrds);

struct ContaminationChoice {
  double contamination = 0.0;
  double threshold = 0.0;
  double f1 = 0.0;
};

/// Linear-interpolated quantile of values (q in [0, 1]).
double Quantile(std::vector<double> values, double q);

/// Sweeps contamination 0.01..0.50; each value sets the threshold at the
/// (1 - c) quantile of training LOF scores, and the value with the highest
/// validation macro-F1 wins (earliest on ties).
ContaminationChoice TuneContamination(const std::vector<double>& training_scores,
                                      const ScoredSet& validation);

}  // namespace oodlr

#endif  // OODLR_LOF_HPP_
