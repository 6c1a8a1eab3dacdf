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
// Experiment orchestration. Every stage reads the previous stage's files, so
// stages can run one at a time:
//
//   <out>/<seed>/data/         train/valid/test TSVs, vocab.tsv, labels.tsv
//   <out>/<seed>/checkpoints/  one manifest + payload per trained model
//   <out>/<seed>/scores/       valid.tsv, test.tsv, train_lof.tsv
//   <out>/<seed>/metrics.json
//   <out>/<seed>/curves/     <method>.roc.csv and <method>.pr.csv for test
//   <out>/report.json, <out>/report.tsv

#ifndef OODLR_PIPELINE_HPP_
#define OODLR_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oodlr/config.hpp"
#include "oodlr/corpus.hpp"
#include "oodlr/metrics.hpp"
#include "oodlr/models.hpp"

namespace oodlr {

std::filesystem::path SeedDir(const ExperimentConfig& config, std::uint64_t seed);

struct PreparedData {
  DatasetBundle bundle;
  Vocabulary vocab;
  EncodedSplit train, valid, test;
};

/// Loads the raw TSVs, applies label coarsening, class holdout and the extra
/// OOD split for this seed, builds the vocabulary and writes <seed>/data.
PreparedData PrepareSeed(const ExperimentConfig& config, std::uint64_t seed);
PreparedData LoadPrepared(const ExperimentConfig& config, std::uint64_t seed);

/// Checkpoint stem for a model key such as "disc_softmax" or "backlm_uniroot".
std::filesystem::path CheckpointStem(const ExperimentConfig& config,
                                     std::uint64_t seed, const std::string& key);
/// Model keys needed by the configured methods, in training order.
std::vector<std::string> RequiredModels(const ExperimentConfig& config);

/// Trains every required model that is not already cached.
void TrainSeed(const ExperimentConfig& config, std::uint64_t seed);

/// Writes validation and test scores of every configured method.
void ScoreSeed(const ExperimentConfig& config, std::uint64_t seed);

/// Tunes thresholds on validation scores, evaluates on test and writes
/// <seed>/metrics.json.
SeedMetrics EvalSeed(const ExperimentConfig& config, std::uint64_t seed);
SeedMetrics LoadSeedMetrics(const ExperimentConfig& config, std::uint64_t seed);

/// Aggregates the seeds that have metrics and writes report.json/report.tsv.
EvalReport WriteReport(const ExperimentConfig& config,
                       std::vector<std::pair<std::uint64_t, std::string>> incomplete = {});

/// prepare, train, score and eval for every seed, then report. A failing
/// seed is logged and listed as incomplete.
EvalReport RunExperiment(const ExperimentConfig& config);

/// Writes a noised copy of the seed's training split (labels dropped).
void WriteNoisedTrain(const ExperimentConfig& config, std::uint64_t seed,
                      NoiseKind kind, std::uint64_t epoch,
                      const std::filesystem::path& out);

/// report.json content, exposed for tests.
std::string ReportJson(const EvalReport& report);
std::string ReportTable(const EvalReport& report);

}  // namespace oodlr

#endif  // OODLR_PIPELINE_HPP_
