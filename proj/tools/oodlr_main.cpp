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
// oodlr command-line tool. Logs go to stderr; artifacts go to files.

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "oodlr/config.hpp"
#include "oodlr/noising.hpp"
#include "oodlr/pipeline.hpp"
#include "oodlr/synthetic.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::uint64_t> seeds;
  bool verbose = false;
  bool quiet = false;
};

void AddCommonOptions(CLI::App& cmd, Common& common) {
  cmd.add_option("-c,--config", common.config_path, "experiment config file");
  cmd.add_option("--seed", common.seeds, "restrict per-seed stages to these seeds");
  cmd.add_flag("-v,--verbose", common.verbose, "debug logging");
  cmd.add_flag("-q,--quiet", common.quiet, "warnings and errors only");
  for (const auto& key : oodlr::ConfigKeys()) {
    const std::string name(key.name);
    cmd.add_option_function<std::string>(
        "--" + name, [&common, name](const std::string& v) { common.overrides[name] = v; },
        std::string(key.help));
  }
}

oodlr::ExperimentConfig BuildConfig(const Common& common, bool need_paths) {
  oodlr::ExperimentConfig config;
  try {
    if (!common.config_path.empty()) config = oodlr::LoadConfig(common.config_path);
    for (const auto& [k, v] : common.overrides) config.Set(k, v);
    if (need_paths) config.Validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return config;
}

std::vector<std::uint64_t> Seeds(const Common& common, const oodlr::ExperimentConfig& config) {
  return common.seeds.empty() ? config.seeds : common.seeds;
}

template <typename Fn>
int PerSeed(const Common& common, const oodlr::ExperimentConfig& config, const char* stage, Fn fn) {
  int status = 0;
  for (std::uint64_t seed : Seeds(common, config)) {
    try {
      fn(seed);
    } catch (const std::exception& e) {
      spdlog::error("{} failed for seed {}: {}", stage, seed, e.what());
      status = kExitFailure;
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("oodlr");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  CLI::App app{"Out-of-domain detection with likelihood ratios and generative classifiers"};
  app.require_subcommand(1);
  Common common;

  auto* prepare = app.add_subcommand("prepare", "build per-seed splits and vocabularies");
  auto* train = app.add_subcommand("train", "train the models the configured methods need");
  auto* score = app.add_subcommand("score", "write OOD scores for validation and test");
  auto* eval = app.add_subcommand("eval", "tune thresholds and compute per-seed metrics");
  auto* report = app.add_subcommand("report", "aggregate per-seed metrics");
  auto* run = app.add_subcommand("run", "all stages for every seed");
  for (auto* cmd : {prepare, train, score, eval, report, run}) AddCommonOptions(*cmd, common);

  auto* synth = app.add_subcommand("synth", "write the synthetic disjoint-vocabulary benchmark");
  std::string synth_out = "synthetic";
  std::uint64_t synth_seed = 0;
  oodlr::SyntheticSpec spec;
  synth->add_option("-o,--out", synth_out, "output directory");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--train", spec.train, "in-domain training rows");
  synth->add_option("--valid", spec.valid, "in-domain validation rows");
  synth->add_option("--test", spec.test, "in-domain test rows");
  synth->add_option("--ood-valid", spec.ood_valid, "OOD validation rows");
  synth->add_option("--ood-test", spec.ood_test, "OOD test rows");
  synth->add_option("--classes", spec.num_classes, "in-domain classes");
  synth->add_flag("-v,--verbose", common.verbose, "debug logging");
  synth->add_flag("-q,--quiet", common.quiet, "warnings and errors only");

  auto* noise = app.add_subcommand("noise", "write a noised copy of a seed's training split");
  AddCommonOptions(*noise, common);
  std::string noise_kind = "uniroot";
  std::uint64_t noise_epoch = 0;
  std::string noise_out;
  noise->add_option("--kind", noise_kind, "uniform, unigram or uniroot");
  noise->add_option("--epoch", noise_epoch, "epoch index keying the noise draw");
  noise->add_option("-o,--out", noise_out, "output TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }
  if (common.verbose) spdlog::set_level(spdlog::level::debug);
  if (common.quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (synth->parsed()) {
      const auto bench = oodlr::MakeSyntheticBenchmark(synth_seed, spec);
      oodlr::WriteSyntheticBenchmark(bench, synth_out);
      const std::filesystem::path dir(synth_out);
      std::ofstream conf(dir / "oodlr.conf", std::ios::trunc);
      conf << "train_path = " << (dir / "train.tsv").string() << "\n"
           << "valid_path = " << (dir / "valid.tsv").string() << "\n"
           << "test_path = " << (dir / "test.tsv").string() << "\n"
           << "schema = " << oodlr::kSyntheticSchema << "\n";
      spdlog::info("wrote synthetic benchmark to {}", synth_out);
      return 0;
    }
    const bool needs_paths = prepare->parsed() || run->parsed();
    const oodlr::ExperimentConfig config = BuildConfig(common, needs_paths);
    if (run->parsed()) {
      const auto result = oodlr::RunExperiment(config);
      return result.incomplete.empty() ? 0 : kExitFailure;
    }
    if (report->parsed()) {
      const auto result = oodlr::WriteReport(config);
      return result.incomplete.empty() ? 0 : kExitFailure;
    }
    if (prepare->parsed()) {
      return PerSeed(common, config, "prepare", [&](auto s) { oodlr::PrepareSeed(config, s); });
    }
    if (train->parsed()) {
      return PerSeed(common, config, "train", [&](auto s) { oodlr::TrainSeed(config, s); });
    }
    if (score->parsed()) {
      return PerSeed(common, config, "score", [&](auto s) { oodlr::ScoreSeed(config, s); });
    }
    if (eval->parsed()) {
      return PerSeed(common, config, "eval", [&](auto s) { oodlr::EvalSeed(config, s); });
    }
    if (noise->parsed()) {
      const oodlr::NoiseKind kind = oodlr::ParseNoiseKind(noise_kind);
      return PerSeed(common, config, "noise", [&](auto s) {
        oodlr::WriteNoisedTrain(config, s, kind, noise_epoch, noise_out);
      });
    }
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return 0;
}
