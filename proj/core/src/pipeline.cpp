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
#include "oodlr/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "oodlr/checkpoint.hpp"
#include "oodlr/lof.hpp"
#include "oodlr/noising.hpp"
#include "oodlr/scoring.hpp"

namespace oodlr {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::int64_t kSplitIdStride = 100'000'000;
constexpr const char* kPreparedSchema = "id,label,text";

fs::path DataDir(const ExperimentConfig& c, std::uint64_t seed) { return SeedDir(c, seed) / "data"; }
fs::path ScoreDir(const ExperimentConfig& c, std::uint64_t seed) { return SeedDir(c, seed) / "scores"; }

std::string NoiseKey(NoiseKind kind) { return "backlm_" + std::string(ToString(kind)); }

std::string ModelKeyName(ModelKey key) {
  switch (key) {
    case ModelKey::kDiscSoftmax: return "disc_softmax";
    case ModelKey::kDiscLmcl: return "disc_lmcl";
    case ModelKey::kLanguageModel: return "lm_main";
    case ModelKey::kGenerative: return "gen";
    case ModelKey::kBackground: break;
  }
  throw std::logic_error("background models are keyed by noise kind");
}

std::uint64_t ModelSeed(std::uint64_t seed, const std::string& key) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : key) h = (h ^ c) * 1099511628211ull;
  return Rng::Derive({seed, h}).NextU64();
}

TrainingOptions Options(const ExperimentConfig& c) {
  TrainingOptions o;
  o.epochs = c.epochs;
  o.batch_size = c.batch_size;
  o.clip_norm = c.clip_norm;
  o.adam.learning_rate = c.learning_rate;
  return o;
}

DiscriminativeClassifierConfig DiscConfig(const ExperimentConfig& c, HeadKind head) {
  DiscriminativeClassifierConfig d;
  d.embedding_dim = c.embedding_dim;
  d.projection_dim = c.projection_dim;
  d.hidden_dim = c.classifier_hidden;
  d.head = head;
  d.lmcl_margin = c.lmcl_margin;
  d.lmcl_scale = c.lmcl_scale;
  d.init_scale = c.init_scale;
  return d;
}

void WriteLabels(const fs::path& path, const DatasetBundle& b) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    out << b.labels[i] << '\t' << b.class_counts[i] << '\n';
  }
}

void ReadLabels(const fs::path& path, DatasetBundle& b) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  b.labels.clear();
  b.class_counts.clear();
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("malformed " + path.string());
    b.labels.push_back(line.substr(0, tab));
    b.class_counts.push_back(std::stoull(line.substr(tab + 1)));
  }
}

void Encode(PreparedData& p) {
  p.train = EncodeSplit(p.bundle.train_id, p.vocab, p.bundle);
  p.valid = EncodeSplit(p.bundle.valid, p.vocab, p.bundle);
  p.test = EncodeSplit(p.bundle.test, p.vocab, p.bundle);
}

void WriteJson(const fs::path& path, const ojson& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

// JSON has no infinities; a tuned threshold may be +-inf.
ojson Real(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double RealFrom(const ojson& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw std::runtime_error("bad number '" + s + "' in metrics file");
}

ojson MetricsJson(const MetricValues& m) {
  return {{"f1", Real(m.f1)},       {"ood_f1", Real(m.ood_f1)},
          {"fpr_at_95_tpr", Real(m.fpr_at_95_tpr)}, {"auroc", Real(m.auroc)},
          {"aupr_ood", Real(m.aupr_ood)}, {"aupr_id", Real(m.aupr_id)},
          {"threshold", Real(m.threshold)}};
}

MetricValues MetricsFromJson(const ojson& j) {
  MetricValues m;
  m.f1 = RealFrom(j.at("f1"));
  m.ood_f1 = RealFrom(j.at("ood_f1"));
  m.fpr_at_95_tpr = RealFrom(j.at("fpr_at_95_tpr"));
  m.auroc = RealFrom(j.at("auroc"));
  m.aupr_ood = RealFrom(j.at("aupr_ood"));
  m.aupr_id = RealFrom(j.at("aupr_id"));
  m.threshold = RealFrom(j.at("threshold"));
  return m;
}

ojson SummaryJson(const Summary& s) {
  return {{"mean", Real(s.mean)}, {"std", Real(s.stddev)}, {"n", s.count}};
}

}  // namespace

fs::path SeedDir(const ExperimentConfig& config, std::uint64_t seed) {
  return fs::path(config.output_dir) / std::to_string(seed);
}

// --- prepare -----------------------------------------------------------------

PreparedData PrepareSeed(const ExperimentConfig& config, std::uint64_t seed) {
  TsvSchema schema = TsvSchema::Parse(config.schema);
  schema.set_ood_label(config.ood_label);
  auto train = LoadTsv(config.train_path, schema, 0);
  auto valid = LoadTsv(config.valid_path, schema, kSplitIdStride);
  auto test = LoadTsv(config.test_path, schema, 2 * kSplitIdStride);
  PreparedData p;
  p.bundle = MakeBundle(std::move(train), std::move(valid), std::move(test));
  if (config.label_mode == LabelMode::kCoarse) {
    p.bundle = CoarsenLabels(p.bundle, config.label_separator.front());
  }
  if (config.holdout_k > 0) {
    p.bundle = MakeHoldoutSplit(p.bundle, config.holdout_k, seed);
  }
  if (!config.ood_path.empty()) {
    auto ood = LoadTsv(config.ood_path, schema, 3 * kSplitIdStride);
    for (auto& u : ood) {
      u.is_ood = true;
      u.label.reset();
    }
    auto count_id = [](const std::vector<Utterance>& rows) {
      std::size_t n = 0;
      for (const auto& u : rows) n += u.is_ood ? 0 : 1;
      return n;
    };
    const double frac = config.ood_valid_fraction >= 0.0
                            ? config.ood_valid_fraction
                            : ProportionalValidFraction(count_id(p.bundle.valid),
                                                        count_id(p.bundle.test));
    OodSplit split = SplitOod(std::move(ood), frac, seed);
    for (auto& u : split.valid) p.bundle.valid.push_back(std::move(u));
    for (auto& u : split.test) p.bundle.test.push_back(std::move(u));
  }
  p.vocab = Vocabulary::Build(p.bundle.train_id, static_cast<std::size_t>(config.min_freq));

  const fs::path dir = DataDir(config, seed);
  fs::create_directories(dir);
  SaveTsv(dir / "train.tsv", p.bundle.train_id, config.ood_label);
  SaveTsv(dir / "valid.tsv", p.bundle.valid, config.ood_label);
  SaveTsv(dir / "test.tsv", p.bundle.test, config.ood_label);
  p.vocab.Save(dir / "vocab.tsv");
  WriteLabels(dir / "labels.tsv", p.bundle);
  Encode(p);
  spdlog::info("seed {}: {} train, {} valid, {} test rows, {} labels, vocabulary {}", seed,
               p.bundle.train_id.size(), p.bundle.valid.size(), p.bundle.test.size(),
               p.bundle.labels.size(), p.vocab.size());
  return p;
}

PreparedData LoadPrepared(const ExperimentConfig& config, std::uint64_t seed) {
  const fs::path dir = DataDir(config, seed);
  if (!fs::exists(dir / "labels.tsv")) {
    throw std::runtime_error("no prepared data in " + dir.string() + " (run prepare first)");
  }
  TsvSchema schema = TsvSchema::Parse(kPreparedSchema);
  schema.set_ood_label(config.ood_label);
  PreparedData p;
  p.bundle.train_id = LoadTsv(dir / "train.tsv", schema);
  p.bundle.valid = LoadTsv(dir / "valid.tsv", schema);
  p.bundle.test = LoadTsv(dir / "test.tsv", schema);
  ReadLabels(dir / "labels.tsv", p.bundle);
  p.vocab = Vocabulary::Load(dir / "vocab.tsv");
  Encode(p);
  return p;
}

// --- train -------------------------------------------------------------------

fs::path CheckpointStem(const ExperimentConfig& config, std::uint64_t seed,
                        const std::string& key) {
  return SeedDir(config, seed) / "checkpoints" / key;
}

std::vector<std::string> RequiredModels(const ExperimentConfig& config) {
  std::vector<std::string> keys;
  auto add = [&](const std::string& k) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  };
  for (Method m : config.methods) {
    const MethodNeeds needs = NeedsOf(m);
    add(ModelKeyName(needs.main));
    if (needs.background) add(NoiseKey(*needs.background));
  }
  return keys;
}

void TrainSeed(const ExperimentConfig& config, std::uint64_t seed) {
  const PreparedData data = LoadPrepared(config, seed);
  const VocabularyTag tag = VocabularyTag::Of(data.vocab);
  const TrainingOptions options = Options(config);
  std::optional<PretrainedVectors> glove;
  if (!config.glove_path.empty()) glove = LoadPretrainedVectors(config.glove_path, data.vocab);
  const PretrainedVectors* pretrained = glove ? &*glove : nullptr;

  for (const std::string& key : RequiredModels(config)) {
    const fs::path stem = CheckpointStem(config, seed, key);
    if (config.cache_models && CheckpointExists(stem)) {
      spdlog::info("seed {}: reusing {}", seed, stem.string());
      continue;
    }
    const std::uint64_t model_seed = ModelSeed(seed, key);
    spdlog::info("seed {}: training {}", seed, key);
    TrainingLog log;
    if (key == "disc_softmax" || key == "disc_lmcl") {
      auto t = TrainDiscriminativeClassifier(
          data.train, data.valid, tag, data.bundle.NumClasses(),
          DiscConfig(config, key == "disc_lmcl" ? HeadKind::kLmcl : HeadKind::kSoftmax), options,
          model_seed, &data.vocab, pretrained);
      t.model.Save(stem, model_seed);
      log = t.log;
    } else if (key == "gen") {
      GenerativeClassifierConfig g{config.embedding_dim, config.lm_hidden,
                                   config.label_embedding_dim, config.init_scale};
      auto t = TrainGenerativeClassifier(data.train, data.valid, tag, data.bundle.class_counts,
                                         g, options, model_seed, &data.vocab, pretrained);
      t.model.Save(stem, model_seed);
      log = t.log;
    } else if (key == "lm_main") {
      LanguageModelConfig lm{config.embedding_dim, config.lm_hidden, config.init_scale};
      auto t = TrainLanguageModel(data.train, data.valid, tag, lm, options, model_seed);
      t.model.Save(stem, model_seed);
      log = t.log;
    } else {
      const NoiseKind kind = ParseNoiseKind(key.substr(std::string("backlm_").size()));
      const NoiseDistribution dist = NoiseDistribution::Build(data.vocab, kind);
      const BackgroundNoise noise{&dist, config.noise_p, config.noise_resample};
      LanguageModelConfig lm{config.embedding_dim, config.background_hidden, config.init_scale};
      auto t = TrainLanguageModel(data.train, data.valid, tag, lm, options, model_seed, &noise);
      t.model.Save(stem, model_seed);
      log = t.log;
    }
    const auto& best = log.epochs.at(static_cast<std::size_t>(log.best_epoch - 1));
    spdlog::info("seed {}: {} best epoch {} (selection metric {:.4f})", seed, key,
                 log.best_epoch, best.selection_metric);
  }
}

// --- score -------------------------------------------------------------------

namespace {

struct SplitScores {
  std::map<std::string, std::vector<double>> valid, test, train_lof;
};

class ModelCache {
 public:
  ModelCache(const ExperimentConfig& c, std::uint64_t seed) : config_(c), seed_(seed) {}

  const DiscriminativeClassifier& Disc(const std::string& key) {
    return Get(disc_, key, [&](const fs::path& s) { return DiscriminativeClassifier::Load(s); });
  }
  const GenerativeClassifier& Gen() {
    return Get(gen_, "gen", [&](const fs::path& s) { return GenerativeClassifier::Load(s); });
  }
  const LanguageModel& Lm(const std::string& key) {
    return Get(lm_, key, [&](const fs::path& s) { return LanguageModel::Load(s); });
  }

 private:
  template <typename Model, typename LoadFn>
  const Model& Get(std::map<std::string, Model>& cache, const std::string& key, LoadFn load) {
    auto it = cache.find(key);
    if (it == cache.end()) {
      const fs::path stem = CheckpointStem(config_, seed_, key);
      if (!CheckpointExists(stem)) {
        throw std::runtime_error("missing checkpoint " + stem.string() + " (run train first)");
      }
      it = cache.emplace(key, load(stem)).first;
    }
    return it->second;
  }

  const ExperimentConfig& config_;
  std::uint64_t seed_;
  std::map<std::string, DiscriminativeClassifier> disc_;
  std::map<std::string, GenerativeClassifier> gen_;
  std::map<std::string, LanguageModel> lm_;
};

void RequireVocab(VocabularyTag model, const Vocabulary& vocab, const std::string& key) {
  if (!(model == VocabularyTag::Of(vocab))) {
    throw std::runtime_error("checkpoint " + key +
                             " was trained on a different vocabulary than the prepared data");
  }
}

std::vector<double> Negated(std::vector<double> v) {
  for (double& x : v) x = -x;
  return v;
}

std::vector<double> Difference(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

}  // namespace

void ScoreSeed(const ExperimentConfig& config, std::uint64_t seed) {
  const PreparedData data = LoadPrepared(config, seed);
  ModelCache models(config, seed);
  const EncodedSplit* splits[2] = {&data.valid, &data.test};
  SplitScores scores;
  std::map<std::string, std::vector<double>>* out[2] = {&scores.valid, &scores.test};
  const std::vector<double> uniform = UniformReference(data.bundle.NumClasses());
  const std::vector<double> ratios = LabelRatioReference(data.bundle.class_counts);

  for (Method method : config.methods) {
    const std::string name(MethodName(method));
    const MethodNeeds needs = NeedsOf(method);
    spdlog::info("seed {}: scoring {}", seed, name);
    if (method == Method::kLof || method == Method::kLofLmcl) {
      const std::string key = ModelKeyName(needs.main);
      const auto& disc = models.Disc(key);
      RequireVocab(disc.vocab(), data.vocab, key);
      const int k = std::min<int>(config.lof_k, static_cast<int>(data.train.size()) - 1);
      const NeighborIndex index(disc.Features(data.train.sequences), k);
      scores.train_lof[name] = index.TrainingScores();
      for (int s = 0; s < 2; ++s) {
        (*out[s])[name] = index.ScoreBatch(disc.Features(splits[s]->sequences), config.jobs);
      }
      continue;
    }
    for (int s = 0; s < 2; ++s) {
      const auto& seqs = splits[s]->sequences;
      std::vector<double> eta;
      switch (needs.main) {
        case ModelKey::kDiscSoftmax: {
          const auto& disc = models.Disc("disc_softmax");
          RequireVocab(disc.vocab(), data.vocab, "disc_softmax");
          const double tau = method == Method::kMspT1e3 ? config.msp_temperature : 1.0;
          const nn::Matrix post = disc.Posteriors(seqs, tau);
          std::vector<double> row(static_cast<std::size_t>(post.cols()));
          for (Eigen::Index r = 0; r < post.rows(); ++r) {
            for (Eigen::Index c = 0; c < post.cols(); ++c) row[static_cast<std::size_t>(c)] = post(r, c);
            if (method == Method::kNegKlUniform) {
              eta.push_back(ScoreNegKl(row, uniform));
            } else if (method == Method::kNegKlRatio) {
              eta.push_back(ScoreNegKl(row, ratios));
            } else {
              eta.push_back(ScoreMsp(row));
            }
          }
          break;
        }
        case ModelKey::kLanguageModel:
        case ModelKey::kGenerative: {
          std::vector<double> main_ll;
          if (needs.main == ModelKey::kLanguageModel) {
            const auto& lm = models.Lm("lm_main");
            RequireVocab(lm.vocab(), data.vocab, "lm_main");
            main_ll = lm.LogLikelihoods(seqs);
          } else {
            const auto& gen = models.Gen();
            RequireVocab(gen.vocab(), data.vocab, "gen");
            main_ll = gen.MarginalLogLikelihoods(seqs);
          }
          if (needs.background) {
            const std::string key = NoiseKey(*needs.background);
            const auto& back = models.Lm(key);
            RequireVocab(back.vocab(), data.vocab, key);
            eta = Difference(back.LogLikelihoods(seqs), main_ll);
          } else {
            eta = Negated(std::move(main_ll));
          }
          break;
        }
        default:
          throw std::logic_error("unhandled scorer " + name);
      }
      (*out[s])[name] = std::move(eta);
    }
  }

  auto write = [&](const fs::path& path, const EncodedSplit* split,
                   const std::map<std::string, std::vector<double>>& by_method) {
    std::vector<OodScore> rows;
    for (Method method : config.methods) {
      const std::string name(MethodName(method));
      auto it = by_method.find(name);
      if (it == by_method.end()) continue;
      std::vector<double> eta = it->second;
      ClampScores(eta);
      for (std::size_t i = 0; i < eta.size(); ++i) {
        rows.push_back({split ? std::to_string(split->ids[i]) : std::to_string(data.train.ids[i]),
                        name, eta[i], split ? static_cast<bool>(split->is_ood[i]) : false});
      }
    }
    WriteScores(path, rows);
  };
  write(ScoreDir(config, seed) / "valid.tsv", &data.valid, scores.valid);
  write(ScoreDir(config, seed) / "test.tsv", &data.test, scores.test);
  write(ScoreDir(config, seed) / "train_lof.tsv", nullptr, scores.train_lof);
}

// --- eval --------------------------------------------------------------------

namespace {
std::map<std::string, ScoredSet> GroupScores(const std::vector<OodScore>& rows) {
  std::map<std::string, ScoredSet> out;
  for (const auto& r : rows) {
    auto& set = out[r.method];
    set.eta.push_back(r.eta);
    set.is_ood.push_back(r.is_ood);
  }
  return out;
}
}  // namespace

namespace {
std::string Shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void WriteCurves(const fs::path& dir, const std::string& method, const ScoredSet& test) {
  fs::create_directories(dir);
  std::ofstream roc(dir / (method + ".roc.csv"), std::ios::binary);
  roc << "threshold,tpr,fpr\n";
  for (const auto& p : RocCurve(test))
    roc << Shortest(p.threshold) << ',' << Shortest(p.tpr) << ',' << Shortest(p.fpr) << '\n';
  std::ofstream pr(dir / (method + ".pr.csv"), std::ios::binary);
  pr << "threshold,precision,recall\n";
  for (const auto& p : PrCurve(test))
    pr << Shortest(p.threshold) << ',' << Shortest(p.precision) << ',' << Shortest(p.recall) << '\n';
  if (!roc || !pr) throw std::runtime_error("cannot write curves under " + dir.string());
}
}  // namespace

SeedMetrics EvalSeed(const ExperimentConfig& config, std::uint64_t seed) {
  const fs::path dir = ScoreDir(config, seed);
  const auto valid = GroupScores(ReadScores(dir / "valid.tsv"));
  const auto test = GroupScores(ReadScores(dir / "test.tsv"));
  std::map<std::string, ScoredSet> train_lof;
  if (fs::exists(dir / "train_lof.tsv")) train_lof = GroupScores(ReadScores(dir / "train_lof.tsv"));

  SeedMetrics metrics;
  metrics.seed = seed;
  ojson doc = {{"seed", seed}, {"methods", ojson::object()}};
  for (Method method : config.methods) {
    const std::string name(MethodName(method));
    auto v = valid.find(name);
    auto t = test.find(name);
    if (v == valid.end() || t == test.end()) {
      throw std::runtime_error("no scores for method " + name + " in " + dir.string() +
                               " (run score first)");
    }
    double threshold;
    if (method == Method::kLof || method == Method::kLofLmcl) {
      auto tr = train_lof.find(name);
      if (tr == train_lof.end()) throw std::runtime_error("missing training LOF scores for " + name);
      const ContaminationChoice choice = TuneContamination(tr->second.eta, v->second);
      threshold = choice.threshold;
      spdlog::info("seed {}: {} contamination {:.2f}", seed, name, choice.contamination);
    } else {
      v->second.RequireBothClasses();
      threshold = TuneThreshold(v->second);
    }
    const MetricValues m = Evaluate(t->second, threshold);
    WriteCurves(SeedDir(config, seed) / "curves", name, t->second);
    metrics.methods.emplace_back(name, m);
    doc["methods"][name] = MetricsJson(m);
  }
  WriteJson(SeedDir(config, seed) / "metrics.json", doc);
  return metrics;
}

SeedMetrics LoadSeedMetrics(const ExperimentConfig& config, std::uint64_t seed) {
  const fs::path path = SeedDir(config, seed) / "metrics.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " (run eval first)");
  const ojson doc = ojson::parse(in);
  SeedMetrics m;
  m.seed = seed;
  for (auto it = doc.at("methods").begin(); it != doc.at("methods").end(); ++it) {
    m.methods.emplace_back(it.key(), MetricsFromJson(it.value()));
  }
  return m;
}

// --- report ------------------------------------------------------------------

std::string ReportJson(const EvalReport& report) {
  ojson doc;
  doc["seeds"] = report.seeds;
  doc["methods"] = ojson::array();
  for (const auto& m : report.methods) {
    doc["methods"].push_back({{"method", m.method},
                              {"f1", SummaryJson(m.f1)},
                              {"ood_f1", SummaryJson(m.ood_f1)},
                              {"fpr_at_95_tpr", SummaryJson(m.fpr_at_95_tpr)},
                              {"auroc", SummaryJson(m.auroc)},
                              {"aupr_ood", SummaryJson(m.aupr_ood)},
                              {"aupr_id", SummaryJson(m.aupr_id)}});
  }
  doc["per_seed"] = ojson::array();
  for (const auto& s : report.per_seed) {
    ojson methods = ojson::object();
    for (const auto& [name, values] : s.methods) methods[name] = MetricsJson(values);
    doc["per_seed"].push_back({{"seed", s.seed}, {"methods", methods}});
  }
  doc["incomplete"] = ojson::array();
  for (const auto& [seed, error] : report.incomplete) {
    doc["incomplete"].push_back({{"seed", seed}, {"error", error}});
  }
  return doc.dump(2) + "\n";
}

std::string ReportTable(const EvalReport& report) {
  std::string out = "method\tF1\tOOD_F1\tFPR@95%TPR\tAUROC\tAUPR_OOD\tAUPR_ID\n";
  for (const auto& m : report.methods) {
    out += m.method + '\t' + FormatMeanStd(m.f1) + '\t' + FormatMeanStd(m.ood_f1) + '\t' +
           FormatMeanStd(m.fpr_at_95_tpr) + '\t' + FormatMeanStd(m.auroc) + '\t' +
           FormatMeanStd(m.aupr_ood) + '\t' + FormatMeanStd(m.aupr_id) + '\n';
  }
  return out;
}

EvalReport WriteReport(const ExperimentConfig& config,
                       std::vector<std::pair<std::uint64_t, std::string>> incomplete) {
  std::set<std::uint64_t> failed;
  for (const auto& [seed, error] : incomplete) failed.insert(seed);
  std::vector<SeedMetrics> seeds;
  for (std::uint64_t seed : config.seeds) {
    if (failed.count(seed)) continue;
    if (!fs::exists(SeedDir(config, seed) / "metrics.json")) {
      incomplete.emplace_back(seed, "no metrics.json");
      continue;
    }
    try {
      seeds.push_back(LoadSeedMetrics(config, seed));
    } catch (const std::exception& e) {
      incomplete.emplace_back(seed, e.what());
    }
  }
  EvalReport report = AggregateSeeds(std::move(seeds));
  std::sort(incomplete.begin(), incomplete.end());
  report.incomplete = std::move(incomplete);
  fs::create_directories(config.output_dir);
  {
    std::ofstream out(fs::path(config.output_dir) / "report.json", std::ios::trunc);
    out << ReportJson(report);
  }
  std::ofstream out(fs::path(config.output_dir) / "report.tsv", std::ios::trunc);
  out << ReportTable(report);
  return report;
}

EvalReport RunExperiment(const ExperimentConfig& config) {
  config.Validate();
  std::vector<std::pair<std::uint64_t, std::string>> incomplete;
  for (std::uint64_t seed : config.seeds) {
    try {
      PrepareSeed(config, seed);
      TrainSeed(config, seed);
      ScoreSeed(config, seed);
      EvalSeed(config, seed);
    } catch (const std::exception& e) {
      spdlog::error("seed {} failed: {}", seed, e.what());
      incomplete.emplace_back(seed, e.what());
    }
  }
  return WriteReport(config, std::move(incomplete));
}

void WriteNoisedTrain(const ExperimentConfig& config, std::uint64_t seed, NoiseKind kind,
                      std::uint64_t epoch, const fs::path& out) {
  const PreparedData data = LoadPrepared(config, seed);
  const NoiseDistribution dist = NoiseDistribution::Build(data.vocab, kind);
  const auto noised =
      NoiseCorpus(data.bundle.train_id, dist, data.vocab, config.noise_p, seed, epoch);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  SaveTsv(out, noised, config.ood_label);
}

}  // namespace oodlr
