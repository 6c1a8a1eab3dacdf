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
#include "oodlr/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "oodlr/checkpoint.hpp"
#include "oodlr/metrics.hpp"

namespace oodlr {

using nn::Matrix;

namespace {

constexpr std::size_t kScoringBatch = 64;

std::string HexU64(std::uint64_t v) {
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, 16);
  return std::string(buf, end);
}

std::uint64_t ParseHexU64(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("bad hex value '" + s + "' in checkpoint");
  }
  return v;
}

void PutVocab(CheckpointManifest& m, VocabularyTag v) {
  m.numbers["vocab_size"] = static_cast<double>(v.size);
  m.strings["vocab_fingerprint"] = HexU64(v.fingerprint);
}

VocabularyTag GetVocab(const CheckpointManifest& m) {
  return {static_cast<std::size_t>(m.Number("vocab_size")),
          ParseHexU64(m.String("vocab_fingerprint"))};
}

void RequireKind(const CheckpointManifest& m, const char* kind) {
  if (m.model_kind != kind) {
    throw std::runtime_error("checkpoint holds a '" + m.model_kind +
                             "', expected '" + kind + "'");
  }
}

int AsInt(double v) { return static_cast<int>(std::lround(v)); }

// Runs fn(batch, first_row) over consecutive chunks of encoded.
template <typename Fn>
void ForEachBatch(const std::vector<std::vector<int>>& encoded,
                  std::size_t batch_size, Fn&& fn) {
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < encoded.size(); start += batch_size) {
    const std::size_t end = std::min(encoded.size(), start + batch_size);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    fn(nn::MakeBatch(encoded, rows, nullptr, Vocabulary::kPad), start);
  }
}

std::vector<double> RowSums(const std::vector<int>& row_of,
                            const std::vector<double>& values,
                            std::size_t rows) {
  std::vector<double> sums(rows, 0.0);
  for (std::size_t n = 0; n < values.size(); ++n) {
    sums[static_cast<std::size_t>(row_of[n])] += values[n];
  }
  return sums;
}

double LogSumExp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double max = v.maxCoeff();
  if (!std::isfinite(max)) return max;
  return max + std::log((v.array() - max).exp().sum());
}

std::vector<double> Row(const Matrix& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

nn::SequenceBatch SingleBatch(std::span<const int> encoded, int label = -1) {
  std::vector<std::vector<int>> one{std::vector<int>(encoded.begin(), encoded.end())};
  std::vector<int> labels{label};
  return nn::MakeBatch(one, label >= 0 ? &labels : nullptr, Vocabulary::kPad);
}

}  // namespace

// --- Encoded splits ----------------------------------------------------------

EncodedSplit EncodedSplit::InDomain() const {
  EncodedSplit out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (is_ood[i]) continue;
    out.sequences.push_back(sequences[i]);
    out.labels.push_back(labels[i]);
    out.ids.push_back(ids[i]);
    out.is_ood.push_back(false);
  }
  return out;
}

EncodedSplit EncodeSplit(const std::vector<Utterance>& rows,
                         const Vocabulary& vocab, const DatasetBundle& bundle) {
  EncodedSplit out;
  for (const auto& u : rows) {
    out.sequences.push_back(Encode(u, vocab));
    out.labels.push_back(u.label ? bundle.LabelIndex(*u.label) : -1);
    out.ids.push_back(u.id);
    out.is_ood.push_back(u.is_ood);
  }
  return out;
}

// --- CausalEncoder -----------------------------------------------------------

CausalEncoder::CausalEncoder(nn::ParameterStore& store,
                             const std::string& prefix, int vocab_size,
                             int embedding_dim, int hidden_dim,
                             double init_scale, Rng& rng)
    : embedding_(store, prefix + ".embedding", vocab_size, embedding_dim,
                 init_scale, rng),
      lstm_(store, prefix + ".lstm", embedding_dim, hidden_dim, init_scale,
            rng) {}

CausalEncoder::Pass CausalEncoder::Forward(const nn::ParameterStore& store,
                                           const nn::SequenceBatch& batch,
                                           bool keep_tape) const {
  Pass pass;
  const auto rows = static_cast<Eigen::Index>(batch.size());
  const int steps = std::max(0, batch.max_length() - 1);
  std::vector<Matrix> inputs;
  inputs.reserve(static_cast<std::size_t>(steps));
  pass.step_ids.resize(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    auto& ids = pass.step_ids[static_cast<std::size_t>(t)];
    ids.resize(static_cast<std::size_t>(rows));
    for (Eigen::Index b = 0; b < rows; ++b) ids[static_cast<std::size_t>(b)] = batch.ids(b, t);
    inputs.push_back(embedding_.Forward(store, ids));
  }
  nn::Lstm::Tape local_tape;
  const std::vector<Matrix> hidden =
      lstm_.Forward(store, inputs, keep_tape ? &pass.tape : &local_tape);

  for (Eigen::Index b = 0; b < rows; ++b) {
    const int len = batch.lengths[static_cast<std::size_t>(b)];
    for (int t = 0; t + 1 < len; ++t) {
      pass.row.push_back(static_cast<int>(b));
      pass.step.push_back(t);
      pass.target.push_back(batch.ids(b, t + 1));
    }
  }
  pass.hidden.resize(static_cast<Eigen::Index>(pass.row.size()), lstm_.hidden_dim());
  for (std::size_t n = 0; n < pass.row.size(); ++n) {
    pass.hidden.row(static_cast<Eigen::Index>(n)) =
        hidden[static_cast<std::size_t>(pass.step[n])].row(pass.row[n]);
  }
  return pass;
}

void CausalEncoder::Backward(nn::ParameterStore& store, const Pass& pass,
                             const Matrix& d_hidden) const {
  const std::size_t steps = pass.step_ids.size();
  if (steps == 0) return;
  const auto rows = static_cast<Eigen::Index>(pass.step_ids.front().size());
  std::vector<Matrix> d_states(steps, Matrix::Zero(rows, lstm_.hidden_dim()));
  for (std::size_t n = 0; n < pass.row.size(); ++n) {
    d_states[static_cast<std::size_t>(pass.step[n])].row(pass.row[n]) +=
        d_hidden.row(static_cast<Eigen::Index>(n));
  }
  const std::vector<Matrix> d_inputs = lstm_.Backward(store, pass.tape, d_states);
  for (std::size_t t = 0; t < steps; ++t) {
    embedding_.Backward(store, pass.step_ids[t], d_inputs[t]);
  }
}

// --- LanguageModel -----------------------------------------------------------

LanguageModel::LanguageModel(VocabularyTag vocab,
                             const LanguageModelConfig& config, Rng& rng)
    : vocab_(vocab), config_(config) {
  const int v = static_cast<int>(vocab.size);
  encoder_ = CausalEncoder(store_, "lm", v, config.embedding_dim,
                           config.hidden_dim, config.init_scale, rng);
  output_ = nn::Linear(store_, "lm.output", config.hidden_dim, v, true,
                       config.init_scale, rng);
}

nn::CrossEntropy LanguageModel::Loss(const nn::SequenceBatch& batch,
                                     bool backprop, double grad_scale) {
  const auto pass = encoder_.Forward(store_, batch, backprop);
  const Matrix logits = output_.Forward(store_, pass.hidden);
  Matrix d_logits;
  const nn::CrossEntropy ce = nn::FlatCrossEntropy(
      logits, pass.target, nullptr, backprop ? &d_logits : nullptr, grad_scale);
  if (backprop) {
    const Matrix d_hidden = output_.Backward(store_, pass.hidden, d_logits);
    encoder_.Backward(store_, pass, d_hidden);
  }
  return ce;
}

std::vector<double> LanguageModel::LogLikelihoods(
    const nn::SequenceBatch& batch) const {
  const auto pass = encoder_.Forward(store_, batch, false);
  const Matrix logits = output_.Forward(store_, pass.hidden);
  std::vector<double> losses;
  nn::FlatCrossEntropy(logits, pass.target, &losses);
  std::vector<double> sums = RowSums(pass.row, losses, batch.size());
  for (double& s : sums) s = -s;
  return sums;
}

std::vector<double> LanguageModel::LogLikelihoods(
    const std::vector<std::vector<int>>& encoded, std::size_t batch_size) const {
  std::vector<double> out(encoded.size());
  ForEachBatch(encoded, batch_size, [&](const nn::SequenceBatch& b, std::size_t first) {
    const auto ll = LogLikelihoods(b);
    std::copy(ll.begin(), ll.end(), out.begin() + static_cast<std::ptrdiff_t>(first));
  });
  return out;
}

double LanguageModel::LogLikelihood(std::span<const int> encoded) const {
  return LogLikelihoods(SingleBatch(encoded)).front();
}

double LanguageModel::Perplexity(
    const std::vector<std::vector<int>>& encoded) const {
  double total = 0.0;
  std::size_t tokens = 0;
  const auto ll = LogLikelihoods(encoded);
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    total -= ll[i];
    tokens += encoded[i].size() - 1;
  }
  return tokens ? std::exp(total / static_cast<double>(tokens)) : 1.0;
}

void LanguageModel::Save(const std::filesystem::path& stem,
                         std::uint64_t seed) const {
  CheckpointManifest m;
  m.model_kind = kKind;
  m.seed = seed;
  PutVocab(m, vocab_);
  m.numbers["embedding_dim"] = config_.embedding_dim;
  m.numbers["hidden_dim"] = config_.hidden_dim;
  m.numbers["init_scale"] = config_.init_scale;
  SaveCheckpoint(stem, store_, m);
}

LanguageModel LanguageModel::Load(const std::filesystem::path& stem) {
  const CheckpointManifest m = ReadManifest(stem);
  RequireKind(m, kKind);
  LanguageModelConfig config;
  config.embedding_dim = AsInt(m.Number("embedding_dim"));
  config.hidden_dim = AsInt(m.Number("hidden_dim"));
  config.init_scale = m.Number("init_scale");
  Rng rng(0);
  LanguageModel model(GetVocab(m), config, rng);
  LoadParameters(stem, model.store_);
  return model;
}

// --- GenerativeClassifier ----------------------------------------------------

GenerativeClassifier::GenerativeClassifier(
    VocabularyTag vocab, std::vector<std::size_t> class_counts,
    const GenerativeClassifierConfig& config, Rng& rng)
    : vocab_(vocab), config_(config), class_counts_(std::move(class_counts)) {
  if (class_counts_.empty()) {
    throw std::invalid_argument("generative classifier needs at least one label");
  }
  const double total = static_cast<double>(
      std::accumulate(class_counts_.begin(), class_counts_.end(), std::size_t{0}));
  if (!(total > 0.0)) throw std::invalid_argument("class counts sum to zero");
  for (std::size_t c : class_counts_) {
    log_prior_.push_back(c ? std::log(static_cast<double>(c) / total)
                           : -std::numeric_limits<double>::infinity());
  }
  const int v = static_cast<int>(vocab.size);
  encoder_ = CausalEncoder(store_, "gen", v, config.embedding_dim,
                           config.hidden_dim, config.init_scale, rng);
  label_table_ = store_.Add("gen.label_embedding",
                            static_cast<Eigen::Index>(class_counts_.size()),
                            config.label_embedding_dim);
  nn::InitUniform(store_.value(label_table_), config.init_scale, rng);
  output_ = nn::Linear(store_, "gen.output",
                       config.hidden_dim + config.label_embedding_dim, v, true,
                       config.init_scale, rng);
}

nn::CrossEntropy GenerativeClassifier::Loss(const nn::SequenceBatch& batch,
                                            bool backprop, double grad_scale) {
  if (batch.labels.size() != batch.size()) {
    throw std::invalid_argument("generative classifier loss needs labels");
  }
  const auto pass = encoder_.Forward(store_, batch, backprop);
  const int h = config_.hidden_dim;
  const int le = config_.label_embedding_dim;
  const Matrix& labels = store_.value(label_table_);
  Matrix input(pass.hidden.rows(), h + le);
  input.leftCols(h) = pass.hidden;
  for (std::size_t n = 0; n < pass.row.size(); ++n) {
    const int y = batch.labels[static_cast<std::size_t>(pass.row[n])];
    if (y < 0 || y >= static_cast<int>(num_labels())) {
      throw std::out_of_range("label index " + std::to_string(y) + " out of range");
    }
    input.row(static_cast<Eigen::Index>(n)).rightCols(le) = labels.row(y);
  }
  const Matrix logits = output_.Forward(store_, input);
  Matrix d_logits;
  const nn::CrossEntropy ce = nn::FlatCrossEntropy(
      logits, pass.target, nullptr, backprop ? &d_logits : nullptr, grad_scale);
  if (backprop) {
    const Matrix d_input = output_.Backward(store_, input, d_logits);
    Matrix& d_labels = store_.grad(label_table_);
    for (std::size_t n = 0; n < pass.row.size(); ++n) {
      const int y = batch.labels[static_cast<std::size_t>(pass.row[n])];
      d_labels.row(y) += d_input.row(static_cast<Eigen::Index>(n)).rightCols(le);
    }
    encoder_.Backward(store_, pass, d_input.leftCols(h));
  }
  return ce;
}

Matrix GenerativeClassifier::ConditionalLogLikelihoods(
    const nn::SequenceBatch& batch) const {
  const auto pass = encoder_.Forward(store_, batch, false);
  const int h = config_.hidden_dim;
  const int le = config_.label_embedding_dim;
  const Matrix& w = store_.value(output_.weight());
  // The LSTM state is label-independent, so only the label term of the
  // output layer changes across labels.
  Matrix base = pass.hidden * w.leftCols(h).transpose();
  base.rowwise() += store_.value(output_.bias()).row(0);
  const Matrix label_terms =
      store_.value(label_table_) * w.rightCols(le).transpose();  // labels x V

  const auto k = static_cast<Eigen::Index>(num_labels());
  Matrix result = Matrix::Zero(static_cast<Eigen::Index>(batch.size()), k);
  std::vector<double> losses;
  for (Eigen::Index y = 0; y < k; ++y) {
    Matrix logits = base;
    logits.rowwise() += label_terms.row(y);
    nn::FlatCrossEntropy(logits, pass.target, &losses);
    const auto sums = RowSums(pass.row, losses, batch.size());
    for (std::size_t b = 0; b < sums.size(); ++b) {
      result(static_cast<Eigen::Index>(b), y) = -sums[b];
    }
  }
  return result;
}

double GenerativeClassifier::ConditionalLogLikelihood(
    std::span<const int> encoded, int label) const {
  if (label < 0 || label >= static_cast<int>(num_labels())) {
    throw std::out_of_range("unknown label index " + std::to_string(label));
  }
  return ConditionalLogLikelihoods(SingleBatch(encoded))(0, label);
}

std::vector<double> GenerativeClassifier::MarginalLogLikelihoods(
    const nn::SequenceBatch& batch) const {
  Matrix joint = ConditionalLogLikelihoods(batch);
  for (Eigen::Index y = 0; y < joint.cols(); ++y) {
    joint.col(y).array() += log_prior_[static_cast<std::size_t>(y)];
  }
  std::vector<double> out(static_cast<std::size_t>(joint.rows()));
  for (Eigen::Index b = 0; b < joint.rows(); ++b) {
    out[static_cast<std::size_t>(b)] = LogSumExp(joint.row(b));
  }
  return out;
}

std::vector<double> GenerativeClassifier::MarginalLogLikelihoods(
    const std::vector<std::vector<int>>& encoded, std::size_t batch_size) const {
  std::vector<double> out(encoded.size());
  ForEachBatch(encoded, batch_size, [&](const nn::SequenceBatch& b, std::size_t first) {
    const auto ll = MarginalLogLikelihoods(b);
    std::copy(ll.begin(), ll.end(), out.begin() + static_cast<std::ptrdiff_t>(first));
  });
  return out;
}

double GenerativeClassifier::MarginalLogLikelihood(
    std::span<const int> encoded) const {
  return MarginalLogLikelihoods(SingleBatch(encoded)).front();
}

std::vector<int> GenerativeClassifier::Predict(
    const nn::SequenceBatch& batch) const {
  const Matrix cond = ConditionalLogLikelihoods(batch);
  std::vector<int> out(static_cast<std::size_t>(cond.rows()));
  for (Eigen::Index b = 0; b < cond.rows(); ++b) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index y = 0; y < cond.cols(); ++y) {
      const double s = cond(b, y) + log_prior_[static_cast<std::size_t>(y)];
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(y);
      }
    }
    out[static_cast<std::size_t>(b)] = best;
  }
  return out;
}

std::vector<int> GenerativeClassifier::Predict(
    const std::vector<std::vector<int>>& encoded, std::size_t batch_size) const {
  std::vector<int> out(encoded.size());
  ForEachBatch(encoded, batch_size, [&](const nn::SequenceBatch& b, std::size_t first) {
    const auto p = Predict(b);
    std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(first));
  });
  return out;
}

int GenerativeClassifier::Predict(std::span<const int> encoded) const {
  return Predict(SingleBatch(encoded)).front();
}

void GenerativeClassifier::Save(const std::filesystem::path& stem,
                                std::uint64_t seed) const {
  CheckpointManifest m;
  m.model_kind = kKind;
  m.seed = seed;
  PutVocab(m, vocab_);
  m.numbers["embedding_dim"] = config_.embedding_dim;
  m.numbers["hidden_dim"] = config_.hidden_dim;
  m.numbers["label_embedding_dim"] = config_.label_embedding_dim;
  m.numbers["init_scale"] = config_.init_scale;
  auto& counts = m.arrays["class_counts"];
  for (std::size_t c : class_counts_) counts.push_back(static_cast<double>(c));
  SaveCheckpoint(stem, store_, m);
}

GenerativeClassifier GenerativeClassifier::Load(const std::filesystem::path& stem) {
  const CheckpointManifest m = ReadManifest(stem);
  RequireKind(m, kKind);
  GenerativeClassifierConfig config;
  config.embedding_dim = AsInt(m.Number("embedding_dim"));
  config.hidden_dim = AsInt(m.Number("hidden_dim"));
  config.label_embedding_dim = AsInt(m.Number("label_embedding_dim"));
  config.init_scale = m.Number("init_scale");
  std::vector<std::size_t> counts;
  for (double c : m.Array("class_counts")) counts.push_back(static_cast<std::size_t>(std::llround(c)));
  Rng rng(0);
  GenerativeClassifier model(GetVocab(m), std::move(counts), config, rng);
  LoadParameters(stem, model.store_);
  return model;
}

// --- LMCL --------------------------------------------------------------------

namespace {

Eigen::VectorXd RowNormsOrThrow(const Matrix& m, const char* what) {
  Eigen::VectorXd norms = m.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (!(norms(r) > 0.0)) {
      throw std::domain_error(std::string("zero-norm ") + what + " row " +
                              std::to_string(r) + " in cosine head");
    }
  }
  return norms;
}

// Gradient through v / |v| for each row.
Matrix NormalizeBackward(const Matrix& unit, const Eigen::VectorXd& norms,
                         const Matrix& d_unit) {
  Eigen::VectorXd dots = (unit.cwiseProduct(d_unit)).rowwise().sum();
  Matrix d = d_unit - unit.cwiseProduct(dots.replicate(1, unit.cols()));
  return d.cwiseQuotient(norms.replicate(1, unit.cols()));
}

}  // namespace

Matrix CosineLogits(const Matrix& features, const Matrix& weights) {
  const Eigen::VectorXd fx = RowNormsOrThrow(features, "feature");
  const Eigen::VectorXd fw = RowNormsOrThrow(weights, "weight");
  const Matrix xn = fx.cwiseInverse().asDiagonal() * features;
  const Matrix wn = fw.cwiseInverse().asDiagonal() * weights;
  return xn * wn.transpose();
}

nn::CrossEntropy LmclLoss(const Matrix& features, const Matrix& weights,
                          std::span<const int> labels, double margin,
                          double scale, Matrix* d_features, Matrix* d_weights,
                          double grad_scale) {
  if (margin < 0.0) throw std::invalid_argument("LMCL margin must be >= 0");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("LMCL: features rows != labels");
  }
  const Eigen::VectorXd fx = RowNormsOrThrow(features, "feature");
  const Eigen::VectorXd fw = RowNormsOrThrow(weights, "weight");
  const Matrix xn = fx.cwiseInverse().asDiagonal() * features;
  const Matrix wn = fw.cwiseInverse().asDiagonal() * weights;
  Matrix logits = scale * (xn * wn.transpose());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || labels[b] >= weights.rows()) {
      throw std::out_of_range("LMCL label out of range");
    }
    logits(static_cast<Eigen::Index>(b), labels[b]) -= scale * margin;
  }
  const bool want_grad = d_features || d_weights;
  Matrix d_logits;
  const nn::CrossEntropy ce = nn::FlatCrossEntropy(
      logits, labels, nullptr, want_grad ? &d_logits : nullptr, grad_scale);
  if (want_grad) {
    const Matrix d_cos = scale * d_logits;
    if (d_features) *d_features = NormalizeBackward(xn, fx, d_cos * wn);
    if (d_weights) *d_weights = NormalizeBackward(wn, fw, d_cos.transpose() * xn);
  }
  return ce;
}

// --- DiscriminativeClassifier ------------------------------------------------

struct DiscriminativeClassifier::Pass {
  std::vector<std::vector<int>> ids[2];   // per direction, per step
  std::vector<Matrix> embedded[2];        // projection inputs
  nn::Lstm::Tape tape[2];
  std::vector<Matrix> hidden[2];
  std::vector<int> lengths;
  Matrix features;
};

DiscriminativeClassifier::DiscriminativeClassifier(
    VocabularyTag vocab, std::size_t num_labels,
    const DiscriminativeClassifierConfig& config, Rng& rng)
    : vocab_(vocab), config_(config), num_labels_(num_labels) {
  if (num_labels == 0) {
    throw std::invalid_argument("discriminative classifier needs labels");
  }
  const int v = static_cast<int>(vocab.size);
  embedding_ = nn::Embedding(store_, "disc.embedding", v, config.embedding_dim,
                             config.init_scale, rng);
  projection_ = nn::Linear(store_, "disc.projection", config.embedding_dim,
                           config.projection_dim, false, config.init_scale, rng);
  forward_lstm_ = nn::Lstm(store_, "disc.lstm_forward", config.projection_dim,
                           config.hidden_dim, config.init_scale, rng);
  backward_lstm_ = nn::Lstm(store_, "disc.lstm_backward", config.projection_dim,
                            config.hidden_dim, config.init_scale, rng);
  head_ = nn::Linear(store_, "disc.head", 2 * config.hidden_dim,
                     static_cast<int>(num_labels),
                     config.head == HeadKind::kSoftmax, config.init_scale, rng);
}

DiscriminativeClassifier::Pass DiscriminativeClassifier::Encode(
    const nn::SequenceBatch& batch, bool keep_tape) const {
  Pass pass;
  const auto rows = static_cast<Eigen::Index>(batch.size());
  const int steps = batch.max_length();
  pass.lengths = batch.lengths;
  const nn::Lstm* lstms[2] = {&forward_lstm_, &backward_lstm_};
  for (int dir = 0; dir < 2; ++dir) {
    std::vector<Matrix> inputs;
    pass.ids[dir].resize(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
      auto& ids = pass.ids[dir][static_cast<std::size_t>(t)];
      ids.resize(static_cast<std::size_t>(rows));
      for (Eigen::Index b = 0; b < rows; ++b) {
        const int len = batch.lengths[static_cast<std::size_t>(b)];
        int id = Vocabulary::kPad;
        if (t < len) id = dir == 0 ? batch.ids(b, t) : batch.ids(b, len - 1 - t);
        ids[static_cast<std::size_t>(b)] = id;
      }
      Matrix e = embedding_.Forward(store_, ids);
      inputs.push_back(projection_.Forward(store_, e));
      if (keep_tape) pass.embedded[dir].push_back(std::move(e));
    }
    nn::Lstm::Tape local;
    pass.hidden[dir] = lstms[dir]->Forward(store_, inputs,
                                           keep_tape ? &pass.tape[dir] : &local);
  }
  const int h = config_.hidden_dim;
  pass.features.resize(rows, 2 * h);
  for (Eigen::Index b = 0; b < rows; ++b) {
    const int last = batch.lengths[static_cast<std::size_t>(b)] - 1;
    if (last < 0) throw std::invalid_argument("empty sequence in batch");
    pass.features.row(b).leftCols(h) = pass.hidden[0][static_cast<std::size_t>(last)].row(b);
    pass.features.row(b).rightCols(h) = pass.hidden[1][static_cast<std::size_t>(last)].row(b);
  }
  return pass;
}

nn::CrossEntropy DiscriminativeClassifier::Loss(const nn::SequenceBatch& batch,
                                                bool backprop,
                                                double grad_scale) {
  if (batch.labels.size() != batch.size()) {
    throw std::invalid_argument("discriminative classifier loss needs labels");
  }
  const Pass pass = Encode(batch, backprop);
  nn::CrossEntropy ce;
  Matrix d_features;
  if (config_.head == HeadKind::kSoftmax) {
    const Matrix logits = head_.Forward(store_, pass.features);
    Matrix d_logits;
    ce = nn::FlatCrossEntropy(logits, batch.labels, nullptr,
                              backprop ? &d_logits : nullptr, grad_scale);
    if (backprop) d_features = head_.Backward(store_, pass.features, d_logits);
  } else {
    Matrix d_weights;
    ce = LmclLoss(pass.features, store_.value(head_.weight()), batch.labels,
                  config_.lmcl_margin, config_.lmcl_scale,
                  backprop ? &d_features : nullptr,
                  backprop ? &d_weights : nullptr, grad_scale);
    if (backprop) store_.grad(head_.weight()) += d_weights;
  }
  if (!backprop) return ce;

  const int h = config_.hidden_dim;
  const nn::Lstm* lstms[2] = {&forward_lstm_, &backward_lstm_};
  const auto rows = static_cast<Eigen::Index>(batch.size());
  for (int dir = 0; dir < 2; ++dir) {
    const std::size_t steps = pass.ids[dir].size();
    std::vector<Matrix> d_hidden(steps, Matrix::Zero(rows, h));
    for (Eigen::Index b = 0; b < rows; ++b) {
      const auto last = static_cast<std::size_t>(pass.lengths[static_cast<std::size_t>(b)] - 1);
      d_hidden[last].row(b) = d_features.row(b).segment(dir * h, h);
    }
    const auto d_inputs = lstms[dir]->Backward(store_, pass.tape[dir], d_hidden);
    for (std::size_t t = 0; t < steps; ++t) {
      const Matrix d_embedded =
          projection_.Backward(store_, pass.embedded[dir][t], d_inputs[t]);
      embedding_.Backward(store_, pass.ids[dir][t], d_embedded);
    }
  }
  return ce;
}

Matrix DiscriminativeClassifier::Features(const nn::SequenceBatch& batch) const {
  return Encode(batch, false).features;
}

Matrix DiscriminativeClassifier::Features(
    const std::vector<std::vector<int>>& encoded, std::size_t batch_size) const {
  Matrix out(static_cast<Eigen::Index>(encoded.size()), feature_dim());
  ForEachBatch(encoded, batch_size, [&](const nn::SequenceBatch& b, std::size_t first) {
    out.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(b.size())) =
        Features(b);
  });
  return out;
}

std::vector<double> DiscriminativeClassifier::PenultimateFeatures(
    std::span<const int> encoded) const {
  return Row(Features(SingleBatch(encoded)), 0);
}

Matrix DiscriminativeClassifier::Logits(const nn::SequenceBatch& batch) const {
  const Matrix features = Features(batch);
  if (config_.head == HeadKind::kSoftmax) return head_.Forward(store_, features);
  return config_.lmcl_scale * CosineLogits(features, store_.value(head_.weight()));
}

Matrix DiscriminativeClassifier::Posteriors(const nn::SequenceBatch& batch,
                                            double temperature) const {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("softmax temperature must be positive");
  }
  const Matrix logits = Logits(batch);
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const auto p = nn::SoftmaxWithTemperature(Row(logits, b), temperature);
    for (Eigen::Index y = 0; y < logits.cols(); ++y) out(b, y) = p[static_cast<std::size_t>(y)];
  }
  return out;
}

Matrix DiscriminativeClassifier::Posteriors(
    const std::vector<std::vector<int>>& encoded, double temperature,
    std::size_t batch_size) const {
  Matrix out(static_cast<Eigen::Index>(encoded.size()),
             static_cast<Eigen::Index>(num_labels_));
  ForEachBatch(encoded, batch_size, [&](const nn::SequenceBatch& b, std::size_t first) {
    out.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(b.size())) =
        Posteriors(b, temperature);
  });
  return out;
}

std::vector<double> DiscriminativeClassifier::Posterior(
    std::span<const int> encoded, double temperature) const {
  return Row(Posteriors(SingleBatch(encoded), temperature), 0);
}

std::vector<int> DiscriminativeClassifier::Predict(
    const std::vector<std::vector<int>>& encoded, std::size_t batch_size) const {
  std::vector<int> out(encoded.size());
  ForEachBatch(encoded, batch_size, [&](const nn::SequenceBatch& b, std::size_t first) {
    const Matrix logits = Logits(b);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index best;
      logits.row(r).maxCoeff(&best);
      out[first + static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
  });
  return out;
}

void DiscriminativeClassifier::Save(const std::filesystem::path& stem,
                                    std::uint64_t seed) const {
  CheckpointManifest m;
  m.model_kind = kKind;
  m.seed = seed;
  PutVocab(m, vocab_);
  m.numbers["embedding_dim"] = config_.embedding_dim;
  m.numbers["projection_dim"] = config_.projection_dim;
  m.numbers["hidden_dim"] = config_.hidden_dim;
  m.numbers["lmcl_margin"] = config_.lmcl_margin;
  m.numbers["lmcl_scale"] = config_.lmcl_scale;
  m.numbers["init_scale"] = config_.init_scale;
  m.numbers["num_labels"] = static_cast<double>(num_labels_);
  m.strings["head"] = config_.head == HeadKind::kSoftmax ? "softmax" : "lmcl";
  SaveCheckpoint(stem, store_, m);
}

DiscriminativeClassifier DiscriminativeClassifier::Load(
    const std::filesystem::path& stem) {
  const CheckpointManifest m = ReadManifest(stem);
  RequireKind(m, kKind);
  DiscriminativeClassifierConfig config;
  config.embedding_dim = AsInt(m.Number("embedding_dim"));
  config.projection_dim = AsInt(m.Number("projection_dim"));
  config.hidden_dim = AsInt(m.Number("hidden_dim"));
  config.lmcl_margin = m.Number("lmcl_margin");
  config.lmcl_scale = m.Number("lmcl_scale");
  config.init_scale = m.Number("init_scale");
  const std::string& head = m.String("head");
  if (head == "softmax") {
    config.head = HeadKind::kSoftmax;
  } else if (head == "lmcl") {
    config.head = HeadKind::kLmcl;
  } else {
    throw std::runtime_error("unknown classifier head '" + head + "'");
  }
  Rng rng(0);
  DiscriminativeClassifier model(
      GetVocab(m), static_cast<std::size_t>(m.Number("num_labels")), config, rng);
  LoadParameters(stem, model.store_);
  return model;
}

// --- Pretrained vectors ------------------------------------------------------

PretrainedVectors LoadPretrainedVectors(const std::filesystem::path& path,
                                        const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  PretrainedVectors out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (line_no == 1 && values.size() == 1) continue;  // "count dim" header
    if (values.empty()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": no vector components");
    }
    if (out.dim == 0) out.dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != out.dim) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(out.dim) +
                               " components, found " + std::to_string(values.size()));
    }
    if (vocab.Contains(token)) out.vectors.emplace(token, std::move(values));
  }
  return out;
}

std::size_t ApplyPretrainedVectors(const PretrainedVectors& vectors,
                                   const Vocabulary& vocab,
                                   const nn::Embedding& embedding,
                                   nn::ParameterStore& store) {
  if (vectors.dim != embedding.dim()) {
    throw std::invalid_argument("pretrained vectors have dimension " +
                                std::to_string(vectors.dim) +
                                " but the embedding has " +
                                std::to_string(embedding.dim()));
  }
  Matrix& table = store.value(embedding.table());
  std::size_t set = 0;
  for (int id : vocab.ContentIds()) {
    auto it = vectors.vectors.find(vocab.Token(id));
    if (it == vectors.vectors.end()) continue;
    for (int c = 0; c < vectors.dim; ++c) table(id, c) = it->second[static_cast<std::size_t>(c)];
    ++set;
  }
  return set;
}

// --- Training ----------------------------------------------------------------

namespace {

constexpr std::uint64_t kLanguageModelTag = 0x6c6d;
constexpr std::uint64_t kGenerativeTag = 0x67656e;
constexpr std::uint64_t kDiscriminativeTag = 0x64697363;

struct Selection {
  double metric = 0.0;
  double tiebreak = 0.0;  // lower wins among equal metrics
};

// Mean validation loss: per token when per_token, else per sentence.
template <typename Model>
double ValidationLoss(Model& model, const EncodedSplit& split, bool per_token) {
  double sum = 0.0, norm = 0.0;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < split.size(); start += kScoringBatch) {
    const std::size_t end = std::min(split.size(), start + kScoringBatch);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const nn::SequenceBatch batch =
        nn::MakeBatch(split.sequences, rows, &split.labels, Vocabulary::kPad);
    sum += model.Loss(batch, false, 1.0).sum;
    for (int len : batch.lengths) norm += per_token ? len - 1 : 1;
  }
  return sum / norm;
}

// Shared epoch loop. epoch_data(epoch) yields the training sequences,
// select(model) the validation metric for checkpoint selection.
template <typename Model, typename EpochData, typename Select>
Trained<Model> Fit(Model model, const std::vector<int>* labels,
                   EpochData&& epoch_data, Select&& select,
                   bool higher_is_better, bool per_token,
                   const TrainingOptions& options, std::uint64_t seed,
                   std::uint64_t tag, const char* what) {
  if (options.epochs < 1 || options.batch_size < 1) {
    throw std::invalid_argument("epochs and batch size must be positive");
  }
  Rng order_rng = Rng::Derive({seed, tag, 1});
  Trained<Model> best{model, {}};
  best.log.higher_is_better = higher_is_better;
  Selection best_sel;
  std::vector<std::size_t> order;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const std::vector<std::vector<int>>& data = epoch_data(epoch);
    if (data.empty()) throw std::invalid_argument(std::string(what) + ": empty training corpus");
    order.resize(data.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.Shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0, norm_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const nn::SequenceBatch batch =
          nn::MakeBatch(data, rows, labels, Vocabulary::kPad);
      double norm = static_cast<double>(batch.size());
      if (per_token) {
        norm = 0.0;
        for (int len : batch.lengths) norm += len - 1;
      }
      model.params().ZeroGrad();
      const nn::CrossEntropy ce = model.Loss(batch, true, 1.0 / norm);
      if (!std::isfinite(ce.sum)) {
        throw std::runtime_error(std::string(what) + " diverged in epoch " +
                                 std::to_string(epoch) + " (non-finite loss)");
      }
      loss_sum += ce.sum;
      norm_sum += norm;
      nn::ClipGradNorm(model.params(), options.clip_norm);
      nn::AdamStep(model.params(), options.adam);
    }
    const Selection sel = select(model, loss_sum / norm_sum);
    const double metric = sel.metric;
    if (std::isnan(metric)) {
      throw std::runtime_error(std::string(what) + " diverged in epoch " +
                               std::to_string(epoch) + " (selection metric NaN)");
    }
    best.log.epochs.push_back({epoch, loss_sum / norm_sum, metric});
    spdlog::debug("{} epoch {}: train loss {:.4f}, selection {:.4f}", what,
                  epoch, loss_sum / norm_sum, metric);
    const bool better =
        best.log.best_epoch == 0 ||
        (higher_is_better ? metric > best_sel.metric : metric < best_sel.metric) ||
        (metric == best_sel.metric && sel.tiebreak < best_sel.tiebreak);
    if (better) {
      best_sel = sel;
      best.log.best_epoch = epoch;
      best.model = model;
    }
  }
  return best;
}

}  // namespace

Trained<LanguageModel> TrainLanguageModel(const EncodedSplit& train,
                                          const EncodedSplit& valid,
                                          VocabularyTag vocab,
                                          const LanguageModelConfig& config,
                                          const TrainingOptions& options,
                                          std::uint64_t seed,
                                          const BackgroundNoise* noise) {
  if (train.size() == 0) throw std::invalid_argument("language model: empty corpus");
  Rng init = Rng::Derive({seed, kLanguageModelTag});
  LanguageModel model(vocab, config, init);
  const EncodedSplit valid_id = valid.InDomain();

  std::vector<std::vector<int>> noised;
  auto epoch_data = [&](int epoch) -> const std::vector<std::vector<int>>& {
    if (!noise) return train.sequences;
    if (!noise->distribution) throw std::invalid_argument("background noise without distribution");
    if (noised.empty() || noise->resample_each_epoch) {
      const std::uint64_t key = noise->resample_each_epoch ? static_cast<std::uint64_t>(epoch) : 0;
      noised = NoiseEncodedCorpus(train.sequences, train.ids, *noise->distribution,
                                  noise->p_noise, seed, key);
    }
    return noised;
  };
  auto select = [&](const LanguageModel& m, double train_loss) {
    if (valid_id.size() == 0) return Selection{std::exp(train_loss), 0.0};
    return Selection{m.Perplexity(valid_id.sequences), 0.0};
  };
  return Fit(std::move(model), nullptr, epoch_data, select, false, true, options,
             seed, kLanguageModelTag, noise ? "background LM" : "language model");
}

Trained<GenerativeClassifier> TrainGenerativeClassifier(
    const EncodedSplit& train, const EncodedSplit& valid, VocabularyTag vocab,
    const std::vector<std::size_t>& class_counts,
    const GenerativeClassifierConfig& config, const TrainingOptions& options,
    std::uint64_t seed, const Vocabulary* vocabulary,
    const PretrainedVectors* pretrained) {
  for (int y : train.labels) {
    if (y < 0) throw std::invalid_argument("generative classifier: unlabeled training row");
  }
  Rng init = Rng::Derive({seed, kGenerativeTag});
  GenerativeClassifier model(vocab, class_counts, config, init);
  if (pretrained && vocabulary) {
    ApplyPretrainedVectors(*pretrained, *vocabulary, model.encoder().embedding(),
                           model.params());
  }
  const EncodedSplit valid_id = valid.InDomain();
  const EncodedSplit& selection = valid_id.size() ? valid_id : train;
  auto epoch_data = [&](int) -> const std::vector<std::vector<int>>& { return train.sequences; };
  auto select = [&](GenerativeClassifier& m, double) {
    return Selection{MulticlassMacroF1(selection.labels, m.Predict(selection.sequences)),
                     ValidationLoss(m, selection, true)};
  };
  return Fit(std::move(model), &train.labels, epoch_data, select, true, true,
             options, seed, kGenerativeTag, "generative classifier");
}

Trained<DiscriminativeClassifier> TrainDiscriminativeClassifier(
    const EncodedSplit& train, const EncodedSplit& valid, VocabularyTag vocab,
    std::size_t num_labels, const DiscriminativeClassifierConfig& config,
    const TrainingOptions& options, std::uint64_t seed,
    const Vocabulary* vocabulary, const PretrainedVectors* pretrained) {
  for (int y : train.labels) {
    if (y < 0) throw std::invalid_argument("discriminative classifier: unlabeled training row");
  }
  const std::uint64_t tag =
      kDiscriminativeTag + (config.head == HeadKind::kLmcl ? 1 : 0);
  Rng init = Rng::Derive({seed, tag});
  DiscriminativeClassifier model(vocab, num_labels, config, init);
  if (pretrained && vocabulary) {
    ApplyPretrainedVectors(*pretrained, *vocabulary, model.embedding(), model.params());
  }
  const EncodedSplit valid_id = valid.InDomain();
  const EncodedSplit& selection = valid_id.size() ? valid_id : train;
  auto epoch_data = [&](int) -> const std::vector<std::vector<int>>& { return train.sequences; };
  auto select = [&](DiscriminativeClassifier& m, double) {
    return Selection{MulticlassMacroF1(selection.labels, m.Predict(selection.sequences)),
                     ValidationLoss(m, selection, false)};
  };
  return Fit(std::move(model), &train.labels, epoch_data, select, true, false,
             options, seed, tag,
             config.head == HeadKind::kLmcl ? "LMCL classifier" : "softmax classifier");
}

}  // namespace oodlr
