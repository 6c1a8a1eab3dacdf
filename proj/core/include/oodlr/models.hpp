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
// The trainable architectures:
//   LanguageModel            unconditional left-to-right LSTM LM (main and
//                            background models)
//   GenerativeClassifier     P(x|y) with label embeddings concatenated to the
//                            LSTM state before the output layer, plus P(y)
//   DiscriminativeClassifier BiLSTM sentence encoder with a softmax or
//                            large-margin-cosine head
// and their training loops with per-epoch checkpoint selection.

#ifndef OODLR_MODELS_HPP_
#define OODLR_MODELS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oodlr/corpus.hpp"
#include "oodlr/neural.hpp"
#include "oodlr/noising.hpp"

namespace oodlr {

/// Encoded sequences of one split with their label indices (-1 for OOD).
struct EncodedSplit {
  std::vector<std::vector<int>> sequences;
  std::vector<int> labels;
  std::vector<std::int64_t> ids;
  std::vector<bool> is_ood;

  std::size_t size() const { return sequences.size(); }
  /// Rows with is_ood == false.
  EncodedSplit InDomain() const;
};

EncodedSplit EncodeSplit(const std::vector<Utterance>& rows,
                         const Vocabulary& vocab, const DatasetBundle& bundle);

/// Identity of the vocabulary a model was trained with.
struct VocabularyTag {
  std::size_t size = 0;
  std::uint64_t fingerprint = 0;

  static VocabularyTag Of(const Vocabulary& vocab) {
    return {vocab.size(), vocab.Fingerprint()};
  }
  bool operator==(const VocabularyTag&) const = default;
};

/// Embedding followed by a unidirectional LSTM, run over the input positions
/// of an encoded batch. Flat row n of the result is the state that predicts
/// token t+1 of batch row b for every (b, t) with t + 1 < length(b).
class CausalEncoder {
 public:
  struct Pass {
    std::vector<std::vector<int>> step_ids;
    nn::Lstm::Tape tape;
    std::vector<int> row;     // batch row of each flat position
    std::vector<int> step;    // time step of each flat position
    std::vector<int> target;  // next token of each flat position
    nn::Matrix hidden;        // positions x hidden_dim
  };

  CausalEncoder() = default;
  CausalEncoder(nn::ParameterStore& store, const std::string& prefix,
                int vocab_size, int embedding_dim, int hidden_dim,
                double init_scale, Rng& rng);

  Pass Forward(const nn::ParameterStore& store, const nn::SequenceBatch& batch,
               bool keep_tape) const;
  void Backward(nn::ParameterStore& store, const Pass& pass,
                const nn::Matrix& d_hidden) const;

  const nn::Embedding& embedding() const { return embedding_; }
  const nn::Lstm& lstm() const { return lstm_; }

 private:
  nn::Embedding embedding_;
  nn::Lstm lstm_;
};

struct LanguageModelConfig {
  int embedding_dim = 100;
  int hidden_dim = 300;
  double init_scale = 0.1;
};

class LanguageModel {
 public:
  static constexpr const char* kKind = "language_model";

  LanguageModel() = default;
  LanguageModel(VocabularyTag vocab, const LanguageModelConfig& config,
                Rng& rng);

  /// Summed next-token cross-entropy. With backprop, accumulates the
  /// gradient of grad_scale * sum.
  nn::CrossEntropy Loss(const nn::SequenceBatch& batch, bool backprop,
                        double grad_scale = 1.0);

  /// Natural-log P(x) per row: sum over every prediction step, EOS included.
  std::vector<double> LogLikelihoods(const nn::SequenceBatch& batch) const;
  std::vector<double> LogLikelihoods(
      const std::vector<std::vector<int>>& encoded,
      std::size_t batch_size = 64) const;
  double LogLikelihood(std::span<const int> encoded) const;

  /// Per-token perplexity over a set of encoded sentences.
  double Perplexity(const std::vector<std::vector<int>>& encoded) const;

  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }
  const LanguageModelConfig& config() const { return config_; }
  VocabularyTag vocab() const { return vocab_; }
  const CausalEncoder& encoder() const { return encoder_; }

  void Save(const std::filesystem::path& stem, std::uint64_t seed) const;
  static LanguageModel Load(const std::filesystem::path& stem);

 private:
  VocabularyTag vocab_;
  LanguageModelConfig config_;
  nn::ParameterStore store_;
  CausalEncoder encoder_;
  nn::Linear output_;
};

struct GenerativeClassifierConfig {
  int embedding_dim = 100;
  int hidden_dim = 300;
  int label_embedding_dim = 20;
  double init_scale = 0.1;
};

class GenerativeClassifier {
 public:
  static constexpr const char* kKind = "generative_classifier";

  GenerativeClassifier() = default;
  /// The prior P(y) is class_counts normalized to sum to one.
  GenerativeClassifier(VocabularyTag vocab,
                       std::vector<std::size_t> class_counts,
                       const GenerativeClassifierConfig& config, Rng& rng);

  /// Summed cross-entropy of P(x | y_true); batch.labels must be set.
  nn::CrossEntropy Loss(const nn::SequenceBatch& batch, bool backprop,
                        double grad_scale = 1.0);

  /// (batch x labels) matrix of log P(x|y).
  nn::Matrix ConditionalLogLikelihoods(const nn::SequenceBatch& batch) const;
  /// Throws std::out_of_range for an unknown label index.
  double ConditionalLogLikelihood(std::span<const int> encoded, int label) const;

  /// log Σ_y P(x|y) P(y) per row.
  std::vector<double> MarginalLogLikelihoods(const nn::SequenceBatch& batch) const;
  std::vector<double> MarginalLogLikelihoods(
      const std::vector<std::vector<int>>& encoded,
      std::size_t batch_size = 64) const;
  double MarginalLogLikelihood(std::span<const int> encoded) const;

  /// argmax_y log P(x|y) + log P(y); ties go to the lower label index.
  std::vector<int> Predict(const nn::SequenceBatch& batch) const;
  std::vector<int> Predict(const std::vector<std::vector<int>>& encoded,
                           std::size_t batch_size = 64) const;
  int Predict(std::span<const int> encoded) const;

  std::size_t num_labels() const { return log_prior_.size(); }
  const std::vector<double>& log_prior() const { return log_prior_; }
  const std::vector<std::size_t>& class_counts() const { return class_counts_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }
  const GenerativeClassifierConfig& config() const { return config_; }
  VocabularyTag vocab() const { return vocab_; }
  const CausalEncoder& encoder() const { return encoder_; }
  nn::ParamId label_embeddings() const { return label_table_; }

  void Save(const std::filesystem::path& stem, std::uint64_t seed) const;
  static GenerativeClassifier Load(const std::filesystem::path& stem);

 private:
  VocabularyTag vocab_;
  GenerativeClassifierConfig config_;
  std::vector<std::size_t> class_counts_;
  std::vector<double> log_prior_;
  nn::ParameterStore store_;
  CausalEncoder encoder_;
  nn::ParamId label_table_;  // labels x label_embedding_dim
  nn::Linear output_;        // (hidden + label_embedding) -> vocab
};

enum class HeadKind { kSoftmax, kLmcl };

struct DiscriminativeClassifierConfig {
  int embedding_dim = 100;
  int projection_dim = 300;
  int hidden_dim = 300;
  HeadKind head = HeadKind::kSoftmax;
  double lmcl_margin = 0.35;
  double lmcl_scale = 30.0;  // 1/τ
  double init_scale = 0.1;
};

/// Large-margin cosine loss over L2-normalized features and weight rows:
/// cross-entropy of softmax(scale * (cos_y - margin * [y == label])).
/// Optional gradients are of grad_scale * sum. Throws std::domain_error for
/// a zero-norm feature vector or weight row.
nn::CrossEntropy LmclLoss(const nn::Matrix& features, const nn::Matrix& weights,
                          std::span<const int> labels, double margin,
                          double scale, nn::Matrix* d_features = nullptr,
                          nn::Matrix* d_weights = nullptr,
                          double grad_scale = 1.0);

/// Cosine similarity of every feature row with every weight row.
nn::Matrix CosineLogits(const nn::Matrix& features, const nn::Matrix& weights);

class DiscriminativeClassifier {
 public:
  static constexpr const char* kKind = "discriminative_classifier";

  DiscriminativeClassifier() = default;
  DiscriminativeClassifier(VocabularyTag vocab, std::size_t num_labels,
                           const DiscriminativeClassifierConfig& config,
                           Rng& rng);

  /// Summed softmax cross-entropy or LMCL loss, depending on the head.
  nn::CrossEntropy Loss(const nn::SequenceBatch& batch, bool backprop,
                        double grad_scale = 1.0);

  /// Penultimate activations: final forward state ++ final backward state.
  nn::Matrix Features(const nn::SequenceBatch& batch) const;
  nn::Matrix Features(const std::vector<std::vector<int>>& encoded,
                      std::size_t batch_size = 64) const;
  std::vector<double> PenultimateFeatures(std::span<const int> encoded) const;

  /// Final-layer logits: W x + b for the softmax head, scale * cos for LMCL.
  nn::Matrix Logits(const nn::SequenceBatch& batch) const;
  /// Row-wise softmax(logits / temperature).
  nn::Matrix Posteriors(const nn::SequenceBatch& batch, double temperature) const;
  nn::Matrix Posteriors(const std::vector<std::vector<int>>& encoded,
                        double temperature, std::size_t batch_size = 64) const;
  std::vector<double> Posterior(std::span<const int> encoded,
                                double temperature) const;
  std::vector<int> Predict(const std::vector<std::vector<int>>& encoded,
                           std::size_t batch_size = 64) const;

  std::size_t num_labels() const { return num_labels_; }
  int feature_dim() const { return 2 * config_.hidden_dim; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }
  const DiscriminativeClassifierConfig& config() const { return config_; }
  VocabularyTag vocab() const { return vocab_; }
  const nn::Embedding& embedding() const { return embedding_; }
  const nn::Linear& head() const { return head_; }

  void Save(const std::filesystem::path& stem, std::uint64_t seed) const;
  static DiscriminativeClassifier Load(const std::filesystem::path& stem);

 private:
  struct Pass;
  Pass Encode(const nn::SequenceBatch& batch, bool keep_tape) const;

  VocabularyTag vocab_;
  DiscriminativeClassifierConfig config_;
  std::size_t num_labels_ = 0;
  nn::ParameterStore store_;
  nn::Embedding embedding_;
  nn::Linear projection_;
  nn::Lstm forward_lstm_;
  nn::Lstm backward_lstm_;
  nn::Linear head_;  // labels x 2H; bias only for the softmax head
};

/// Whitespace-separated text vectors: "token v1 v2 ... vd" per line.
struct PretrainedVectors {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

/// Only tokens present in vocab are kept. A leading "count dim" header line
/// is skipped. Throws on inconsistent row widths.
PretrainedVectors LoadPretrainedVectors(const std::filesystem::path& path,
                                        const Vocabulary& vocab);

/// Copies matching rows into an embedding table; tokens without a vector
/// keep their current values. Throws std::invalid_argument when the vector
/// width differs from the embedding width. Returns the number of rows set.
std::size_t ApplyPretrainedVectors(const PretrainedVectors& vectors,
                                   const Vocabulary& vocab,
                                   const nn::Embedding& embedding,
                                   nn::ParameterStore& store);

struct TrainingOptions {
  int epochs = 10;
  int batch_size = 32;
  double clip_norm = 5.0;
  nn::AdamConfig adam;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;        // mean per token (LMs) or per sentence
  double selection_metric = 0.0;  // perplexity or macro-F1
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool higher_is_better = false;
};

template <typename Model>
struct Trained {
  Model model;
  TrainingLog log;
};

/// Word-substitution noise for a background model.
struct BackgroundNoise {
  const NoiseDistribution* distribution = nullptr;
  double p_noise = kDefaultNoiseProbability;
  bool resample_each_epoch = true;
};

/// Trains on train (noised when noise is given), keeping the epoch with the
/// lowest in-domain validation perplexity. Throws std::runtime_error if the
/// perplexity diverges.
Trained<LanguageModel> TrainLanguageModel(const EncodedSplit& train,
                                          const EncodedSplit& valid,
                                          VocabularyTag vocab,
                                          const LanguageModelConfig& config,
                                          const TrainingOptions& options,
                                          std::uint64_t seed,
                                          const BackgroundNoise* noise = nullptr);

/// Keeps the epoch with the highest in-domain validation macro-F1; equal
/// scores go to the lower validation loss.
Trained<GenerativeClassifier> TrainGenerativeClassifier(
    const EncodedSplit& train, const EncodedSplit& valid, VocabularyTag vocab,
    const std::vector<std::size_t>& class_counts,
    const GenerativeClassifierConfig& config, const TrainingOptions& options,
    std::uint64_t seed, const Vocabulary* vocabulary = nullptr,
    const PretrainedVectors* pretrained = nullptr);

/// Keeps the epoch with the highest in-domain validation macro-F1; equal
/// scores go to the lower validation loss.
Trained<DiscriminativeClassifier> TrainDiscriminativeClassifier(
    const EncodedSplit& train, const EncodedSplit& valid, VocabularyTag vocab,
    std::size_t num_labels, const DiscriminativeClassifierConfig& config,
    const TrainingOptions& options, std::uint64_t seed,
    const Vocabulary* vocabulary = nullptr,
    const PretrainedVectors* pretrained = nullptr);

}  // namespace oodlr

#endif  // OODLR_MODELS_HPP_
