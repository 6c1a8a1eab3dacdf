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
// Minimal differentiable building blocks for the fixed architectures in
// models.hpp: embeddings, linear layers, LSTMs with full backpropagation
// through time, softmax/cross-entropy and an Adam optimizer.
//
// All layers work on batches laid out as rows (batch x features). Layers do
// not own their weights; they hold ParamId handles into a ParameterStore so a
// model can be copied or snapshotted by copying its store.

#ifndef OODLR_NEURAL_HPP_
#define OODLR_NEURAL_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "oodlr/rng.hpp"

namespace oodlr::nn {

using Matrix = Eigen::MatrixXd;
using IdMatrix =
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ParamId {
  std::size_t index = 0;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
};

class ParameterStore {
 public:
  /// Registers a zero-initialized parameter. Names must be unique.
  ParamId Add(std::string name, Eigen::Index rows, Eigen::Index cols);

  Parameter& at(ParamId id) { return params_.at(id.index); }
  const Parameter& at(ParamId id) const { return params_.at(id.index); }
  Matrix& value(ParamId id) { return at(id).value; }
  const Matrix& value(ParamId id) const { return at(id).value; }
  Matrix& grad(ParamId id) { return at(id).grad; }

  /// Throws std::out_of_range for unknown names.
  const Parameter& Find(std::string_view name) const;
  Parameter& Find(std::string_view name);

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t NumScalars() const;

  void ZeroGrad();
  /// Throws std::runtime_error naming the first parameter holding NaN/Inf.
  void CheckFinite() const;

  std::int64_t optimizer_steps() const { return optimizer_steps_; }
  void set_optimizer_steps(std::int64_t n) { optimizer_steps_ = n; }

 private:
  std::vector<Parameter> params_;
  std::int64_t optimizer_steps_ = 0;
};

/// Fills value with uniform(-scale, scale) draws in column-major order.
void InitUniform(Matrix& value, double scale, Rng& rng);

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, int vocab_size,
            int dim, double init_scale, Rng& rng);

  /// One row per id.
  Matrix Forward(const ParameterStore& store, std::span<const int> ids) const;
  void Backward(ParameterStore& store, std::span<const int> ids,
                const Matrix& d_out) const;

  ParamId table() const { return table_; }
  int dim() const { return dim_; }
  int vocab_size() const { return vocab_size_; }

 private:
  ParamId table_;
  int vocab_size_ = 0;
  int dim_ = 0;
};

/// y = x W^T + b with W stored as (out x in), so row j of W is the weight
/// vector of output j.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in_dim,
         int out_dim, bool with_bias, double init_scale, Rng& rng);

  Matrix Forward(const ParameterStore& store, const Matrix& x) const;
  /// Accumulates weight/bias gradients and returns dL/dx.
  Matrix Backward(ParameterStore& store, const Matrix& x,
                  const Matrix& d_y) const;

  ParamId weight() const { return weight_; }
  bool has_bias() const { return has_bias_; }
  ParamId bias() const { return bias_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

 private:
  ParamId weight_;
  ParamId bias_;
  bool has_bias_ = false;
  int in_dim_ = 0;
  int out_dim_ = 0;
};

struct LstmState {
  Matrix h;
  Matrix c;
};

/// Single-layer LSTM. Gate pre-activations are x W_x + h W_h + b with the
/// four gate blocks laid out as [input | forget | candidate | output]:
///   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t).
class Lstm {
 public:
  struct StepRecord {
    Matrix x, h_prev, c_prev;
    Matrix i, f, g, o;
    Matrix tanh_c;
  };
  struct Tape {
    std::vector<StepRecord> steps;
  };

  Lstm() = default;
  /// Weights uniform(-init_scale, init_scale), biases zero except the
  /// forget gate, which starts at +1.
  Lstm(ParameterStore& store, const std::string& name, int input_dim,
       int hidden_dim, double init_scale, Rng& rng);

  /// One step on a batch. Throws std::invalid_argument on shape mismatch.
  LstmState Step(const ParameterStore& store, const Matrix& x,
                 const LstmState& prev, StepRecord* record = nullptr) const;

  /// Runs inputs[0..T) from the zero state and returns h_t per step.
  std::vector<Matrix> Forward(const ParameterStore& store,
                              const std::vector<Matrix>& inputs,
                              Tape* tape) const;

  /// d_hidden[t] is dL/dh_t from outside the recurrence. Returns dL/dx_t.
  std::vector<Matrix> Backward(ParameterStore& store, const Tape& tape,
                               const std::vector<Matrix>& d_hidden) const;

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  ParamId w_input() const { return w_input_; }
  ParamId w_hidden() const { return w_hidden_; }
  ParamId bias() const { return bias_; }

 private:
  ParamId w_input_;   // input_dim x 4H
  ParamId w_hidden_;  // H x 4H
  ParamId bias_;      // 1 x 4H
  int input_dim_ = 0;
  int hidden_dim_ = 0;
};

/// exp(z/τ) / Σ exp(z/τ) with max subtraction. Throws for τ <= 0.
std::vector<double> SoftmaxWithTemperature(std::span<const double> logits,
                                           double temperature);

/// Row-wise log-softmax.
Matrix LogSoftmaxRows(const Matrix& logits);

struct CrossEntropy {
  double sum = 0.0;
  std::size_t tokens = 0;
  double Mean() const { return tokens ? sum / static_cast<double>(tokens) : 0.0; }
  double Perplexity() const;
};

/// Loss over rows of logits (one prediction per row). Optional outputs:
/// per-row losses and d(grad_scale * sum)/d logits.
CrossEntropy FlatCrossEntropy(const Matrix& logits, std::span<const int> targets,
                              std::vector<double>* row_losses = nullptr,
                              Matrix* d_logits = nullptr,
                              double grad_scale = 1.0);

struct SequenceBatch {
  IdMatrix ids;              // batch x max_length, PAD-filled
  std::vector<int> lengths;  // true lengths
  std::vector<int> labels;   // empty when unlabeled

  std::size_t size() const { return lengths.size(); }
  int max_length() const { return static_cast<int>(ids.cols()); }
};

/// Pads the selected sequences to a common length with pad_id.
SequenceBatch MakeBatch(const std::vector<std::vector<int>>& sequences,
                        std::span<const std::size_t> rows,
                        const std::vector<int>* labels = nullptr,
                        int pad_id = 0);
SequenceBatch MakeBatch(const std::vector<std::vector<int>>& sequences,
                        const std::vector<int>* labels = nullptr,
                        int pad_id = 0);

/// logits[t] is (batch x V) and predicts targets(b, t); positions with
/// t >= steps[b] are padding and contribute nothing.
CrossEntropy SequenceCrossEntropy(const std::vector<Matrix>& logits,
                                  const IdMatrix& targets,
                                  std::span<const int> steps,
                                  std::vector<Matrix>* d_logits = nullptr);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update from the accumulated gradients. Throws
/// std::runtime_error naming the parameter if a gradient is not finite, or
/// if an updated value is not finite.
void AdamStep(ParameterStore& store, const AdamConfig& config);

/// Rescales gradients to a global L2 norm of at most max_norm. Returns the
/// norm before clipping.
double ClipGradNorm(ParameterStore& store, double max_norm);

/// Evaluates the loss; accumulates gradients into the store when backprop
/// is true (gradients are zeroed by the caller).
using LossFn = std::function<double(ParameterStore&, bool backprop)>;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  std::size_t coordinates = 0;
};

/// Fourth-order central differences (Richardson over steps h and h/2) on
/// every coordinate of every parameter, scored as
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradientCheckResult GradientCheck(const LossFn& loss, ParameterStore& store,
                                  double step = 1e-3);

}  // namespace oodlr::nn

#endif  // OODLR_NEURAL_HPP_
