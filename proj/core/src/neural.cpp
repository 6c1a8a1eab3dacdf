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
#include "oodlr/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace oodlr::nn {
namespace {

std::string ShapeString(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix Sigmoid(const Matrix& a) {
  return a.unaryExpr([](double v) {
    // Branches keep exp() from overflowing for large |v|.
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

}  // namespace

ParamId ParameterStore::Add(std::string name, Eigen::Index rows,
                            Eigen::Index cols) {
  for (const auto& p : params_) {
    if (p.name == name) {
      throw std::invalid_argument("duplicate parameter '" + name + "'");
    }
  }
  Parameter p;
  p.name = std::move(name);
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  p.first_moment = Matrix::Zero(rows, cols);
  p.second_moment = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return ParamId{params_.size() - 1};
}

const Parameter& ParameterStore::Find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

Parameter& ParameterStore::Find(std::string_view name) {
  return const_cast<Parameter&>(std::as_const(*this).Find(name));
}

std::size_t ParameterStore::NumScalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterStore::ZeroGrad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParameterStore::CheckFinite() const {
  for (const auto& p : params_) {
    if (!p.value.allFinite()) {
      throw std::runtime_error("parameter '" + p.name + "' is not finite");
    }
  }
}

void InitUniform(Matrix& value, double scale, Rng& rng) {
  for (Eigen::Index j = 0; j < value.cols(); ++j) {
    for (Eigen::Index i = 0; i < value.rows(); ++i) {
      value(i, j) = rng.Uniform(-scale, scale);
    }
  }
}

// --- Embedding ---------------------------------------------------------------

Embedding::Embedding(ParameterStore& store, const std::string& name,
                     int vocab_size, int dim, double init_scale, Rng& rng)
    : table_(store.Add(name, vocab_size, dim)),
      vocab_size_(vocab_size),
      dim_(dim) {
  InitUniform(store.value(table_), init_scale, rng);
}

Matrix Embedding::Forward(const ParameterStore& store,
                          std::span<const int> ids) const {
  const Matrix& table = store.value(table_);
  Matrix out(static_cast<Eigen::Index>(ids.size()), dim_);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= vocab_size_) {
      throw std::out_of_range("embedding id " + std::to_string(ids[r]) +
                              " outside vocabulary of " +
                              std::to_string(vocab_size_));
    }
    out.row(static_cast<Eigen::Index>(r)) = table.row(ids[r]);
  }
  return out;
}

void Embedding::Backward(ParameterStore& store, std::span<const int> ids,
                         const Matrix& d_out) const {
  Matrix& grad = store.grad(table_);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    grad.row(ids[r]) += d_out.row(static_cast<Eigen::Index>(r));
  }
}

// --- Linear ------------------------------------------------------------------

Linear::Linear(ParameterStore& store, const std::string& name, int in_dim,
               int out_dim, bool with_bias, double init_scale, Rng& rng)
    : weight_(store.Add(name + ".weight", out_dim, in_dim)),
      has_bias_(with_bias),
      in_dim_(in_dim),
      out_dim_(out_dim) {
  InitUniform(store.value(weight_), init_scale, rng);
  if (with_bias) bias_ = store.Add(name + ".bias", 1, out_dim);
}

Matrix Linear::Forward(const ParameterStore& store, const Matrix& x) const {
  if (x.cols() != in_dim_) {
    throw std::invalid_argument("linear layer expects " +
                                std::to_string(in_dim_) + " inputs, got " +
                                ShapeString(x));
  }
  Matrix y = x * store.value(weight_).transpose();
  if (has_bias_) y.rowwise() += store.value(bias_).row(0);
  return y;
}

Matrix Linear::Backward(ParameterStore& store, const Matrix& x,
                        const Matrix& d_y) const {
  store.grad(weight_).noalias() += d_y.transpose() * x;
  if (has_bias_) store.grad(bias_) += d_y.colwise().sum();
  return d_y * store.value(weight_);
}

// --- LSTM --------------------------------------------------------------------

Lstm::Lstm(ParameterStore& store, const std::string& name, int input_dim,
           int hidden_dim, double init_scale, Rng& rng)
    : w_input_(store.Add(name + ".w_input", input_dim, 4 * hidden_dim)),
      w_hidden_(store.Add(name + ".w_hidden", hidden_dim, 4 * hidden_dim)),
      bias_(store.Add(name + ".bias", 1, 4 * hidden_dim)),
      input_dim_(input_dim),
      hidden_dim_(hidden_dim) {
  InitUniform(store.value(w_input_), init_scale, rng);
  InitUniform(store.value(w_hidden_), init_scale, rng);
  store.value(bias_).block(0, hidden_dim, 1, hidden_dim).setOnes();
}

LstmState Lstm::Step(const ParameterStore& store, const Matrix& x,
                     const LstmState& prev, StepRecord* record) const {
  const int h = hidden_dim_;
  if (x.cols() != input_dim_ || prev.h.cols() != h || prev.c.cols() != h ||
      prev.h.rows() != x.rows() || prev.c.rows() != x.rows()) {
    throw std::invalid_argument(
        "lstm step shape mismatch: x " + ShapeString(x) + ", h " +
        ShapeString(prev.h) + ", c " + ShapeString(prev.c) + " for input " +
        std::to_string(input_dim_) + ", hidden " + std::to_string(h));
  }
  Matrix gates = x * store.value(w_input_);
  gates.noalias() += prev.h * store.value(w_hidden_);
  gates.rowwise() += store.value(bias_).row(0);

  Matrix i = Sigmoid(gates.middleCols(0, h));
  Matrix f = Sigmoid(gates.middleCols(h, h));
  Matrix g = gates.middleCols(2 * h, h).array().tanh().matrix();
  Matrix o = Sigmoid(gates.middleCols(3 * h, h));

  LstmState next;
  next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);
  Matrix tanh_c = next.c.array().tanh().matrix();
  next.h = o.cwiseProduct(tanh_c);
  if (record) {
    record->x = x;
    record->h_prev = prev.h;
    record->c_prev = prev.c;
    record->i = std::move(i);
    record->f = std::move(f);
    record->g = std::move(g);
    record->o = std::move(o);
    record->tanh_c = std::move(tanh_c);
  }
  return next;
}

std::vector<Matrix> Lstm::Forward(const ParameterStore& store,
                                  const std::vector<Matrix>& inputs,
                                  Tape* tape) const {
  std::vector<Matrix> hidden;
  hidden.reserve(inputs.size());
  if (tape) {
    tape->steps.clear();
    tape->steps.resize(inputs.size());
  }
  if (inputs.empty()) return hidden;
  const Eigen::Index batch = inputs.front().rows();
  LstmState state{Matrix::Zero(batch, hidden_dim_),
                  Matrix::Zero(batch, hidden_dim_)};
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    state = Step(store, inputs[t], state, tape ? &tape->steps[t] : nullptr);
    hidden.push_back(state.h);
  }
  return hidden;
}

std::vector<Matrix> Lstm::Backward(ParameterStore& store, const Tape& tape,
                                   const std::vector<Matrix>& d_hidden) const {
  const int h = hidden_dim_;
  const std::size_t steps = tape.steps.size();
  std::vector<Matrix> d_inputs(steps);
  if (steps == 0) return d_inputs;
  const Eigen::Index batch = tape.steps.front().x.rows();
  Matrix dh_next = Matrix::Zero(batch, h);
  Matrix dc_next = Matrix::Zero(batch, h);
  Matrix d_gates(batch, 4 * h);
  const Matrix& w_in = store.value(w_input_);
  const Matrix& w_hid = store.value(w_hidden_);
  Matrix& g_in = store.grad(w_input_);
  Matrix& g_hid = store.grad(w_hidden_);
  Matrix& g_bias = store.grad(bias_);

  for (std::size_t s = steps; s-- > 0;) {
    const StepRecord& r = tape.steps[s];
    const Matrix dh = d_hidden[s] + dh_next;
    const auto o = r.o.array();
    const auto i = r.i.array();
    const auto f = r.f.array();
    const auto g = r.g.array();
    const auto tc = r.tanh_c.array();

    const Eigen::ArrayXXd dc =
        dc_next.array() + dh.array() * o * (1.0 - tc.square());
    d_gates.middleCols(0, h) = (dc * g * i * (1.0 - i)).matrix();
    d_gates.middleCols(h, h) = (dc * r.c_prev.array() * f * (1.0 - f)).matrix();
    d_gates.middleCols(2 * h, h) = (dc * i * (1.0 - g.square())).matrix();
    d_gates.middleCols(3 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();

    g_in.noalias() += r.x.transpose() * d_gates;
    g_hid.noalias() += r.h_prev.transpose() * d_gates;
    g_bias += d_gates.colwise().sum();

    d_inputs[s] = d_gates * w_in.transpose();
    dh_next = d_gates * w_hid.transpose();
    dc_next = (dc * f).matrix();
  }
  return d_inputs;
}

// --- Softmax / cross-entropy -------------------------------------------------

std::vector<double> SoftmaxWithTemperature(std::span<const double> logits,
                                           double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("softmax temperature must be positive");
  }
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double max = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - max) / temperature);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

Matrix LogSoftmaxRows(const Matrix& logits) {
  Eigen::VectorXd max = logits.rowwise().maxCoeff();
  Matrix shifted = logits.colwise() - max;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

double CrossEntropy::Perplexity() const { return std::exp(Mean()); }

CrossEntropy FlatCrossEntropy(const Matrix& logits,
                              std::span<const int> targets,
                              std::vector<double>* row_losses,
                              Matrix* d_logits, double grad_scale) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw std::invalid_argument("cross-entropy: logits rows != targets");
  }
  const Matrix log_probs = LogSoftmaxRows(logits);
  CrossEntropy ce;
  if (row_losses) row_losses->assign(targets.size(), 0.0);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const int t = targets[r];
    if (t < 0 || t >= logits.cols()) {
      throw std::out_of_range("cross-entropy target " + std::to_string(t) +
                              " outside [0, " + std::to_string(logits.cols()) +
                              ")");
    }
    const double loss = -log_probs(static_cast<Eigen::Index>(r), t);
    ce.sum += loss;
    if (row_losses) (*row_losses)[r] = loss;
  }
  ce.tokens = targets.size();
  if (d_logits) {
    *d_logits = log_probs.array().exp().matrix();
    for (std::size_t r = 0; r < targets.size(); ++r) {
      (*d_logits)(static_cast<Eigen::Index>(r), targets[r]) -= 1.0;
    }
    *d_logits *= grad_scale;
  }
  return ce;
}

SequenceBatch MakeBatch(const std::vector<std::vector<int>>& sequences,
                        std::span<const std::size_t> rows,
                        const std::vector<int>* labels, int pad_id) {
  SequenceBatch b;
  std::size_t max_len = 0;
  for (std::size_t r : rows) max_len = std::max(max_len, sequences.at(r).size());
  b.ids = IdMatrix::Constant(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(max_len), pad_id);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& seq = sequences[rows[i]];
    for (std::size_t t = 0; t < seq.size(); ++t) {
      b.ids(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = seq[t];
    }
    b.lengths.push_back(static_cast<int>(seq.size()));
    if (labels) b.labels.push_back(labels->at(rows[i]));
  }
  return b;
}

SequenceBatch MakeBatch(const std::vector<std::vector<int>>& sequences,
                        const std::vector<int>* labels, int pad_id) {
  std::vector<std::size_t> rows(sequences.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return MakeBatch(sequences, rows, labels, pad_id);
}

CrossEntropy SequenceCrossEntropy(const std::vector<Matrix>& logits,
                                  const IdMatrix& targets,
                                  std::span<const int> steps,
                                  std::vector<Matrix>* d_logits) {
  CrossEntropy total;
  if (d_logits) d_logits->assign(logits.size(), Matrix());
  for (std::size_t t = 0; t < logits.size(); ++t) {
    std::vector<int> rows;
    std::vector<int> tgt;
    for (std::size_t b = 0; b < steps.size(); ++b) {
      if (static_cast<int>(t) < steps[b]) {
        rows.push_back(static_cast<int>(b));
        tgt.push_back(targets(static_cast<Eigen::Index>(b),
                              static_cast<Eigen::Index>(t)));
      }
    }
    if (d_logits) (*d_logits)[t] = Matrix::Zero(logits[t].rows(), logits[t].cols());
    if (rows.empty()) continue;
    Matrix picked(static_cast<Eigen::Index>(rows.size()), logits[t].cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      picked.row(static_cast<Eigen::Index>(k)) = logits[t].row(rows[k]);
    }
    Matrix d;
    const CrossEntropy step =
        FlatCrossEntropy(picked, tgt, nullptr, d_logits ? &d : nullptr);
    total.sum += step.sum;
    total.tokens += step.tokens;
    if (d_logits) {
      for (std::size_t k = 0; k < rows.size(); ++k) {
        (*d_logits)[t].row(rows[k]) = d.row(static_cast<Eigen::Index>(k));
      }
    }
  }
  return total;
}

// --- Optimization ------------------------------------------------------------

void AdamStep(ParameterStore& store, const AdamConfig& config) {
  for (const auto& p : store.all()) {
    if (!p.grad.allFinite()) {
      throw std::runtime_error("gradient of parameter '" + p.name +
                               "' is not finite");
    }
  }
  const std::int64_t t = store.optimizer_steps() + 1;
  store.set_optimizer_steps(t);
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (auto& p : store.all()) {
    p.first_moment = config.beta1 * p.first_moment + (1.0 - config.beta1) * p.grad;
    p.second_moment = config.beta2 * p.second_moment +
                      (1.0 - config.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= config.learning_rate * (p.first_moment.array() / c1) /
                       ((p.second_moment.array() / c2).sqrt() + config.epsilon);
    if (!p.value.allFinite()) {
      throw std::runtime_error("parameter '" + p.name +
                               "' became non-finite after an optimizer step");
    }
  }
}

double ClipGradNorm(ParameterStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& p : store.all()) sq += p.grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& p : store.all()) p.grad *= scale;
  }
  return norm;
}

GradientCheckResult GradientCheck(const LossFn& loss, ParameterStore& store,
                                  double step) {
  store.ZeroGrad();
  loss(store, true);
  std::vector<Matrix> analytic;
  for (const auto& p : store.all()) analytic.push_back(p.grad);

  GradientCheckResult result;
  for (std::size_t k = 0; k < store.all().size(); ++k) {
    Parameter& p = store.all()[k];
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double original = p.value(i);
      auto central = [&](double h) {
        p.value(i) = original + h;
        const double plus = loss(store, false);
        p.value(i) = original - h;
        const double minus = loss(store, false);
        p.value(i) = original;
        return (plus - minus) / (2.0 * h);
      };
      // Richardson extrapolation cancels the h^2 term.
      const double numeric = (4.0 * central(0.5 * step) - central(step)) / 3.0;
      const double a = analytic[k](i);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (result.worst_index < 0 || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p.name;
        result.worst_index = i;
      }
    }
  }
  store.ZeroGrad();
  return result;
}

}  // namespace oodlr::nn
