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
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "oodlr/neural.hpp"

using namespace oodlr;
using namespace oodlr::nn;

namespace {
double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

TEST_CASE("softmax with temperature") {
  const std::vector<double> z{1.0, 2.0, 3.0};
  const auto p = SoftmaxWithTemperature(z, 1.0);
  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(std::exp(z[i]) / denom).epsilon(1e-12));

  const std::vector<double> shifted{1001.0, 1002.0, 1003.0};
  const auto q = SoftmaxWithTemperature(shifted, 1.0);
  for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-12));

  const auto flat = SoftmaxWithTemperature(z, 1e6);
  for (double v : flat) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  const auto hot = SoftmaxWithTemperature(z, 1e-3);
  CHECK(hot[2] == doctest::Approx(1.0));

  CHECK_THROWS_AS(SoftmaxWithTemperature(z, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(SoftmaxWithTemperature(z, -1.0), std::invalid_argument);
}

TEST_CASE("log softmax rows") {
  Matrix logits(2, 3);
  logits << 0, 0, 0, 1, 2, 3;
  const Matrix ls = LogSoftmaxRows(logits);
  CHECK(ls(0, 0) == doctest::Approx(-std::log(3.0)));
  double s = 0;
  for (int j = 0; j < 3; ++j) s += std::exp(ls(1, j));
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lstm step by hand") {
  ParameterStore store;
  Rng rng(1);
  Lstm lstm(store, "l", 1, 2, 0.1, rng);
  store.value(lstm.w_input()).setZero();
  store.value(lstm.w_hidden()).setZero();
  store.value(lstm.bias()).setZero();

  Matrix x(1, 1);
  x << 0.7;
  LstmState zero{Matrix::Zero(1, 2), Matrix::Zero(1, 2)};
  const auto z = lstm.Step(store, x, zero);
  CHECK(z.h.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.c.cwiseAbs().maxCoeff() == 0.0);

  // Gate blocks of width 2 in order input, forget, candidate, output.
  Matrix& wx = store.value(lstm.w_input());
  Matrix& wh = store.value(lstm.w_hidden());
  Matrix& b = store.value(lstm.bias());
  const double wxi[8] = {0.5, -0.3, 0.2, 0.1, 1.0, -0.8, 0.4, 0.6};
  for (int j = 0; j < 8; ++j) wx(0, j) = wxi[j];
  for (int r = 0; r < 2; ++r)
    for (int j = 0; j < 8; ++j) wh(r, j) = 0.05 * (r + 1) - 0.02 * j;
  for (int j = 0; j < 8; ++j) b(0, j) = 0.01 * j;

  LstmState prev{Matrix(1, 2), Matrix(1, 2)};
  prev.h << 0.3, -0.2;
  prev.c << 0.1, 0.5;
  const auto out = lstm.Step(store, x, prev);
  for (int u = 0; u < 2; ++u) {
    double pre[4];
    for (int gate = 0; gate < 4; ++gate) {
      const int j = gate * 2 + u;
      pre[gate] = 0.7 * wx(0, j) + prev.h(0, 0) * wh(0, j) + prev.h(0, 1) * wh(1, j) + b(0, j);
    }
    const double c = Sigmoid(pre[1]) * prev.c(0, u) + Sigmoid(pre[0]) * std::tanh(pre[2]);
    const double h = Sigmoid(pre[3]) * std::tanh(c);
    CHECK(out.c(0, u) == doctest::Approx(c).epsilon(1e-12));
    CHECK(out.h(0, u) == doctest::Approx(h).epsilon(1e-12));
  }
  CHECK_THROWS_AS(lstm.Step(store, Matrix::Zero(1, 3), prev), std::invalid_argument);
}

TEST_CASE("lstm forget bias starts at one") {
  ParameterStore store;
  Rng rng(2);
  Lstm lstm(store, "l", 3, 4, 0.1, rng);
  const Matrix& b = store.value(lstm.bias());
  for (int j = 0; j < 16; ++j) CHECK(b(0, j) == ((j >= 4 && j < 8) ? 1.0 : 0.0));
}

TEST_CASE("cross entropy examples") {
  Matrix logits = Matrix::Zero(2, 4);
  const std::vector<int> t{1, 3};
  const auto ce = FlatCrossEntropy(logits, t);
  CHECK(ce.tokens == 2);
  CHECK(ce.Mean() == doctest::Approx(std::log(4.0)));
  CHECK(ce.Perplexity() == doctest::Approx(4.0));

  Matrix d;
  std::vector<double> rows;
  FlatCrossEntropy(logits, t, &rows, &d, 1.0);
  CHECK(rows[0] == doctest::Approx(std::log(4.0)));
  CHECK(d(0, 1) == doctest::Approx(0.25 - 1.0));
  CHECK(d(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("padded positions contribute nothing") {
  Rng rng(3);
  const int V = 5, B = 3, T = 4;
  std::vector<Matrix> logits;
  for (int t = 0; t < T; ++t) {
    Matrix m(B, V);
    InitUniform(m, 2.0, rng);
    logits.push_back(m);
  }
  IdMatrix targets(B, T);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t) targets(b, t) = static_cast<int>(rng.Index(V));
  const std::vector<int> steps{4, 2, 1};
  const auto batch = SequenceCrossEntropy(logits, targets, steps);

  double expected = 0;
  std::size_t count = 0;
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < steps[static_cast<std::size_t>(b)]; ++t) {
      const Matrix row = logits[static_cast<std::size_t>(t)].row(b);
      const int target[1] = {targets(b, t)};
      expected += FlatCrossEntropy(row, target).sum;
      ++count;
    }
  }
  CHECK(batch.sum == doctest::Approx(expected).epsilon(1e-12));
  CHECK(batch.tokens == count);

  std::vector<Matrix> d;
  SequenceCrossEntropy(logits, targets, steps, &d);
  CHECK(d[3].row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d[1].row(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make batch pads") {
  const std::vector<std::vector<int>> seqs{{5, 6, 7}, {8}};
  const std::vector<int> labels{1, 0};
  const auto b = MakeBatch(seqs, &labels, 0);
  CHECK(b.size() == 2);
  CHECK(b.max_length() == 3);
  CHECK(b.ids(1, 0) == 8);
  CHECK(b.ids(1, 2) == 0);
  CHECK(b.lengths == std::vector<int>{3, 1});
  CHECK(b.labels == labels);
}

TEST_CASE("adam first step closed form") {
  ParameterStore store;
  const auto id = store.Add("w", 1, 3);
  store.value(id) << 1.0, -2.0, 0.5;
  store.grad(id) << 0.3, -4.0, 1e-3;
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  const Matrix before = store.value(id);
  const Matrix g = store.grad(id);
  AdamStep(store, cfg);
  for (int j = 0; j < 3; ++j) {
    const double expected = before(0, j) - cfg.learning_rate * g(0, j) / (std::abs(g(0, j)) + cfg.epsilon);
    CHECK(store.value(id)(0, j) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(store.optimizer_steps() == 1);

  store.grad(id)(0, 0) = std::nan("");
  CHECK_THROWS_AS(AdamStep(store, cfg), std::runtime_error);
}

TEST_CASE("adam minimizes a quadratic") {
  ParameterStore store;
  const auto id = store.Add("w", 1, 2);
  store.value(id) << 3.0, -2.0;
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  auto f = [&] {
    const Matrix& w = store.value(id);
    return (w(0, 0) - 1.0) * (w(0, 0) - 1.0) + 10.0 * (w(0, 1) + 0.5) * (w(0, 1) + 0.5);
  };
  const double start = f();
  for (int step = 0; step < 2000; ++step) {
    store.ZeroGrad();
    const Matrix& w = store.value(id);
    store.grad(id) << 2.0 * (w(0, 0) - 1.0), 20.0 * (w(0, 1) + 0.5);
    AdamStep(store, cfg);
  }
  CHECK(f() < 1e-3 * start);
}

TEST_CASE("gradient clipping") {
  ParameterStore store;
  const auto a = store.Add("a", 1, 2);
  const auto b = store.Add("b", 1, 1);
  store.grad(a) << 3.0, 0.0;
  store.grad(b) << 4.0;
  CHECK(ClipGradNorm(store, 10.0) == doctest::Approx(5.0));
  CHECK(store.grad(a)(0, 0) == 3.0);
  CHECK(ClipGradNorm(store, 1.0) == doctest::Approx(5.0));
  CHECK(store.grad(a)(0, 0) == doctest::Approx(0.6));
  CHECK(store.grad(b)(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("linear and embedding gradients") {
  ParameterStore store;
  Rng rng(4);
  Embedding emb(store, "emb", 6, 3, 0.5, rng);
  Linear lin(store, "lin", 3, 4, true, 0.5, rng);
  const std::vector<int> ids{1, 4, 4, 2};
  const std::vector<int> targets{0, 3, 2, 1};
  LossFn loss = [&](ParameterStore& s, bool backprop) {
    const Matrix x = emb.Forward(s, ids);
    const Matrix y = lin.Forward(s, x);
    Matrix d;
    const auto ce = FlatCrossEntropy(y, targets, nullptr, backprop ? &d : nullptr);
    if (backprop) emb.Backward(s, ids, lin.Backward(s, x, d));
    return ce.sum;
  };
  const auto r = GradientCheck(loss, store);
  CHECK(r.coordinates == store.NumScalars());
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("lstm gradients through time") {
  ParameterStore store;
  Rng rng(5);
  const int B = 2, D = 3, H = 4, V = 5, T = 4;
  Lstm lstm(store, "lstm", D, H, 0.5, rng);
  Linear out(store, "out", H, V, true, 0.5, rng);
  std::vector<Matrix> inputs;
  for (int t = 0; t < T; ++t) {
    Matrix x(B, D);
    InitUniform(x, 1.0, rng);
    inputs.push_back(x);
  }
  IdMatrix targets(B, T);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t) targets(b, t) = static_cast<int>(rng.Index(V));
  const std::vector<int> steps{4, 3};
  LossFn loss = [&](ParameterStore& s, bool backprop) {
    Lstm::Tape tape;
    const auto hs = lstm.Forward(s, inputs, backprop ? &tape : nullptr);
    std::vector<Matrix> logits;
    for (const auto& h : hs) logits.push_back(out.Forward(s, h));
    std::vector<Matrix> d;
    const auto ce = SequenceCrossEntropy(logits, targets, steps, backprop ? &d : nullptr);
    if (backprop) {
      std::vector<Matrix> dh;
      for (int t = 0; t < T; ++t) dh.push_back(out.Backward(s, hs[static_cast<std::size_t>(t)], d[static_cast<std::size_t>(t)]));
      lstm.Backward(s, tape, dh);
    }
    return ce.sum;
  };
  CHECK(GradientCheck(loss, store).max_relative_error < 1e-5);
}

TEST_CASE("parameter store") {
  ParameterStore store;
  store.Add("x", 2, 2);
  CHECK_THROWS(store.Add("x", 1, 1));
  CHECK_THROWS_AS(store.Find("missing"), std::out_of_range);
  CHECK(store.NumScalars() == 4);
  store.Find("x").value(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(store.CheckFinite(), std::runtime_error);
}
