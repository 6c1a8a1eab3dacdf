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
// Seeded random number helpers with platform-independent output.
//
// The standard distributions (std::uniform_real_distribution and friends)
// are implementation-defined, so results would differ between standard
// libraries. Everything here draws raw bits from std::mt19937_64, whose
// output sequence is fixed by the standard.

#ifndef OODLR_RNG_HPP_
#define OODLR_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace oodlr {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Generator seeded from several integers (e.g. run seed, epoch, item id).
  static Rng Derive(std::initializer_list<std::uint64_t> keys);

  std::uint64_t NextU64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double Uniform();

  /// Uniform double in [lo, hi).
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t Index(std::size_t n);

  bool Bernoulli(double p) { return Uniform() < p; }

  /// Standard normal via Box-Muller.
  double Normal();

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = Index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace oodlr

#endif  // OODLR_RNG_HPP_
