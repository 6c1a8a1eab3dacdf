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
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "oodlr/metrics.hpp"
#include "oodlr/scoring.hpp"
#include "temp_dir.hpp"

using namespace oodlr;

namespace {
std::vector<double> RandomPosterior(Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double sum = 0;
  for (double& x : p) {
    x = -std::log(1.0 - rng.Uniform()) * std::pow(rng.Uniform(), 3.0);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}
}  // namespace

TEST_CASE("posterior scorer examples") {
  const std::vector<double> p{0.5, 0.25, 0.25};
  CHECK(ScoreMsp(p) == doctest::Approx(0.5));
  CHECK(ScoreEntropy(p) == doctest::Approx(1.0397207708).epsilon(1e-9));
  const std::vector<double> onehot{0.0, 1.0, 0.0};
  CHECK(ScoreEntropy(onehot) == 0.0);
  CHECK(ScoreMsp(onehot) == 0.0);
  const auto u = UniformReference(3);
  CHECK(ScoreNegKl(u, u) == doctest::Approx(0.0));
  CHECK(ScoreNegKl(onehot, u) == doctest::Approx(-std::log(3.0)));
  CHECK_THROWS_AS(ScoreNegKl(p, std::vector<double>{0.5, 0.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(ScoreNegKl(p, std::vector<double>{0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("label ratio reference") {
  const std::vector<std::size_t> counts{6, 3, 0, 1};
  const auto r = LabelRatioReference(counts);
  CHECK(r[0] == doctest::Approx(6.0 / 11.0));
  CHECK(r[2] == doctest::Approx(1.0 / 11.0));
  double sum = 0;
  for (double x : r) sum += x;
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("neg-KL to uniform is entropy shifted by ln K") {
  Rng rng(17);
  ScoredSet entropy, negkl;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = 2 + rng.Index(20);
    const auto p = RandomPosterior(rng, k);
    const double h = ScoreEntropy(p);
    const double nk = ScoreNegKl(p, UniformReference(k));
    CHECK(std::abs(nk - (h - std::log(static_cast<double>(k)))) < 1e-9);
    if (k == 5) {
      entropy.eta.push_back(h);
      negkl.eta.push_back(nk);
      const bool ood = rng.Bernoulli(0.4);
      entropy.is_ood.push_back(ood);
      negkl.is_ood.push_back(ood);
    }
  }
  CHECK(Auroc(entropy) == Auroc(negkl));
}

TEST_CASE("msp examples") {
  const std::vector<double> p{0.2, 0.7, 0.1};
  CHECK(ScoreMsp(p) == doctest::Approx(0.3));
  CHECK(ScoreMsp(UniformReference(4)) == doctest::Approx(0.75));
}

TEST_CASE("likelihood ratio identities") {
  Rng rng(3);
  const VocabularyTag tag{15, 42};
  LanguageModel main(tag, {4, 5, 0.3}, rng);
  LanguageModel background(tag, {4, 5, 0.3}, rng);
  GenerativeClassifier gen(tag, {2, 3}, {4, 5, 3, 0.3}, rng);
  const std::vector<int> x{Vocabulary::kBos, 6, 9, 11, Vocabulary::kEos};
  CHECK(ScoreLlr(main, main, x) == 0.0);
  CHECK(ScoreLlr(main, background, x) ==
        doctest::Approx(ScoreNegLogLik(main, x) - ScoreNegLogLik(background, x)).epsilon(1e-12));
  CHECK(ScoreLlr(gen, background, x) ==
        doctest::Approx(background.LogLikelihood(x) - gen.MarginalLogLikelihood(x)).epsilon(1e-12));
  CHECK(ScoreNegLogLik(gen, x) == doctest::Approx(-gen.MarginalLogLikelihood(x)));
  CHECK(ScoreNegLogLik(main, x) > 0.0);

  LanguageModel other({15, 43}, {4, 5, 0.3}, rng);
  CHECK_THROWS_AS(ScoreLlr(main, other, x), std::invalid_argument);
  CHECK_THROWS_AS(ScoreLlr(gen, other, x), std::invalid_argument);
}

TEST_CASE("clamping keeps infinities outermost") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> eta{inf, 1.0, -inf, 2.0};
  ClampScores(eta);
  CHECK(eta[0] == std::numeric_limits<double>::max());
  CHECK(eta[2] == -std::numeric_limits<double>::max());
  CHECK(eta[1] == 1.0);
  ScoredSet s{eta, {true, false, false, true}};
  CHECK(Auroc(s) == 1.0);
  std::vector<double> bad{0.0, std::nan("")};
  CHECK_THROWS(ClampScores(bad));
}

TEST_CASE("method names") {
  CHECK(AllMethods().size() == 14);
  for (Method m : AllMethods()) CHECK(ParseMethod(MethodName(m)) == m);
  CHECK(NeedsOf(Method::kLGenBackUniroot).main == ModelKey::kGenerative);
  CHECK(NeedsOf(Method::kLGenBackUniroot).background == NoiseKind::kUniroot);
  CHECK_FALSE(NeedsOf(Method::kMsp).background.has_value());
  CHECK(NeedsOf(Method::kLofLmcl).main == ModelKey::kDiscLmcl);
  try {
    ParseMethod("bogus");
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("l_gen") != std::string::npos);
  }
}

TEST_CASE("score files round trip") {
  testing::TempDir dir;
  const std::vector<OodScore> scores{{"7", "msp", 0.1 + 0.2, false},
                                     {"8", "l_gen", -1e300, true},
                                     {"9", "lof", 1.0 / 3.0, true}};
  WriteScores(dir / "s.tsv", scores);
  CHECK(testing::ReadFile(dir / "s.tsv").rfind("utterance_id\tmethod\teta\tis_ood\n", 0) == 0);
  const auto back = ReadScores(dir / "s.tsv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == scores[i].id);
    CHECK(back[i].method == scores[i].method);
    CHECK(back[i].eta == scores[i].eta);
    CHECK(back[i].is_ood == scores[i].is_ood);
  }
}
