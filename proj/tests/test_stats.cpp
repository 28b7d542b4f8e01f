#include "oracles.hpp"
#include "unlearn_gauge/stats.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace ugauge;
using Catch::Approx;

TEST_CASE("ecdf_eval uses the <= convention", "[stats]") {
  const std::vector<double> s{1, 2, 3};
  CHECK(ecdf_eval(s, 0) == 0.0);
  CHECK(ecdf_eval(s, 3) == 1.0);
  CHECK(ecdf_eval(std::vector<double>{1, 2, 2, 5}, 2) == 0.75);
  CHECK_THROWS_AS(ecdf_eval(std::vector<double>{}, 1.0), DomainError);
}

TEST_CASE("ecdf_eval is a nondecreasing step from 0 to 1", "[stats][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(1 + trial % 17);
    for (auto &v : s)
      v = std::round(u(rng));
    const double lo = *std::min_element(s.begin(), s.end());
    const double hi = *std::max_element(s.begin(), s.end());
    CHECK(ecdf_eval(s, lo - 1e-9) == 0.0);
    CHECK(ecdf_eval(s, hi) == 1.0);
    double prev = 0.0;
    for (double x = -6; x <= 6; x += 0.25) {
      const double f = ecdf_eval(s, x);
      CHECK(f >= prev);
      CHECK(f == oracle::ecdf(s, x));
      prev = f;
    }
  }
}

TEST_CASE("ks_statistic examples", "[stats]") {
  const std::vector<double> a{0.3, 0.1, 0.3, 0.9};
  CHECK(ks_statistic(a, a) == 0.0);
  CHECK(ks_statistic(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}) == 1.0);
  // |F_a - F_b| enumerated at the six pooled points peaks at 1/3.
  CHECK(ks_statistic(std::vector<double>{0.1, 0.4, 0.7}, std::vector<double>{0.2, 0.5, 0.9}) ==
        Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(ks_statistic(std::vector<double>{}, a), DomainError);
}

TEST_CASE("ks_statistic properties", "[stats][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(len(rng)), b(len(rng));
    // Integer grid so ties are common and the shift below is exact.
    for (auto &v : a)
      v = std::round(u(rng) * 20);
    for (auto &v : b)
      v = std::round(u(rng) * 20) + (trial % 3 == 0 ? 2.0 : 0.0);
    const double s = ks_statistic(a, b);
    CHECK(s == ks_statistic(b, a));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s == oracle::ks_statistic(a, b));

    // Strictly increasing transform applied to both samples.
    auto ta = a, tb = b;
    for (auto &v : ta)
      v = std::exp(0.15 * v) - 7;
    for (auto &v : tb)
      v = std::exp(0.15 * v) - 7;
    CHECK(ks_statistic(ta, tb) == s);
  }
}

TEST_CASE("ks_pvalue against high-precision series values", "[stats]") {
  CHECK(ks_pvalue(0.0) == 1.0);
  // 50-digit mpmath summations of 2 sum (-1)^{k-1} exp(-2 k^2 d^2).
  CHECK(ks_pvalue(1.36) == Approx(0.049485876755377909939).margin(1e-12));
  CHECK(ks_pvalue(1.22) == Approx(0.10189777916606354481).margin(1e-12));
  CHECK(ks_pvalue(0.5) == Approx(0.96394524366487509439).margin(1e-12));
  // First-term domination: 2 e^{-18}, tail below 1e-20.
  CHECK(ks_pvalue(3.0) == Approx(3.0459959489425256872e-8).epsilon(1e-12));
  CHECK(std::abs(ks_pvalue(3.0) - 2.0 * std::exp(-18.0)) < 1e-20);
  CHECK_THROWS_AS(ks_pvalue(-0.1), DomainError);
}

TEST_CASE("ks_pvalue handles arguments where the 100-term series has not converged",
          "[stats]") {
  for (double d : {1e-9, 1e-4, 0.01, 0.03, 0.037})
    CHECK(ks_pvalue(d) == 1.0);
  CHECK(ks_pvalue(0.3) == Approx(0.99999069419866543337).margin(1e-12));
}

TEST_CASE("ks_pvalue is accurate on both sides of the small-argument switch", "[stats]") {
  // 50-digit mpmath values.
  CHECK(ks_pvalue(0.6) == Approx(0.8642827790506043048).margin(1e-14));
  CHECK(ks_pvalue(0.9) == Approx(0.3927307079406543739).margin(1e-14));
  CHECK(ks_pvalue(0.999999) == Approx(0.2700007436274564101).margin(1e-14));
  CHECK(ks_pvalue(1.0) == Approx(0.2699996716773545212).margin(1e-14));
  CHECK(1.0 - ks_pvalue(0.2) == Approx(5.0504073386700708632e-13).epsilon(1e-3));
  CHECK(ks_pvalue(std::nextafter(kKsSmallArgument, 0.0)) >= ks_pvalue(kKsSmallArgument));
}

TEST_CASE("ks_pvalue is nonincreasing at fine resolution near zero", "[stats][property]") {
  double prev = 1.0;
  for (double d = 0.0; d <= 1.5; d += 1e-4) {
    const double p = ks_pvalue(d);
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("ks_pvalue is strictly decreasing on [0.3, 5] and within [0, 1]",
          "[stats][property]") {
  double prev = ks_pvalue(0.3);
  for (double d = 0.31; d <= 5.0 + 1e-9; d += 0.01) {
    const double p = ks_pvalue(d);
    CHECK(p < prev);
    prev = p;
  }
  for (double d = 0.0; d < 40; d += 0.013) {
    const double p = ks_pvalue(d);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("ks_two_sample composes statistic, size adjustment and p-value", "[stats]") {
  std::vector<double> a(100);
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = 0.001 * static_cast<double>(i);
  auto r = ks_two_sample(a, a);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);

  std::vector<double> lo(50, 0.1), hi(50, 0.9);
  r = ks_two_sample(lo, hi);
  CHECK(r.statistic == 1.0);
  CHECK(r.adjusted == Approx(5.0));
  CHECK(r.p_value < 1e-10);
  CHECK(r.p_value == Approx(3.857499695927835566e-22).epsilon(1e-10));
  CHECK(r.n == 50);
  CHECK(r.m == 50);

  std::vector<double> b{1, 2, 3};
  r = ks_two_sample(std::vector<double>{1.5, 2.5}, b);
  CHECK(r.adjusted == Approx(r.statistic * std::sqrt(6.0 / 5.0)));
}

TEST_CASE("ks_two_sample p-values are roughly uniform under the null", "[stats][property]") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  int rejections = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> a(100), b(100);
    for (auto &v : a)
      v = u(rng);
    for (auto &v : b)
      v = u(rng);
    rejections += ks_two_sample(a, b).p_value < 0.05;
  }
  const double frac = static_cast<double>(rejections) / trials;
  CHECK(frac >= 0.02);
  CHECK(frac <= 0.09);
}

TEST_CASE("auc_roc examples and tie rule", "[stats]") {
  CHECK(auc_roc(std::vector<double>{0.8, 0.9}, std::vector<double>{0.1, 0.2}) == 1.0);
  const std::vector<double> s{0.3, 0.3, 0.7};
  CHECK(auc_roc(s, s) == 0.5);
  CHECK(auc_roc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.5, 0.1}) == 0.75);
  CHECK_THROWS_AS(auc_roc(std::vector<double>{}, s), DomainError);
}

TEST_CASE("auc_roc matches pairwise counting and is antisymmetric", "[stats][property]") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> val(0, 9), len(1, 30);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> a(len(rng)), b(len(rng));
    for (auto &v : a)
      v = val(rng);
    for (auto &v : b)
      v = val(rng);
    const double ab = auc_roc(a, b);
    CHECK(ab == oracle::auc_pairwise(a, b));
    CHECK(ab + auc_roc(b, a) == 1.0);
  }
}

TEST_CASE("rouge_l examples", "[stats][rouge]") {
  CHECK(rouge_l("the cat sat", "the cat sat", RougeMode::recall) == 1.0);
  CHECK(rouge_l("the cat sat", "the cat sat", RougeMode::f1) == 1.0);
  CHECK(rouge_l("a b c", "x y z", RougeMode::recall) == 0.0);
  CHECK(rouge_l("a b c", "x y z", RougeMode::f1) == 0.0);
  // LCS("the cat sat", "the dog sat down") = 2.
  CHECK(rouge_l("the cat sat", "the dog sat down", RougeMode::recall) == 0.5);
  CHECK(rouge_l("the cat sat", "the dog sat down", RougeMode::f1) == Approx(4.0 / 7.0));
  CHECK(rouge_l("", "a b", RougeMode::f1) == 0.0);
  CHECK(rouge_l("The CAT", "the cat", RougeMode::recall) == 1.0);
  CHECK_THROWS_AS(rouge_l("a", "   ", RougeMode::recall), DomainError);
}

TEST_CASE("rouge_l recall is 1 exactly when the reference is a subsequence",
          "[stats][rouge][property]") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> word(0, 3), len(0, 8);
  const char *vocab[] = {"a", "b", "c", "d"};
  for (int t = 0; t < 500; ++t) {
    std::vector<std::string> cand(len(rng)), ref(1 + len(rng) % 5);
    for (auto &w : cand)
      w = vocab[word(rng)];
    for (auto &w : ref)
      w = vocab[word(rng)];
    const double r = rouge_l(std::span<const std::string>(cand),
                             std::span<const std::string>(ref), RougeMode::recall);
    CHECK((r == 1.0) == oracle::is_subsequence(ref, cand));
  }
}
