// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "typlab/distribution.hpp"
#include "typlab/error.hpp"
#include "typlab/numeric.hpp"

using namespace typlab;

namespace {

Distribution make(std::vector<TokenId> ids, std::vector<double> w) { return validate_distribution(ids, w); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

Distribution random_distribution(std::mt19937_64& rng, std::uint32_t max_size) {
  std::uniform_int_distribution<std::uint32_t> size(1, max_size);
  std::exponential_distribution<double> weight(1.0);
  const auto k = size(rng);
  std::vector<TokenId> ids(k);
  std::vector<double> w(k);
  for (std::uint32_t i = 0; i < k; ++i) {
    ids[i] = i;
    w[i] = weight(rng);
  }
  return make(ids, w);
}

// Frozen oracle values (long double direct summation / Monte Carlo, see below).
constexpr double kH_quarter = 0.8112781;
constexpr double kS_quarter = 1.129192;
constexpr double kLambda_quarter = 0.686309;
constexpr double kCross_half_quarter = 1.2075188;

}  // namespace

TEST_SUITE("validate_distribution") {
  TEST_CASE("already normalized input passes through") {
    auto d = make({0, 1}, {0.5, 0.5});
    CHECK(d.probs()[0] == 0.5);
    CHECK(d.probs()[1] == 0.5);
  }

  TEST_CASE("proportional rescale") {
    auto d = make({0, 1}, {2.0, 6.0});
    CHECK(d.probs()[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(d.probs()[1] == doctest::Approx(0.75).epsilon(1e-15));
  }

  TEST_CASE("zero entries are dropped") {
    auto d = make({0, 1}, {1.0, 0.0});
    REQUIRE(d.size() == 1);
    CHECK(d.ids()[0] == 0);
    CHECK(d.probs()[0] == 1.0);
    CHECK_FALSE(d.contains(1));
    CHECK(d.prob(1) == 0.0);
  }

  TEST_CASE("ids are sorted and ratios kept") {
    std::vector<std::pair<TokenId, double>> raw = {{7, 3.0}, {2, 1.0}};
    auto d = validate_distribution(raw);
    CHECK(d.ids()[0] == 2);
    CHECK(d.ids()[1] == 7);
    CHECK(d.probs()[1] / d.probs()[0] == doctest::Approx(3.0));
  }

  TEST_CASE("errors") {
    CHECK(code_of([] { make({0, 1}, {0.0, 0.0}); }) == ErrorCode::EmptySupport);
    CHECK(code_of([] { make({}, {}); }) == ErrorCode::EmptySupport);
    CHECK(code_of([] { make({1, 1}, {0.5, 0.5}); }) == ErrorCode::DuplicateId);
    CHECK(code_of([] { make({0, 1}, {NAN, 0.5}); }) == ErrorCode::NonFinite);
    CHECK(code_of([] { make({0, 1}, {INFINITY, 0.5}); }) == ErrorCode::NonFinite);
    CHECK(code_of([] { make({0, 1}, {-0.1, 0.5}); }) == ErrorCode::NonFinite);
  }

  TEST_CASE("floor is respected after renormalization") {
    auto d = make({0, 1, 2}, {1.0, 1e-14, 1e-30});
    REQUIRE(d.size() == 3);
    KahanSum s;
    for (double p : d.probs()) {
      CHECK(p >= kProbFloor);
      s += p;
    }
    CHECK(std::fabs(s.value() - 1.0) <= 1e-15);
  }

  TEST_CASE("idempotent bit for bit (property)") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
      const std::size_t k = 1 + rng() % 12;
      std::vector<TokenId> ids(k);
      std::vector<double> w(k);
      for (std::size_t i = 0; i < k; ++i) {
        ids[i] = static_cast<TokenId>(i);
        // Mix ordinary weights with some far below the floor.
        w[i] = (rng() % 5 == 0) ? std::pow(10.0, -12 - static_cast<int>(rng() % 20)) : u(rng) + 1e-3;
      }
      const auto once = make(ids, w);
      const auto twice = make(std::vector<TokenId>(once.ids().begin(), once.ids().end()),
                              std::vector<double>(once.probs().begin(), once.probs().end()));
      REQUIRE(once == twice);
      for (double p : once.probs()) REQUIRE(p >= kProbFloor);
    }
  }
}

TEST_SUITE("entropy and moments") {
  TEST_CASE("uniform and point mass") {
    const auto u4 = Distribution::uniform(4);
    CHECK(entropy(u4) == 2.0);
    CHECK(second_log_moment(u4) == 4.0);
    CHECK(log_deviation(u4) == 0.0);
    const auto pm = Distribution::point_mass(3);
    CHECK(entropy(pm) == 0.0);
    CHECK(second_log_moment(pm) == 0.0);
    CHECK(log_deviation(pm) == 0.0);
    for (std::uint32_t k = 1; k <= 16; ++k) CHECK(log_deviation(Distribution::uniform(k)) == 0.0);
  }

  TEST_CASE("(0.25, 0.75) against long double summation") {
    const std::vector<double> p = {0.25, 0.75};
    const auto d = make({0, 1}, p);
    const double h_ref = static_cast<double>(oracle::entropy(p));
    const double s_ref = static_cast<double>(oracle::second_log_moment(p));
    CHECK(h_ref == doctest::Approx(kH_quarter).epsilon(1e-7));
    CHECK(s_ref == doctest::Approx(kS_quarter).epsilon(1e-6));
    CHECK(std::fabs(entropy(d) - h_ref) < 1e-15);
    CHECK(std::fabs(second_log_moment(d) - s_ref) < 1e-15);
    CHECK(std::fabs(log_deviation(d) - std::sqrt(s_ref - h_ref * h_ref)) < 1e-14);
  }

  TEST_CASE("log-deviation of (0.25, 0.75) against Monte Carlo") {
    const auto d = make({0, 1}, {0.25, 0.75});
    std::mt19937_64 rng(2024);
    std::bernoulli_distribution pick_one(0.75);
    const double s0 = -std::log2(0.25), s1 = -std::log2(0.75);
    double sum = 0, sum_sq = 0;
    const int samples = 10'000'000;
    for (int i = 0; i < samples; ++i) {
      const double s = pick_one(rng) ? s1 : s0;
      sum += s;
      sum_sq += s * s;
    }
    const double mean = sum / samples;
    const double sd = std::sqrt(sum_sq / samples - mean * mean);
    CHECK(std::fabs(sd - kLambda_quarter) < 1e-3);
    CHECK(std::fabs(log_deviation(d) - kLambda_quarter) < 1e-6);
  }

  TEST_CASE("0 <= lambda <= sqrt(S); lambda = 0 iff probabilities are equal (property)") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5000; ++trial) {
      const auto d = random_distribution(rng, 10);
      const double lam = log_deviation(d);
      CHECK(lam >= 0.0);
      CHECK(lam <= std::sqrt(second_log_moment(d)) + 1e-12);
      const bool all_equal = std::adjacent_find(d.probs().begin(), d.probs().end(), std::not_equal_to<>()) ==
                             d.probs().end();
      CHECK((lam == 0.0) == all_equal);
      const double h_ref = static_cast<double>(oracle::entropy(d.probs()));
      CHECK(std::fabs(entropy(d) - h_ref) < 1e-12);
    }
  }

  TEST_CASE("moment form clamps tiny negatives and rejects larger ones") {
    CHECK(log_deviation_from_moments(1.0, 1.0) == 0.0);
    CHECK(log_deviation_from_moments(1.0 - 5e-13, 1.0) == 0.0);
    CHECK(code_of([] { log_deviation_from_moments(1.0 - 1e-9, 1.0); }) == ErrorCode::NumericInconsistency);
    CHECK(log_deviation_from_moments(kS_quarter, kH_quarter) == doctest::Approx(kLambda_quarter).epsilon(1e-5));
  }

  TEST_CASE("summation is stable under permutation") {
    std::mt19937_64 rng(9);
    std::exponential_distribution<double> w(1.0);
    std::vector<std::pair<TokenId, double>> raw;
    for (TokenId i = 0; i < 200; ++i) raw.push_back({i, std::pow(w(rng), 6)});
    const auto a = validate_distribution(raw);
    std::vector<double> probs(a.probs().begin(), a.probs().end());
    std::vector<TokenId> ids(a.ids().begin(), a.ids().end());
    // Same distribution presented in another order must give the same stats.
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::pair<TokenId, double>> shuffled;
    for (auto i : order) shuffled.push_back({ids[i], probs[i]});
    const auto b = validate_distribution(shuffled);
    CHECK(std::fabs(entropy(a) - entropy(b)) < 1e-12);
    CHECK(std::fabs(second_log_moment(a) - second_log_moment(b)) < 1e-12);
  }
}

TEST_SUITE("cross entropy") {
  TEST_CASE("examples") {
    const auto half = make({0, 1}, {0.5, 0.5});
    const auto quarter = make({0, 1}, {0.25, 0.75});
    CHECK(cross_entropy(half, half) == 1.0);
    const std::vector<double> p = {0.5, 0.5}, q = {0.25, 0.75};
    const double ref = static_cast<double>(oracle::cross_entropy(p, q));
    CHECK(ref == doctest::Approx(kCross_half_quarter).epsilon(1e-7));
    CHECK(std::fabs(cross_entropy(half, quarter) - ref) < 1e-15);
    const auto pm = Distribution::point_mass(1);
    CHECK(cross_entropy(pm, quarter) == -std::log2(0.75));
  }

  TEST_CASE("support mismatch") {
    const auto p = make({0, 2}, {0.5, 0.5});
    const auto q = make({0, 1}, {0.5, 0.5});
    CHECK(code_of([&] { cross_entropy(p, q); }) == ErrorCode::SupportMismatch);
  }

  TEST_CASE("Gibbs inequality with equality iff p = q (property)") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10000; ++trial) {
      const auto k = static_cast<std::uint32_t>(1 + rng() % 8);
      std::exponential_distribution<double> w(1.0);
      std::vector<TokenId> ids(k);
      std::vector<double> a(k), b(k);
      for (std::uint32_t i = 0; i < k; ++i) {
        ids[i] = i;
        a[i] = w(rng);
        b[i] = w(rng);
      }
      const auto p = make(ids, a), q = make(ids, b);
      const double gap = cross_entropy(p, q) - entropy(p);
      CHECK(gap >= -1e-12);
      CHECK(std::fabs(cross_entropy(p, p) - entropy(p)) <= 1e-12);
      if (!(p == q)) {
        // Strict unless the draws coincide up to rounding.
        double max_diff = 0;
        for (std::uint32_t i = 0; i < k; ++i) max_diff = std::max(max_diff, std::fabs(p.probs()[i] - q.probs()[i]));
        if (max_diff > 1e-3) CHECK(gap > 1e-9);
      }
    }
  }
}

TEST_SUITE("empirical distribution") {
  const std::vector<TokenId> alphabet = {0, 1};

  TEST_CASE("counting") {
    const std::vector<TokenId> t = {0, 0, 1};
    const auto d = empirical_distribution(t, alphabet);
    CHECK(d.prob(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(d.prob(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const std::vector<TokenId> one = {1};
    CHECK(empirical_distribution(one, alphabet) == Distribution::point_mass(1));
  }

  TEST_CASE("errors") {
    CHECK(code_of([&] { empirical_distribution(std::vector<TokenId>{}, alphabet); }) == ErrorCode::EmptyString);
    CHECK(code_of([&] { empirical_distribution(std::vector<TokenId>{0, 5}, alphabet); }) ==
          ErrorCode::UnknownToken);
  }

  TEST_CASE("token-by-token log-perplexity equals cross entropy of the empirical distribution") {
    std::mt19937_64 rng(3);
    const auto alpha = make({0, 1, 2, 3}, {0.1, 0.2, 0.3, 0.4});
    const std::vector<TokenId> ids = {0, 1, 2, 3};
    std::discrete_distribution<TokenId> draw({0.1, 0.2, 0.3, 0.4});
    std::vector<TokenId> tokens;
    KahanSum surprisal;
    for (int n = 1; n <= 2000; ++n) {
      tokens.push_back(draw(rng));
      surprisal += -std::log2(alpha.prob(tokens.back()));
      const double l = surprisal.value() / n;
      REQUIRE(std::fabs(l - cross_entropy(empirical_distribution(tokens, ids), alpha)) < 1e-9);
    }
  }
}
