// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "typlab/error.hpp"
#include "typlab/oracle.hpp"
#include "typlab/typicality.hpp"

using namespace typlab;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

PrefixPoint point(std::uint64_t n, double l, double h, double lam) { return PrefixPoint{n, l, h, lam}; }

Distribution dist(std::vector<double> p) {
  std::vector<TokenId> ids(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) ids[i] = static_cast<TokenId>(i);
  return validate_distribution(ids, p);
}

}  // namespace

TEST_SUITE("classify") {
  TEST_CASE("worked examples") {
    auto r = classify(point(100, 1.0, 1.0, 0.1));
    CHECK(r.z == 0.0);
    CHECK(r.classification == Classification::Typical);
    CHECK(r.c == 3.0);

    r = classify(point(100, 1.4, 1.0, 0.1));
    CHECK(r.z == doctest::Approx(4.0));
    CHECK(r.classification == Classification::UnderTypical);

    r = classify(point(100, 0.6, 1.0, 0.1));
    CHECK(r.z == doctest::Approx(-4.0));
    CHECK(r.classification == Classification::OverTypical);

    r = classify(point(100, 1.25, 1.0, 0.1));
    CHECK(r.classification == Classification::Typical);
    CHECK(classify(point(100, 1.25, 1.0, 0.1), 2.0).classification == Classification::UnderTypical);
  }

  TEST_CASE("zero lam") {
    auto r = classify(point(10, 1.0, 1.0, 0.0));
    CHECK(r.classification == Classification::Typical);
    CHECK(r.z == 0.0);
    r = classify(point(10, 1.0 + 1e-12, 1.0, 0.0));
    CHECK(r.classification == Classification::Typical);
    r = classify(point(10, 1.5, 1.0, 0.0));
    CHECK(r.classification == Classification::UnderTypical);
    CHECK(std::isinf(r.z));
    CHECK(r.z > 0);
    r = classify(point(10, 0.5, 1.0, 0.0));
    CHECK(r.classification == Classification::OverTypical);
    CHECK(report_to_json(r)["z"].is_null());
  }

  TEST_CASE("argument checks") {
    CHECK(code_of([] { classify(point(10, 1, 1, 0.1), 0.0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { classify(point(10, 1, 1, 0.1), -1.0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { classify(point(0, 1, 1, 0.1)); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("classification is symmetric and monotone in c") {
    Xoshiro256 rng(5);
    for (int i = 0; i < 10'000; ++i) {
      const double h = 2 * rng.uniform();
      const double lam = 0.01 + rng.uniform();
      const double l = h + (rng.uniform() - 0.5) * 8 * lam;
      const auto r = classify(point(50, l, h, lam));
      const auto mirrored = classify(point(50, 2 * h - l, h, lam));
      if (r.classification == Classification::UnderTypical) {
        CHECK(mirrored.classification == Classification::OverTypical);
      }
      if (r.classification != Classification::Typical) {
        CHECK(classify(point(50, l, h, lam), 2.0).classification == r.classification);
      } else {
        CHECK(classify(point(50, l, h, lam), 4.0).classification == Classification::Typical);
      }
      CHECK(std::fabs(r.z) == doctest::Approx(std::fabs(l - h) / lam));
    }
  }

  TEST_CASE("JSON and exit codes") {
    const auto j = report_to_json(classify(point(100, 1.4, 1.0, 0.1)));
    CHECK(j["N"] == 100);
    CHECK(j["class"] == "under_typical");
    CHECK(j["c"] == 3.0);
    CHECK(j.size() == 7);
    CHECK(exit_code(Classification::Typical) == 0);
    CHECK(exit_code(Classification::UnderTypical) == 10);
    CHECK(exit_code(Classification::OverTypical) == 11);
    CHECK(to_string(Classification::OverTypical) == "over_typical");
  }

  TEST_CASE("false-negative bound") {
    CHECK(false_negative_bound(2.0) == 0.25);
    CHECK(false_negative_bound(3.0) == doctest::Approx(1.0 / 9.0));
    CHECK(code_of([] { false_negative_bound(0.0); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { false_negative_bound(std::nan("")); }) == ErrorCode::InvalidArgument);
  }
}

TEST_SUITE("scoring") {
  TEST_CASE("uniform scorer gives log2 V for any string") {
    const auto scorer = SourceSpec::iid(Distribution::uniform(4));
    const std::vector<TokenId> tokens = {3, 1, 0, 0, 2, 3, 1};
    const auto p = score_final(tokens, scorer);
    CHECK(p.n == 7);
    CHECK(p.l == 2.0);
    CHECK(p.h == 2.0);
    CHECK(p.lam == 0.0);
  }

  TEST_CASE("alternating string under a biased coin") {
    std::vector<TokenId> tokens(10'000);
    for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = i % 2;
    const auto scorer = SourceSpec::iid(dist({0.25, 0.75}));
    const auto p = score_final(tokens, scorer);
    CHECK(std::fabs(p.l - 1.2075188) < 1e-7);
    const double frozen_h = 0.8112781;
    CHECK(std::fabs(p.h - frozen_h) < 1e-7);
    const auto series = score_under_model(tokens, scorer, 1000);
    CHECK(series.size() == 10);
    CHECK(series.back().l == p.l);
    const auto steps = score_steps(tokens, scorer);
    CHECK(trace_tokens(steps) == tokens);
    CHECK(final_stats(steps).l == p.l);
  }

  TEST_CASE("scoring errors") {
    const auto coin = SourceSpec::iid(Distribution::uniform(2));
    CHECK(code_of([&] { score_final(std::vector<TokenId>{}, coin); }) == ErrorCode::EmptyString);
    CHECK(code_of([&] { score_final(std::vector<TokenId>{0, 2}, coin); }) == ErrorCode::UnknownToken);
    const auto gap = SourceSpec::iid(validate_distribution(std::vector<TokenId>{0, 2}, std::vector<double>{1, 1}));
    try {
      score_steps(std::vector<TokenId>{0, 2, 1}, gap);
      FAIL("expected ZeroProbabilityPath");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ZeroProbabilityPath);
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }

  TEST_CASE("grammar-filtered scorer uses its inner conditionals") {
    const auto inner = SourceSpec(ContextTreeSource::generate(3, 1, 4));
    const auto filtered = SourceSpec::grammar_filtered(inner, Grammar::no_repeat(3), 10);
    const std::vector<TokenId> tokens = {0, 1, 2, 0, 2};
    const auto a = score_final(tokens, inner);
    const auto b = score_final(tokens, filtered);
    CHECK(a.l == b.l);
    CHECK(a.h == b.h);
  }

  TEST_CASE("rescoring a trace under its own source reproduces the trace statistics") {
    const SourceSpec src(ContextTreeSource::generate(3, 2, 9));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto t = sample_trace(src, 500, seed);
      const auto a = final_stats(t.steps);
      const auto b = score_final(trace_tokens(t.steps), src);
      CHECK(a.l == b.l);
      CHECK(a.h == b.h);
      CHECK(a.lam == b.lam);
    }
  }

  TEST_CASE("mean score gap matches the divergence") {
    const auto alpha = dist({0.5, 0.5});
    const auto beta = dist({0.25, 0.75});
    const auto a = SourceSpec::iid(alpha), b = SourceSpec::iid(beta);
    const std::array<double, 2> pa{0.5, 0.5}, pb{0.25, 0.75};
    const double expect = static_cast<double>(oracle::cross_entropy(pa, pb) - oracle::entropy(pa));
    const int seeds = 1000;
    double sum = 0, sum_sq = 0;
    for (int s = 0; s < seeds; ++s) {
      const auto tokens = trace_tokens(sample_trace(a, 10'000, 40'000 + s).steps);
      const double d = score_final(tokens, b).l - score_final(tokens, a).l;
      sum += d;
      sum_sq += d * d;
    }
    const double mean = sum / seeds;
    const double se = std::sqrt((sum_sq / seeds - mean * mean) / seeds);
    MESSAGE("mean gap " << mean << " expected " << expect << " se " << se);
    CHECK(std::fabs(mean - expect) <= 3 * se);
  }

  TEST_CASE("own-source traces are rarely flagged") {
    const SourceSpec src(ContextTreeSource::generate(3, 2, 7));
    int flagged = 0;
    for (int s = 0; s < 1000; ++s) {
      const auto t = sample_trace(src, 1000, 70'000 + s);
      if (classify(final_stats(t.steps)).classification != Classification::Typical) ++flagged;
    }
    MESSAGE("flagged " << flagged << " of 1000");
    CHECK(flagged / 1000.0 <= false_negative_bound(3.0));
  }
}
