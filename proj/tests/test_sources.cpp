// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "typlab/error.hpp"
#include "typlab/sources.hpp"
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

Distribution dist(std::vector<double> p) {
  std::vector<TokenId> ids(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) ids[i] = static_cast<TokenId>(i);
  return validate_distribution(ids, p);
}

bool same_trace(const Trace& a, const Trace& b) {
  if (!(a.header == b.header) || a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto &x = a.steps[i], &y = b.steps[i];
    if (x.index != y.index || x.chosen_id != y.chosen_id || x.chosen_prob != y.chosen_prob || !(x.dist == y.dist)) {
      return false;
    }
  }
  return true;
}

SourceSpec uniform_iid(std::uint32_t v) { return SourceSpec::iid(Distribution::uniform(v)); }

}  // namespace

TEST_SUITE("sampling") {
  TEST_CASE("point mass source") {
    const auto t = sample_trace(SourceSpec::iid(Distribution::point_mass(0)), 5, 123);
    REQUIRE(t.steps.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(t.steps[i].index == i + 1);
      CHECK(t.steps[i].chosen_id == 0);
      CHECK(t.steps[i].chosen_prob == 1.0);
    }
    CHECK(t.header.source_kind == SourceKind::Simulated);
    CHECK(t.header.seed == std::optional<std::uint64_t>(123));
    CHECK(t.header.alphabet_size == std::optional<std::uint32_t>(1));
  }

  TEST_CASE("pure function of (source, n, seed)") {
    const SourceSpec src(ContextTreeSource::generate(4, 3, 99));
    CHECK(same_trace(sample_trace(src, 500, 7), sample_trace(src, 500, 7)));
    CHECK_FALSE(same_trace(sample_trace(src, 500, 7), sample_trace(src, 500, 8)));
    // Rebuilding the source from its seed gives the same table.
    const SourceSpec again(ContextTreeSource::generate(4, 3, 99));
    CHECK(same_trace(sample_trace(src, 300, 1), sample_trace(again, 300, 1)));
    CHECK(code_of([&] { sample_trace(src, 0, 1); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("inverse CDF follows id order") {
    // Frequencies of an iid draw match the distribution.
    const auto d = dist({0.1, 0.6, 0.3});
    const auto t = sample_trace(SourceSpec::iid(d), 200'000, 4);
    std::array<int, 3> counts{};
    for (const auto& s : t.steps) ++counts[s.chosen_id];
    for (int y = 0; y < 3; ++y) {
      const double p = d.probs()[y];
      const double se = std::sqrt(p * (1 - p) / 200'000);
      CHECK(std::fabs(counts[y] / 200'000.0 - p) < 4 * se);
    }
  }

  TEST_CASE("independent sequence cycles through its schedule") {
    IndependentSeqSource s{{Distribution::point_mass(0), Distribution::point_mass(1), Distribution::point_mass(2)}};
    const auto t = sample_trace(SourceSpec(s), 7, 1);
    const std::vector<TokenId> expect = {0, 1, 2, 0, 1, 2, 0};
    CHECK(trace_tokens(t.steps) == expect);
    CHECK(code_of([] { SourceSpec(IndependentSeqSource{}); }) == ErrorCode::InvalidArgument);
  }
}

TEST_SUITE("context tree") {
  TEST_CASE("table layout") {
    CHECK(ContextTreeSource::table_size(3, 0) == 1);
    CHECK(ContextTreeSource::table_size(3, 2) == 1 + 3 + 9);
    CHECK(ContextTreeSource::table_size(16, 4) == 1 + 16 + 256 + 4096 + 65536);
    const auto ct = ContextTreeSource::generate(3, 2, 1);
    CHECK(ct.table().size() == 13);
    const std::vector<TokenId> empty, one = {2}, two = {1, 2}, three = {0, 1, 2};
    CHECK(ct.context_index(empty) == 0);
    CHECK(ct.context_index(one) == 1 + 2);
    CHECK(ct.context_index(two) == 4 + 1 * 3 + 2);
    CHECK(ct.context_index(three) == ct.context_index(two));
    for (const auto& d : ct.table()) CHECK(d.size() == 3);
  }

  TEST_CASE("shape limits") {
    CHECK(code_of([] { ContextTreeSource::generate(17, 1, 1); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { ContextTreeSource::generate(3, 5, 1); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { ContextTreeSource::generate(0, 1, 1); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { ContextTreeSource::from_weights(2, 1, {{1, 1}}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { ContextTreeSource::from_weights(2, 0, {{1, 1, 1}}); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("recorded distributions are the table entries of the realized history") {
    const auto ct = ContextTreeSource::generate(3, 2, 5);
    const auto t = sample_trace(SourceSpec(ct), 1000, 2);
    std::vector<TokenId> hist;
    for (const auto& s : t.steps) {
      REQUIRE(s.dist == ct.table()[ct.context_index(hist)]);
      hist.push_back(s.chosen_id);
    }
  }

  TEST_CASE("sharpness lowers the entropy") {
    auto mean_entropy = [](double sharp) {
      const auto ct = ContextTreeSource::generate(4, 1, 3, sharp);
      double h = 0;
      for (const auto& d : ct.table()) h += entropy(d);
      return h / ct.table().size();
    };
    CHECK(mean_entropy(0.0) == doctest::Approx(2.0));
    CHECK(mean_entropy(1.0) > mean_entropy(3.0));
  }

  TEST_CASE("scaling all weights leaves the table unchanged") {
    std::vector<std::vector<double>> w = {{1, 2, 3}, {0.5, 0.25, 4}, {7, 1, 1}, {2, 2, 1}};
    const auto base = ContextTreeSource::from_weights(3, 1, w);
    for (auto& row : w) {
      for (auto& x : row) x *= 4.0;
    }
    const auto scaled = ContextTreeSource::from_weights(3, 1, w);
    for (std::size_t i = 0; i < base.table().size(); ++i) CHECK(base.table()[i] == scaled.table()[i]);
  }

  TEST_CASE("|l - h| <= 3 lam at N = 1e4 in at least 88% of 1000 seeds") {
    const SourceSpec src(ContextTreeSource::generate(3, 2, 7));
    int inside = 0;
    for (int s = 0; s < 1000; ++s) {
      const auto p = final_stats(sample_trace(src, 10'000, 5000 + s).steps);
      if (std::fabs(p.l - p.h) <= 3 * p.lam) ++inside;
    }
    MESSAGE("inside fraction " << inside / 1000.0);
    CHECK(inside >= 880);
  }
}

TEST_SUITE("grammar filtered") {
  TEST_CASE("accept-all needs one attempt") {
    const auto src = SourceSpec::grammar_filtered(uniform_iid(3), Grammar::accept_all(3), 10);
    for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(grammar_filtered_sample(src, 6, seed).attempts == 1);
  }

  TEST_CASE("no-repeat outputs have distinct neighbours") {
    const auto src = SourceSpec::grammar_filtered(uniform_iid(3), Grammar::no_repeat(3), 1000);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto t = sample_trace(src, 2, seed);
      REQUIRE(t.steps.size() == 2);
      CHECK(t.steps[0].chosen_id != t.steps[1].chosen_id);
      // The recorded distributions are the inner model's.
      CHECK(t.steps[1].dist == Distribution::uniform(3));
    }
  }

  TEST_CASE("acceptance rate per attempt matches p_G(8) = (2/3)^7") {
    const auto src = SourceSpec::grammar_filtered(uniform_iid(3), Grammar::no_repeat(3), 100'000);
    // Direct count: accepted strings over all strings of length 8.
    const double p_g = static_cast<double>(oracle::count_accepted(Grammar::no_repeat(3), 8)) / 6561.0;
    CHECK(p_g == doctest::Approx(std::pow(2.0 / 3.0, 7)).epsilon(1e-12));
    std::uint64_t attempts = 0;
    const int seeds = 10'000;
    for (int s = 0; s < seeds; ++s) attempts += grammar_filtered_sample(src, 8, s).attempts;
    // Each attempt is a Bernoulli(p_G) trial; the rate is successes / attempts.
    const double rate = static_cast<double>(seeds) / attempts;
    const double se = std::sqrt(p_g * (1 - p_g) / attempts);
    MESSAGE("rate " << rate << " expected " << p_g << " se " << se);
    CHECK(std::fabs(rate - p_g) <= 3 * se);
  }

  TEST_CASE("errors") {
    const auto stuck = SourceSpec::grammar_filtered(SourceSpec::iid(Distribution::point_mass(0)),
                                                    Grammar::no_repeat(1 + 1), 5);
    CHECK(code_of([&] { sample_trace(stuck, 2, 1); }) == ErrorCode::MaxAttemptsExceeded);
    CHECK(code_of([] { SourceSpec::grammar_filtered(uniform_iid(3), Grammar::no_repeat(3), 0); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([] { SourceSpec::grammar_filtered(uniform_iid(3), Grammar::no_repeat(2), 5); }) ==
          ErrorCode::InvalidArgument);
    // Even-length-only language leaves length 1 empty.
    const Grammar even(2, 0, {{1, 1}, {0, 0}}, {true, false}, "even");
    CHECK(code_of([&] { SourceSpec::grammar_filtered(uniform_iid(2), even, 5); }) ==
          ErrorCode::EmptyLanguageAtLengthN);
    const auto src = SourceSpec::grammar_filtered(uniform_iid(3), Grammar::no_repeat(3), 5);
    CHECK(code_of([&] { src.conditional({}); }) == ErrorCode::UnsupportedModel);
    CHECK(&src.recording_source() != &src);
  }
}

TEST_SUITE("auxiliary model") {
  TEST_CASE("empty trace") {
    CHECK(code_of([] { auxiliary_from_trace(std::vector<TraceStep>{}); }) == ErrorCode::EmptyTrace);
  }

  TEST_CASE("iid trace gives the same distribution at every step") {
    const auto d = dist({0.2, 0.8});
    const auto t = sample_trace(SourceSpec::iid(d), 30, 3);
    const auto aux = auxiliary_from_trace(t.steps);
    std::vector<TokenId> hist;
    for (int i = 0; i < 30; ++i) {
      CHECK(aux.conditional(hist) == d);
      hist.push_back(1);
    }
  }

  TEST_CASE("h and lam of auxiliary samples equal those of the trace") {
    const auto t = sample_trace(SourceSpec(ContextTreeSource::generate(3, 2, 4)), 200, 6);
    const auto aux = auxiliary_from_trace(t.steps);
    const auto ref = final_stats(t.steps);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto p = final_stats(sample_trace(aux, 200, seed).steps);
      CHECK(p.h == ref.h);
      CHECK(p.lam == ref.lam);
    }
  }

  TEST_CASE("Monte Carlo: mean l = h and Var(l - h) = lam^2") {
    const auto t = sample_trace(SourceSpec(ContextTreeSource::generate(3, 2, 21)), 40, 2);
    const auto aux = auxiliary_from_trace(t.steps);
    const auto ref = final_stats(t.steps);
    const int samples = 100'000;
    double sum = 0, sum_sq = 0;
    for (int s = 0; s < samples; ++s) {
      const auto p = final_stats(sample_trace(aux, 40, s).steps);
      sum += p.l - p.h;
      sum_sq += (p.l - p.h) * (p.l - p.h);
    }
    const double mean = sum / samples;
    const double var = sum_sq / samples - mean * mean;
    const double se = std::sqrt(var / samples);
    MESSAGE("mean(l-h) " << mean << " se " << se << " var " << var << " lam^2 " << ref.lam * ref.lam);
    CHECK(std::fabs(mean) <= 3 * se);
    CHECK(std::fabs(var / (ref.lam * ref.lam) - 1.0) < 0.05);
  }
}

TEST_SUITE("cross-model scoring of iid traces") {
  TEST_CASE("l under beta converges to H(alpha, beta); alpha wins in >= 99% of seeds") {
    const auto alpha = dist({0.5, 0.5});
    const auto beta = dist({0.25, 0.75});
    const auto a = SourceSpec::iid(alpha), b = SourceSpec::iid(beta);
    const double h_ab = static_cast<double>(oracle::cross_entropy(std::vector<double>{0.5, 0.5},
                                                                  std::vector<double>{0.25, 0.75}));
    int alpha_lower = 0;
    for (int s = 0; s < 100; ++s) {
      const auto tokens = trace_tokens(sample_trace(a, 100'000, 900 + s).steps);
      const auto la = score_final(tokens, a).l;
      const auto lb = score_final(tokens, b).l;
      CHECK(std::fabs(lb - h_ab) < 0.02);
      if (la <= lb) ++alpha_lower;
    }
    CHECK(alpha_lower >= 99);
  }
}

TEST_SUITE("source JSON") {
  TEST_CASE("round trip of every variant") {
    std::vector<SourceSpec> sources = {
        SourceSpec::iid(dist({0.25, 0.75})),
        SourceSpec(IndependentSeqSource{{dist({0.5, 0.5}), dist({0.1, 0.2, 0.7})}}),
        SourceSpec(ContextTreeSource::generate(3, 2, 7, 1.5)),
        SourceSpec(ContextTreeSource::from_weights(2, 1, {{1, 3}, {1, 0}, {2, 2}})),
        SourceSpec::grammar_filtered(SourceSpec(ContextTreeSource::generate(3, 1, 2)), Grammar::no_repeat(3), 77),
    };
    for (const auto& s : sources) {
      const auto j = source_to_json(s);
      const auto back = source_from_json(nlohmann::json::parse(j.dump()));
      CHECK(source_to_json(back).dump() == j.dump());
      CHECK(back.describe() == s.describe());
      CHECK(same_trace(sample_trace(back, 6, 3), sample_trace(s, 6, 3)));
    }
  }

  TEST_CASE("resolve from inline text and files") {
    const auto inline_src = resolve_source(R"({"type":"iid","ids":[0,1],"probs":[0.5,0.5]})");
    CHECK(inline_src.alphabet_size() == 2);
    const auto path = std::filesystem::temp_directory_path() / "typlab_test_source.json";
    {
      std::ofstream f(path);
      f << R"({"type":"grammar_filtered","inner":{"type":"iid","ids":[0,1,2],"weights":[1,1,1]},"grammar":"norepeat"})";
    }
    const auto filtered = resolve_source(path.string());
    CHECK(filtered.is_grammar_filtered());
    std::filesystem::remove(path);
    CHECK(code_of([] { resolve_source("/nonexistent/source.json"); }) == ErrorCode::InputNotFound);
    CHECK(code_of([] { resolve_source("{bad"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { resolve_source(R"({"type":"markov"})"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { resolve_source(R"({"type":"iid","ids":[0,0],"probs":[1,1]})"); }) == ErrorCode::DuplicateId);
  }
}
