// SPDX-License-Identifier: Apache-2.0

#include "typlab/typicality.hpp"

#include <cmath>
#include <limits>

#include "typlab/error.hpp"

namespace typlab {

namespace {

const ConditionalModel& effective_scorer(const ConditionalModel& scorer) {
  if (const auto* spec = dynamic_cast<const SourceSpec*>(&scorer)) return spec->recording_source();
  return scorer;
}

// Calls fn(position, chosen_prob, dist) for every token.
template <typename Fn>
void walk_scored(std::span<const TokenId> tokens, const ConditionalModel& scorer, Fn&& fn) {
  if (tokens.empty()) throw Error(ErrorCode::EmptyString, "no tokens to score");
  const ConditionalModel& model = effective_scorer(scorer);
  const std::uint32_t v = model.alphabet_size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId y = tokens[i];
    if (y >= v) {
      throw Error(ErrorCode::UnknownToken, "token " + std::to_string(y) + " at position " +
                                               std::to_string(i + 1) + " is outside the scorer's alphabet");
    }
    const Distribution& d = model.conditional(tokens.first(i));
    const double p = d.prob(y);
    if (p < kProbFloor) {
      throw Error(ErrorCode::ZeroProbabilityPath,
                  "token " + std::to_string(y) + " at position " + std::to_string(i + 1) +
                      " has zero probability under the scorer");
    }
    fn(i, p, d);
  }
}

}  // namespace

std::string_view to_string(Classification c) noexcept {
  switch (c) {
    case Classification::Typical: return "typical";
    case Classification::UnderTypical: return "under_typical";
    case Classification::OverTypical: return "over_typical";
  }
  return "unknown";
}

TypicalityReport classify(const PrefixPoint& stats, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "multiplier c must be > 0");
  if (stats.n == 0) throw Error(ErrorCode::InvalidArgument, "statistics cover no tokens");
  TypicalityReport r;
  r.n = stats.n;
  r.l = stats.l;
  r.h = stats.h;
  r.lam = stats.lam;
  r.c = c;
  const double diff = stats.l - stats.h;
  if (stats.lam > 0.0) {
    r.z = diff / stats.lam;
    if (stats.l > stats.h + c * stats.lam) {
      r.classification = Classification::UnderTypical;
    } else if (stats.l < stats.h - c * stats.lam) {
      r.classification = Classification::OverTypical;
    }
  } else if (std::fabs(diff) <= kDegenerateTolerance) {
    r.z = 0.0;
  } else {
    r.z = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.classification = diff > 0 ? Classification::UnderTypical : Classification::OverTypical;
  }
  return r;
}

double false_negative_bound(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "alpha must be > 0");
  return 1.0 / (alpha * alpha);
}

int exit_code(Classification c) noexcept {
  switch (c) {
    case Classification::Typical: return 0;
    case Classification::UnderTypical: return 10;
    case Classification::OverTypical: return 11;
  }
  return 0;
}

std::vector<TraceStep> score_steps(std::span<const TokenId> tokens, const ConditionalModel& scorer) {
  std::vector<TraceStep> steps;
  steps.reserve(tokens.size());
  walk_scored(tokens, scorer, [&](std::size_t i, double p, const Distribution& d) {
    steps.push_back(TraceStep{i + 1, tokens[i], p, d});
  });
  return steps;
}

std::vector<PrefixPoint> score_under_model(std::span<const TokenId> tokens, const ConditionalModel& scorer,
                                           std::uint64_t stride) {
  const auto steps = score_steps(tokens, scorer);
  return prefix_stats(steps, stride);
}

PrefixPoint score_final(std::span<const TokenId> tokens, const ConditionalModel& scorer) {
  PrefixAccumulator acc;
  walk_scored(tokens, scorer, [&](std::size_t, double p, const Distribution& d) { acc.add(p, d.stats()); });
  return acc.current();
}

std::vector<TokenId> trace_tokens(std::span<const TraceStep> steps) {
  std::vector<TokenId> t;
  t.reserve(steps.size());
  for (const auto& s : steps) t.push_back(s.chosen_id);
  return t;
}

nlohmann::ordered_json report_to_json(const TypicalityReport& r) {
  nlohmann::ordered_json j;
  j["N"] = r.n;
  j["l"] = r.l;
  j["h"] = r.h;
  j["lam"] = r.lam;
  if (std::isfinite(r.z)) {
    j["z"] = r.z;
  } else {
    j["z"] = nullptr;
  }
  j["class"] = std::string(to_string(r.classification));
  j["c"] = r.c;
  return j;
}

}  // namespace typlab
