#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file typicality.hpp
 * @brief Variable-threshold typicality classification and cross-model scoring.
 *
 * With multiplier c > 0, a string with statistics (l, h, lam) is
 *   under_typical  iff l > h + c * lam
 *   over_typical   iff l < h - c * lam
 *   typical        otherwise.
 * When lam == 0 the string is typical iff |l - h| <= 1e-9, else classified by
 * the sign of l - h.
 *
 * For a string drawn from the scoring model itself, Chebyshev's inequality
 * bounds Pr(not typical at multiplier alpha) by 1 / alpha^2.
 */

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "typlab/sources.hpp"
#include "typlab/trace.hpp"

namespace typlab {

enum class Classification { Typical, UnderTypical, OverTypical };

std::string_view to_string(Classification c) noexcept;

inline constexpr double kDefaultMultiplier = 3.0;
inline constexpr double kDegenerateTolerance = 1e-9;

struct TypicalityReport {
  std::uint64_t n = 0;
  double l = 0.0;
  double h = 0.0;
  double lam = 0.0;
  double z = 0.0;  ///< (l - h) / lam; +-inf when lam == 0 and l != h, 0 when both vanish
  Classification classification = Classification::Typical;
  double c = kDefaultMultiplier;
};

/// Throws Error{InvalidArgument} for c <= 0 or n == 0.
TypicalityReport classify(const PrefixPoint& stats, double c = kDefaultMultiplier);

/// 1 / alpha^2. Throws Error{InvalidArgument} for alpha <= 0.
double false_negative_bound(double alpha);

/// CLI exit status: 0 typical, 10 under-typical, 11 over-typical.
int exit_code(Classification c) noexcept;

/**
 * Steps of the scorer's conditionals along `tokens`. Grammar-filtered
 * scorers use the conditionals of their inner source.
 *
 * Throws Error{EmptyString}, Error{UnknownToken} for a token outside the
 * scorer's alphabet, Error{ZeroProbabilityPath} when the scorer gives a token
 * no probability; both report the 1-based position.
 */
std::vector<TraceStep> score_steps(std::span<const TokenId> tokens, const ConditionalModel& scorer);

/// Prefix series of `tokens` under `scorer`; see prefix_stats for `stride`.
std::vector<PrefixPoint> score_under_model(std::span<const TokenId> tokens, const ConditionalModel& scorer,
                                           std::uint64_t stride = 1);

/// Final-length statistics without materializing the steps.
PrefixPoint score_final(std::span<const TokenId> tokens, const ConditionalModel& scorer);

/// Chosen ids of a trace.
std::vector<TokenId> trace_tokens(std::span<const TraceStep> steps);

nlohmann::ordered_json report_to_json(const TypicalityReport& report);

}  // namespace typlab
