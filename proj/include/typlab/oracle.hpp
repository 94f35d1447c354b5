#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file oracle.hpp
 * @brief Exact brute-force evaluation of small models.
 *
 * Every length-n string over a small alphabet is enumerated with its exact
 * probability and its (l, h, lam) statistics. On top of the full record set:
 *
 *   T   = { |l - h| < eps }                          typical set
 *   T_G = G ∩ T
 *   E1  = { y in G : l > g(n) + eps/2 }              high-entropy tail
 *   P   = G ∩ T ∩ E1^c                               purged typical set
 *   E2  = { y in P : h <= g(n) - delta_g }           low-entropy part of P
 *   V   = { y in G : l <= h - eps, h < g(n) }        over-typical set
 *
 * with g(n) = (1/n) log2 |G(n)|, p_G(n) = Pr(G(n)) and rho = |E2| / |P|.
 * Conditional masses use Pr(y | G) = Pr(y) / p_G(n).
 */

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"
#include "typlab/grammar.hpp"
#include "typlab/sources.hpp"

namespace typlab {

using BigCount = boost::multiprecision::cpp_int;

/// Default ceiling on V^n for enumeration. TYPLAB_CAP overrides it in the CLI.
inline constexpr std::uint64_t kDefaultEnumerationCap = 100'000'000;

/// log2 of a non-negative big integer; -inf for 0.
double log2_big(const BigCount& x);

struct DfaCount {
  std::uint32_t n = 0;
  BigCount count;
  double g = 0.0;  ///< (1/n) log2 count
};

/// |G(n)| by transfer-matrix exponentiation over big integers. Throws
/// Error{EmptyLanguageAtLengthN} when the count is 0 and
/// Error{InvalidArgument} for n == 0.
DfaCount count_dfa_strings(const Grammar& grammar, std::uint32_t n);

/// Number of accepted completions of each length from each state:
/// result[k][s] = #{ w in Sigma^k : the DFA started in s accepts w }.
std::vector<std::vector<BigCount>> completion_counts(const Grammar& grammar, std::uint32_t max_len);

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

enum SetFlag : std::uint8_t {
  kInG = 1u << 0,
  kInT = 1u << 1,
  kInE1 = 1u << 2,
  kInP = 1u << 3,
  kInE2 = 1u << 4,
  kInV = 1u << 5,
};

/// One string. Tokens are packed as a base-V number, first token most
/// significant; use `decode_tokens` to unpack.
struct StringRecord {
  std::uint64_t code = 0;
  double prob = 0.0;
  double l = 0.0;
  double h = 0.0;
  double lam = 0.0;
  double deviation = 0.0;  ///< l - h, accumulated per step without cancellation
  std::uint8_t flags = 0;

  bool in(SetFlag f) const noexcept { return (flags & f) != 0; }
};

std::vector<TokenId> decode_tokens(std::uint64_t code, std::uint32_t alphabet_size, std::uint32_t n);

struct SetStats {
  std::uint64_t size = 0;
  double mass = 0.0;              ///< Pr(set)
  double conditional_mass = 0.0;  ///< Pr(set | G); equals mass for T
};

struct BoundVerdict {
  std::string name;
  bool holds = true;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  ///< rhs - lhs for inequalities, tol - |lhs - rhs| for identities
  bool rigorous = true;  ///< a finite-n theorem (failure means an implementation bug)
  bool applicable = true;
  std::string detail;
  std::vector<std::vector<TokenId>> counterexamples;
};

struct EnumerationReport {
  std::uint32_t n = 0;
  std::uint32_t alphabet_size = 0;
  std::string model_label;
  std::uint64_t total_strings = 0;  ///< V^n
  std::uint64_t zero_mass_strings = 0;
  std::vector<StringRecord> records;  ///< positive-probability strings, lexicographic
  double mass_total = 0.0;
  double joint_entropy = 0.0;  ///< H(Y_n) in bits
  double mean_l = 0.0;
  double mean_h = 0.0;

  // Filled by build_sets.
  bool sets_built = false;
  std::string grammar_label;
  double eps = 0.0;
  BigCount g_count = 0;
  double g_n = 0.0;
  double p_G = 0.0;
  SetStats typical, typical_grammatical, e1, purged, e2, over_typical;
  double mean_h_over_P = 0.0;
  double delta_g = 0.0;
  bool delta_g_defaulted = true;
  double rho = 0.0;
  double grammatical_entropy_rate = 0.0;  ///< (1/n) H(Y_n | G) in bits
  double mean_l_given_G = 0.0;
  double nontypical_given_G = 0.0;  ///< Pr(|l - h| >= eps | G)

  std::vector<BoundVerdict> verdicts;
};

/**
 * Enumerates every string of length n with positive probability. Subtrees
 * under each first token are walked in parallel and merged in token order,
 * so the result does not depend on scheduling.
 *
 * Throws Error{CapExceeded} when V^n > cap, Error{UnsupportedModel} for
 * grammar-filtered sources, Error{InvalidArgument} for n == 0.
 */
EnumerationReport enumerate_strings(const ConditionalModel& model, std::uint32_t n,
                                    std::uint64_t cap = kDefaultEnumerationCap);

/// Model that picks uniformly among the accepted strings of length n. Its
/// conditional at prefix y_1..y_k is proportional to the number of accepted
/// completions, so it is only meaningful for histories shorter than n.
class UniformGrammarModel final : public ConditionalModel {
 public:
  UniformGrammarModel(const Grammar& grammar, std::uint32_t n);

  std::uint32_t alphabet_size() const override { return alphabet_size_; }
  /// Throws Error{ZeroProbabilityPath} for prefixes that cannot be completed
  /// and Error{InvalidArgument} for histories of length >= n.
  const Distribution& conditional(std::span<const TokenId> history) const override;

 private:
  Grammar grammar_;
  std::uint32_t n_;
  std::uint32_t alphabet_size_;
  // dists_[k][state]: conditional after k tokens that left the DFA in `state`.
  std::vector<std::vector<std::optional<Distribution>>> dists_;
};

/// Marks the sets on every record and fills the set statistics. delta_g
/// defaults to (g(n) - mean h over P) / 2 with the mean weighted by Pr.
/// Throws Error{InvalidArgument} for eps <= 0, an alphabet mismatch, or p_G = 0.
void build_sets(EnumerationReport& report, const Grammar& grammar, double eps,
                std::optional<double> delta_g = std::nullopt);

/**
 * Evaluates every bound on a report with sets built and stores the verdicts.
 * With `throw_on_violation`, a failing rigorous verdict raises
 * Error{BoundViolated} listing its counterexample strings.
 */
std::vector<BoundVerdict> verify_bounds(EnumerationReport& report, bool throw_on_violation = false);

bool all_hold(std::span<const BoundVerdict> verdicts, bool rigorous_only = false) noexcept;

// ---------------------------------------------------------------------------
// Variance decomposition
// ---------------------------------------------------------------------------

struct ChebyshevCheck {
  double alpha = 0.0;
  double exceedance = 0.0;  ///< Pr(|l - h| > alpha * sigma)
  double bound = 0.0;       ///< 1 / alpha^2
  bool holds = true;
};

struct VarianceReport {
  std::uint32_t n = 0;
  double mean_l_minus_h = 0.0;
  double exact_var_l_minus_h = 0.0;
  double sum_conditional_vars = 0.0;  ///< (1/n^2) sum_m E[lambda^2(p_m)]
  double relative_gap = 0.0;
  bool lemma_holds = true;  ///< relative_gap <= 1e-9
  std::vector<ChebyshevCheck> chebyshev;
};

inline constexpr double kVarianceRelTol = 1e-9;

VarianceReport variance_decomposition(const EnumerationReport& report, std::span<const double> alphas);
VarianceReport variance_decomposition(const ConditionalModel& model, std::uint32_t n,
                                      std::span<const double> alphas,
                                      std::uint64_t cap = kDefaultEnumerationCap);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

nlohmann::ordered_json report_to_json(const EnumerationReport& report, bool include_records = false);
nlohmann::ordered_json variance_to_json(const VarianceReport& report);

/// Per-n set-size table.
void write_report_csv_header(std::ostream& out);
void write_report_csv_row(std::ostream& out, const EnumerationReport& report);
/// Row from a report previously exported with report_to_json.
void write_report_csv_row(std::ostream& out, const nlohmann::json& report);

}  // namespace typlab
