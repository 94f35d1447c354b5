#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file distribution.hpp
 * @brief Finite next-token distributions and their information measures.
 *
 * All logarithms are base 2, all statistics are in bits. A Distribution is
 * immutable once built: ids are sorted ascending and distinct, every
 * probability is at least kProbFloor and the probabilities sum to 1.
 * Entropy H(p), second log-moment S(p) = sum p (log2 p)^2 and log-deviation
 * lambda(p) (the standard deviation of -log2 p(Y) under p) are computed once
 * at construction and cached.
 *
 * Copies share the underlying storage, so passing Distributions by value is
 * cheap and safe across threads.
 */

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace typlab {

using TokenId = std::uint32_t;

struct DistStats {
  double entropy = 0.0;            ///< bits
  double second_log_moment = 0.0;  ///< bits^2
  double log_deviation = 0.0;      ///< bits
};

class Distribution {
 public:
  /// All mass on `id`.
  static Distribution point_mass(TokenId id);
  /// Uniform over ids 0..size-1.
  static Distribution uniform(std::uint32_t size);

  std::span<const TokenId> ids() const noexcept { return rep_->ids; }
  std::span<const double> probs() const noexcept { return rep_->probs; }
  std::size_t size() const noexcept { return rep_->ids.size(); }

  /// Position of `id` in ids(), if present.
  std::optional<std::size_t> find(TokenId id) const noexcept;
  /// Probability of `id`, 0 when outside the support.
  double prob(TokenId id) const noexcept;
  bool contains(TokenId id) const noexcept { return find(id).has_value(); }
  TokenId max_id() const noexcept { return rep_->ids.back(); }

  const DistStats& stats() const noexcept { return rep_->stats; }

  /// Bitwise equality of support and probabilities.
  friend bool operator==(const Distribution& a, const Distribution& b) noexcept;

 private:
  struct Rep {
    std::vector<TokenId> ids;
    std::vector<double> probs;
    DistStats stats;
  };

  explicit Distribution(std::shared_ptr<const Rep> rep) : rep_(std::move(rep)) {}

  friend Distribution make_distribution_unchecked(std::vector<TokenId> ids,
                                                  std::vector<double> probs);

  std::shared_ptr<const Rep> rep_;
};

/**
 * Builds a Distribution from raw (id, weight) pairs.
 *
 * Zero weights are dropped, the rest are rescaled to sum 1 (ratios kept),
 * then any entry below kProbFloor is pinned to kProbFloor and the remainder
 * rescaled so that every entry ends up >= kProbFloor. Input that already
 * satisfies all invariants is returned unchanged, which makes the function
 * idempotent bit for bit.
 *
 * Throws Error{NonFinite} for NaN/inf/negative weights, Error{DuplicateId}
 * for repeated ids and Error{EmptySupport} when nothing positive remains.
 */
Distribution validate_distribution(std::span<const std::pair<TokenId, double>> raw);
Distribution validate_distribution(std::span<const TokenId> ids, std::span<const double> weights);

double entropy(const Distribution& d) noexcept;
double second_log_moment(const Distribution& d) noexcept;
double log_deviation(const Distribution& d) noexcept;

/// sqrt(S - H^2) with radicands in [-1e-12, 0) clamped to 0. Throws
/// Error{NumericInconsistency} below that.
double log_deviation_from_moments(double second_log_moment, double entropy);

/// H(p, q) = -sum_y p(y) log2 q(y). Throws Error{SupportMismatch} when p puts
/// mass on an id outside q's support.
double cross_entropy(const Distribution& p, const Distribution& q);

/// Relative token frequencies of `tokens`. `alphabet` lists the admissible
/// ids. Throws Error{EmptyString} / Error{UnknownToken}.
Distribution empirical_distribution(std::span<const TokenId> tokens,
                                    std::span<const TokenId> alphabet);

}  // namespace typlab
