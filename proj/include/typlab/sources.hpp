#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file sources.hpp
 * @brief Seeded toy token sources that emit traces with their exact conditionals.
 *
 * Variants:
 *  - Iid:             every token from one fixed distribution.
 *  - IndependentSeq:  token n from schedule[(n-1) mod len], independent of history.
 *  - ContextTree:     token n from a table indexed by the last min(n-1, depth)
 *                     tokens; tables are complete for every context.
 *  - GrammarFiltered: whole strings drawn from an inner source and redrawn
 *                     until a DFA accepts them (up to max_attempts).
 *
 * Sampling is inverse-CDF over the id-sorted support using one Xoshiro256
 * stream seeded from the caller's seed, so traces are a pure function of
 * (source, n, seed).
 *
 * JSON form (the schema documented in README.md):
 *   {"type":"iid","ids":[0,1],"probs":[0.25,0.75]}
 *   {"type":"independent_seq","schedule":[{"ids":[..],"probs":[..]}, ...]}
 *   {"type":"context_tree","alphabet_size":3,"depth":2,"seed":7,"sharpness":1.0}
 *   {"type":"context_tree","alphabet_size":3,"depth":1,"weights":[[..],[..],..]}
 *   {"type":"grammar_filtered","inner":{...},"grammar":{...},"max_attempts":1000}
 */

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "typlab/distribution.hpp"
#include "typlab/grammar.hpp"
#include "typlab/rng.hpp"
#include "typlab/trace.hpp"

namespace typlab {

/// Anything that can state its next-token distribution given the history.
class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;
  virtual std::uint32_t alphabet_size() const = 0;
  virtual const Distribution& conditional(std::span<const TokenId> history) const = 0;
};

struct IidSource {
  Distribution dist;
};

struct IndependentSeqSource {
  std::vector<Distribution> schedule;
};

class ContextTreeSource {
 public:
  static constexpr std::uint32_t kMaxAlphabet = 16;
  static constexpr std::uint32_t kMaxDepth = 4;

  /// Table entries are Exp(1)^sharpness weights drawn in table order from a
  /// Xoshiro256 stream seeded with `seed`, normalized and floored.
  static ContextTreeSource generate(std::uint32_t alphabet_size, std::uint32_t depth,
                                    std::uint64_t seed, double sharpness = 1.0);

  /// Explicit table of unnormalized weights, one row of `alphabet_size`
  /// weights per context, in table order. Zero weights are allowed.
  static ContextTreeSource from_weights(std::uint32_t alphabet_size, std::uint32_t depth,
                                        const std::vector<std::vector<double>>& weights);

  std::uint32_t alphabet_size() const noexcept { return alphabet_size_; }
  std::uint32_t depth() const noexcept { return depth_; }
  std::optional<std::uint64_t> construction_seed() const noexcept { return seed_; }
  double sharpness() const noexcept { return sharpness_; }
  const std::vector<Distribution>& table() const noexcept { return table_; }

  /// Number of contexts: sum_{k=0..depth} V^k.
  static std::size_t table_size(std::uint32_t alphabet_size, std::uint32_t depth);
  /// Table slot for the last min(|history|, depth) tokens; the oldest token
  /// is the most significant base-V digit.
  std::size_t context_index(std::span<const TokenId> history) const;
  const Distribution& lookup(std::span<const TokenId> history) const {
    return table_[context_index(history)];
  }

 private:
  ContextTreeSource(std::uint32_t v, std::uint32_t d, std::optional<std::uint64_t> seed, double sharp,
                    std::vector<Distribution> table)
      : alphabet_size_(v), depth_(d), seed_(seed), sharpness_(sharp), table_(std::move(table)) {}

  std::uint32_t alphabet_size_;
  std::uint32_t depth_;
  std::optional<std::uint64_t> seed_;
  double sharpness_;
  std::vector<Distribution> table_;
};

class SourceSpec;

struct GrammarFilteredSource {
  std::shared_ptr<const SourceSpec> inner;
  Grammar grammar;
  std::uint32_t max_attempts = 1;
};

class SourceSpec final : public ConditionalModel {
 public:
  using Variant = std::variant<IidSource, IndependentSeqSource, ContextTreeSource, GrammarFilteredSource>;

  SourceSpec(IidSource s);
  SourceSpec(IndependentSeqSource s);
  SourceSpec(ContextTreeSource s);
  SourceSpec(GrammarFilteredSource s);

  static SourceSpec iid(Distribution d) { return SourceSpec(IidSource{std::move(d)}); }
  static SourceSpec grammar_filtered(SourceSpec inner, Grammar grammar, std::uint32_t max_attempts);

  const Variant& variant() const noexcept { return variant_; }
  bool is_grammar_filtered() const noexcept {
    return std::holds_alternative<GrammarFilteredSource>(variant_);
  }

  std::uint32_t alphabet_size() const override;
  /// Throws Error{UnsupportedModel} for GrammarFiltered (its conditionals are
  /// those of the inner source, renormalized by rejection over whole strings).
  const Distribution& conditional(std::span<const TokenId> history) const override;

  /// Source whose conditionals a GrammarFiltered source records (itself otherwise).
  const SourceSpec& recording_source() const noexcept;

  std::string describe() const;

 private:
  Variant variant_;
};

/// Draws one token by inverse CDF over the id-sorted support.
TokenId sample_token(const Distribution& d, Xoshiro256& rng) noexcept;

/// Length-n trace. Deterministic in (source, n, seed). Throws
/// Error{InvalidArgument} for n == 0 and Error{MaxAttemptsExceeded} from
/// GrammarFiltered sources.
Trace sample_trace(const SourceSpec& source, std::uint64_t n, std::uint64_t seed);

struct FilteredSample {
  Trace trace;
  std::uint32_t attempts = 0;
};

/// Whole-string rejection: redraw from the inner source until the grammar
/// accepts. The trace records the inner source's conditionals.
FilteredSample grammar_filtered_sample(const SourceSpec& source, std::uint64_t n, std::uint64_t seed);

/// Independent-token model whose step-n distribution is the trace's step-n
/// distribution. Throws Error{EmptyTrace}.
SourceSpec auxiliary_from_trace(std::span<const TraceStep> steps);

SourceSpec source_from_json(const nlohmann::json& j);
nlohmann::ordered_json source_to_json(const SourceSpec& s);
/// Inline JSON text or a path to a JSON file.
SourceSpec resolve_source(const std::string& spec);

}  // namespace typlab
