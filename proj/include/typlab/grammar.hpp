#pragma once

// SPDX-License-Identifier: Apache-2.0

// Grammars as complete DFAs over token ids 0..alphabet_size-1. A string is
// grammatical iff the DFA ends in an accepting state after reading it.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "typlab/distribution.hpp"

namespace typlab {

class Grammar {
 public:
  using State = std::uint32_t;

  /// `transitions[s][y]` is the successor of state s on token y. Throws
  /// Error{InvalidArgument} unless the transition function is total.
  Grammar(std::uint32_t alphabet_size, State start, std::vector<std::vector<State>> transitions,
          std::vector<bool> accepting, std::string description);

  /// Every string is grammatical.
  static Grammar accept_all(std::uint32_t alphabet_size);
  /// No token may immediately repeat the previous one.
  static Grammar no_repeat(std::uint32_t alphabet_size);

  std::uint32_t alphabet_size() const noexcept { return alphabet_size_; }
  std::uint32_t num_states() const noexcept { return static_cast<std::uint32_t>(accepting_.size()); }
  State start() const noexcept { return start_; }
  State next(State s, TokenId token) const noexcept { return transitions_[s][token]; }
  bool accepting(State s) const noexcept { return accepting_[s]; }
  const std::string& description() const noexcept { return description_; }
  const std::vector<std::vector<State>>& transitions() const noexcept { return transitions_; }
  const std::vector<bool>& accepting_states() const noexcept { return accepting_; }

  /// False for tokens outside the alphabet.
  bool accepts(std::span<const TokenId> tokens) const noexcept;

  /// Smallest n >= 1 with no accepted string of length n, if any. Exact: the
  /// set of states reachable in exactly n steps is iterated until it cycles.
  std::optional<std::uint32_t> first_empty_length() const;

  /// Throws Error{EmptyLanguageAtLengthN} when some length has no accepted string.
  void require_nonempty_lengths() const;

 private:
  std::uint32_t alphabet_size_;
  State start_;
  std::vector<std::vector<State>> transitions_;
  std::vector<bool> accepting_;
  std::string description_;
};

/// Parses either {"builtin":"no_repeat"|"accept_all","alphabet_size":V} or an
/// explicit {"alphabet_size","start","transitions","accepting","description"}.
Grammar grammar_from_json(const nlohmann::json& j);
nlohmann::ordered_json grammar_to_json(const Grammar& g);

/// Resolves a CLI grammar argument: builtin name ("norepeat", "no_repeat",
/// "acceptall", "accept_all"), inline JSON text, or a path to a JSON file.
Grammar resolve_grammar(const std::string& spec, std::uint32_t alphabet_size);

}  // namespace typlab
