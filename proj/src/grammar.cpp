// SPDX-License-Identifier: Apache-2.0

#include "typlab/grammar.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "typlab/error.hpp"

namespace typlab {

Grammar::Grammar(std::uint32_t alphabet_size, State start,
                 std::vector<std::vector<State>> transitions, std::vector<bool> accepting,
                 std::string description)
    : alphabet_size_(alphabet_size),
      start_(start),
      transitions_(std::move(transitions)),
      accepting_(std::move(accepting)),
      description_(std::move(description)) {
  if (alphabet_size_ == 0) throw Error(ErrorCode::InvalidArgument, "grammar alphabet is empty");
  if (accepting_.empty()) throw Error(ErrorCode::InvalidArgument, "grammar has no states");
  if (transitions_.size() != accepting_.size()) {
    throw Error(ErrorCode::InvalidArgument, "transition table and accepting flags differ in size");
  }
  if (start_ >= num_states()) throw Error(ErrorCode::InvalidArgument, "start state out of range");
  for (std::size_t s = 0; s < transitions_.size(); ++s) {
    if (transitions_[s].size() != alphabet_size_) {
      throw Error(ErrorCode::InvalidArgument,
                  "state " + std::to_string(s) + " lacks transitions for some tokens");
    }
    for (State t : transitions_[s]) {
      if (t >= num_states()) {
        throw Error(ErrorCode::InvalidArgument,
                    "state " + std::to_string(s) + " transitions to unknown state " + std::to_string(t));
      }
    }
  }
}

Grammar Grammar::accept_all(std::uint32_t alphabet_size) {
  return Grammar(alphabet_size, 0, {std::vector<State>(alphabet_size, 0)}, {true}, "accept_all");
}

Grammar Grammar::no_repeat(std::uint32_t alphabet_size) {
  // state 0: start, state 1+y: last token was y, state V+1: dead
  const State dead = alphabet_size + 1;
  std::vector<std::vector<State>> t(alphabet_size + 2, std::vector<State>(alphabet_size, dead));
  for (TokenId y = 0; y < alphabet_size; ++y) t[0][y] = 1 + y;
  for (TokenId prev = 0; prev < alphabet_size; ++prev) {
    for (TokenId y = 0; y < alphabet_size; ++y) {
      if (y != prev) t[1 + prev][y] = 1 + y;
    }
  }
  std::vector<bool> acc(alphabet_size + 2, true);
  acc[dead] = false;
  return Grammar(alphabet_size, 0, std::move(t), std::move(acc), "no_repeat");
}

bool Grammar::accepts(std::span<const TokenId> tokens) const noexcept {
  State s = start_;
  for (TokenId y : tokens) {
    if (y >= alphabet_size_) return false;
    s = transitions_[s][y];
  }
  return accepting_[s];
}

std::optional<std::uint32_t> Grammar::first_empty_length() const {
  std::vector<bool> current(num_states(), false);
  current[start_] = true;
  std::set<std::vector<bool>> seen;
  for (std::uint32_t n = 1;; ++n) {
    std::vector<bool> next_set(num_states(), false);
    for (State s = 0; s < num_states(); ++s) {
      if (!current[s]) continue;
      for (State t : transitions_[s]) next_set[t] = true;
    }
    bool any_accepting = false;
    for (State s = 0; s < num_states(); ++s) any_accepting = any_accepting || (next_set[s] && accepting_[s]);
    if (!any_accepting) return n;
    // Reachable sets evolve deterministically, so a repeat means a cycle of
    // lengths that all have accepting strings.
    if (!seen.insert(next_set).second) return std::nullopt;
    current = std::move(next_set);
  }
}

void Grammar::require_nonempty_lengths() const {
  if (auto n = first_empty_length()) {
    throw Error(ErrorCode::EmptyLanguageAtLengthN,
                "grammar " + description_ + " accepts no string of length " + std::to_string(*n));
  }
}

Grammar grammar_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "grammar must be a JSON object");
    const auto v = j.at("alphabet_size").get<std::uint32_t>();
    if (j.contains("builtin")) {
      const auto name = j.at("builtin").get<std::string>();
      if (name == "no_repeat" || name == "norepeat") return Grammar::no_repeat(v);
      if (name == "accept_all" || name == "acceptall") return Grammar::accept_all(v);
      throw Error(ErrorCode::InvalidArgument, "unknown builtin grammar " + name);
    }
    auto transitions = j.at("transitions").get<std::vector<std::vector<Grammar::State>>>();
    auto accepting = j.at("accepting").get<std::vector<bool>>();
    return Grammar(v, j.value("start", 0u), std::move(transitions), std::move(accepting),
                   j.value("description", std::string("dfa")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("grammar JSON: ") + e.what());
  }
}

nlohmann::ordered_json grammar_to_json(const Grammar& g) {
  nlohmann::ordered_json j;
  j["description"] = g.description();
  j["alphabet_size"] = g.alphabet_size();
  j["start"] = g.start();
  j["transitions"] = g.transitions();
  j["accepting"] = g.accepting_states();
  return j;
}

Grammar resolve_grammar(const std::string& spec, std::uint32_t alphabet_size) {
  if (spec == "norepeat" || spec == "no_repeat") return Grammar::no_repeat(alphabet_size);
  if (spec == "acceptall" || spec == "accept_all") return Grammar::accept_all(alphabet_size);
  const auto first = spec.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && spec[first] == '{') {
    try {
      return grammar_from_json(nlohmann::json::parse(spec));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigError, std::string("inline grammar: ") + e.what());
    }
  }
  if (!std::filesystem::exists(spec)) throw Error(ErrorCode::InputNotFound, "grammar file " + spec);
  std::ifstream in(spec);
  try {
    return grammar_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "grammar file " + spec + ": " + e.what());
  }
}

}  // namespace typlab
