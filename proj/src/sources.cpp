// SPDX-License-Identifier: Apache-2.0

#include "typlab/sources.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "typlab/error.hpp"

namespace typlab {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

Distribution dist_from_json(const json& j) {
  const auto ids = j.at("ids").get<std::vector<TokenId>>();
  std::vector<double> probs;
  if (j.contains("probs")) {
    probs = j.at("probs").get<std::vector<double>>();
  } else {
    probs = j.at("weights").get<std::vector<double>>();
  }
  return validate_distribution(ids, probs);
}

ojson dist_to_json(const Distribution& d) {
  ojson j;
  j["ids"] = std::vector<TokenId>(d.ids().begin(), d.ids().end());
  j["probs"] = std::vector<double>(d.probs().begin(), d.probs().end());
  return j;
}

std::uint64_t checked_pow(std::uint64_t base, std::uint32_t exp) {
  std::uint64_t r = 1;
  for (std::uint32_t i = 0; i < exp; ++i) r *= base;
  return r;
}

void sample_steps(const SourceSpec& source, std::uint64_t n, Xoshiro256& rng,
                  std::vector<TraceStep>& steps, std::vector<TokenId>& tokens) {
  steps.clear();
  tokens.clear();
  steps.reserve(n);
  tokens.reserve(n);
  for (std::uint64_t i = 1; i <= n; ++i) {
    const Distribution& d = source.conditional(tokens);
    const TokenId y = sample_token(d, rng);
    steps.push_back(make_step(i, y, d));
    tokens.push_back(y);
  }
}

TraceHeader simulated_header(const SourceSpec& source, std::uint64_t seed) {
  TraceHeader h;
  h.source_kind = SourceKind::Simulated;
  h.model_label = source.describe();
  h.seed = seed;
  h.prompt_token_count = 0;
  h.alphabet_size = source.alphabet_size();
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// ContextTree
// ---------------------------------------------------------------------------

std::size_t ContextTreeSource::table_size(std::uint32_t alphabet_size, std::uint32_t depth) {
  std::size_t total = 0;
  for (std::uint32_t k = 0; k <= depth; ++k) total += checked_pow(alphabet_size, k);
  return total;
}

std::size_t ContextTreeSource::context_index(std::span<const TokenId> history) const {
  const std::size_t k = std::min<std::size_t>(history.size(), depth_);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < k; ++j) offset += checked_pow(alphabet_size_, static_cast<std::uint32_t>(j));
  std::size_t code = 0;
  for (std::size_t i = history.size() - k; i < history.size(); ++i) {
    code = code * alphabet_size_ + history[i];
  }
  return offset + code;
}

namespace {

void check_tree_shape(std::uint32_t v, std::uint32_t d) {
  if (v < 1 || v > ContextTreeSource::kMaxAlphabet) {
    throw Error(ErrorCode::InvalidArgument, "context tree alphabet size must be in 1..16");
  }
  if (d > ContextTreeSource::kMaxDepth) {
    throw Error(ErrorCode::InvalidArgument, "context tree depth must be <= 4");
  }
}

}  // namespace

ContextTreeSource ContextTreeSource::generate(std::uint32_t alphabet_size, std::uint32_t depth,
                                              std::uint64_t seed, double sharpness) {
  check_tree_shape(alphabet_size, depth);
  if (!std::isfinite(sharpness) || sharpness < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "sharpness must be finite and >= 0");
  }
  Xoshiro256 rng(seed);
  const std::size_t size = table_size(alphabet_size, depth);
  std::vector<Distribution> table;
  table.reserve(size);
  std::vector<TokenId> ids(alphabet_size);
  for (TokenId y = 0; y < alphabet_size; ++y) ids[y] = y;
  std::vector<double> w(alphabet_size);
  for (std::size_t c = 0; c < size; ++c) {
    for (auto& x : w) x = std::pow(rng.exponential(), sharpness);
    table.push_back(validate_distribution(ids, w));
  }
  return ContextTreeSource(alphabet_size, depth, seed, sharpness, std::move(table));
}

ContextTreeSource ContextTreeSource::from_weights(std::uint32_t alphabet_size, std::uint32_t depth,
                                                  const std::vector<std::vector<double>>& weights) {
  check_tree_shape(alphabet_size, depth);
  const std::size_t size = table_size(alphabet_size, depth);
  if (weights.size() != size) {
    throw Error(ErrorCode::InvalidArgument, "context tree needs " + std::to_string(size) +
                                                " weight rows, got " + std::to_string(weights.size()));
  }
  std::vector<TokenId> ids(alphabet_size);
  for (TokenId y = 0; y < alphabet_size; ++y) ids[y] = y;
  std::vector<Distribution> table;
  table.reserve(size);
  for (const auto& row : weights) {
    if (row.size() != alphabet_size) {
      throw Error(ErrorCode::InvalidArgument, "context tree weight row has wrong length");
    }
    table.push_back(validate_distribution(ids, row));
  }
  return ContextTreeSource(alphabet_size, depth, std::nullopt, 1.0, std::move(table));
}

// ---------------------------------------------------------------------------
// SourceSpec
// ---------------------------------------------------------------------------

SourceSpec::SourceSpec(IidSource s) : variant_(std::move(s)) {}

SourceSpec::SourceSpec(IndependentSeqSource s) : variant_(std::move(s)) {
  if (std::get<IndependentSeqSource>(variant_).schedule.empty()) {
    throw Error(ErrorCode::InvalidArgument, "independent-sequence schedule is empty");
  }
}

SourceSpec::SourceSpec(ContextTreeSource s) : variant_(std::move(s)) {}

SourceSpec::SourceSpec(GrammarFilteredSource s) : variant_(std::move(s)) {
  const auto& gf = std::get<GrammarFilteredSource>(variant_);
  if (!gf.inner) throw Error(ErrorCode::InvalidArgument, "grammar-filtered source has no inner source");
  if (gf.max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
  if (gf.grammar.alphabet_size() < gf.inner->alphabet_size()) {
    throw Error(ErrorCode::InvalidArgument, "grammar alphabet is smaller than the source alphabet");
  }
  gf.grammar.require_nonempty_lengths();
}

SourceSpec SourceSpec::grammar_filtered(SourceSpec inner, Grammar grammar, std::uint32_t max_attempts) {
  return SourceSpec(GrammarFilteredSource{std::make_shared<const SourceSpec>(std::move(inner)),
                                          std::move(grammar), max_attempts});
}

std::uint32_t SourceSpec::alphabet_size() const {
  struct Visitor {
    std::uint32_t operator()(const IidSource& s) const { return s.dist.max_id() + 1; }
    std::uint32_t operator()(const IndependentSeqSource& s) const {
      TokenId m = 0;
      for (const auto& d : s.schedule) m = std::max(m, d.max_id());
      return m + 1;
    }
    std::uint32_t operator()(const ContextTreeSource& s) const { return s.alphabet_size(); }
    std::uint32_t operator()(const GrammarFilteredSource& s) const { return s.inner->alphabet_size(); }
  };
  return std::visit(Visitor{}, variant_);
}

const Distribution& SourceSpec::conditional(std::span<const TokenId> history) const {
  struct Visitor {
    std::span<const TokenId> history;
    const Distribution& operator()(const IidSource& s) const { return s.dist; }
    const Distribution& operator()(const IndependentSeqSource& s) const {
      return s.schedule[history.size() % s.schedule.size()];
    }
    const Distribution& operator()(const ContextTreeSource& s) const { return s.lookup(history); }
    const Distribution& operator()(const GrammarFilteredSource&) const {
      throw Error(ErrorCode::UnsupportedModel,
                  "grammar-filtered sources have no per-token conditionals");
    }
  };
  return std::visit(Visitor{history}, variant_);
}

const SourceSpec& SourceSpec::recording_source() const noexcept {
  if (const auto* gf = std::get_if<GrammarFilteredSource>(&variant_)) return gf->inner->recording_source();
  return *this;
}

std::string SourceSpec::describe() const {
  struct Visitor {
    std::string operator()(const IidSource& s) const {
      return "iid(support=" + std::to_string(s.dist.size()) + ")";
    }
    std::string operator()(const IndependentSeqSource& s) const {
      return "independent_seq(period=" + std::to_string(s.schedule.size()) + ")";
    }
    std::string operator()(const ContextTreeSource& s) const {
      std::string out = "context_tree(V=" + std::to_string(s.alphabet_size()) +
                        ",d=" + std::to_string(s.depth());
      if (s.construction_seed()) {
        out += ",seed=" + std::to_string(*s.construction_seed()) +
               ",sharpness=" + format_double(s.sharpness());
      } else {
        out += ",explicit";
      }
      return out + ")";
    }
    std::string operator()(const GrammarFilteredSource& s) const {
      return "grammar_filtered(" + s.grammar.description() + "," + s.inner->describe() + ")";
    }
  };
  return std::visit(Visitor{}, variant_);
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

TokenId sample_token(const Distribution& d, Xoshiro256& rng) noexcept {
  const double u = rng.uniform();
  const auto probs = d.probs();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return d.ids()[i];
  }
  return d.ids().back();
}

Trace sample_trace(const SourceSpec& source, std::uint64_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "trace length must be >= 1");
  if (source.is_grammar_filtered()) return grammar_filtered_sample(source, n, seed).trace;
  Xoshiro256 rng(seed);
  Trace trace{simulated_header(source, seed), {}};
  std::vector<TokenId> tokens;
  sample_steps(source, n, rng, trace.steps, tokens);
  return trace;
}

FilteredSample grammar_filtered_sample(const SourceSpec& source, std::uint64_t n, std::uint64_t seed) {
  const auto* gf = std::get_if<GrammarFilteredSource>(&source.variant());
  if (!gf) throw Error(ErrorCode::UnsupportedModel, "source is not grammar-filtered");
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "trace length must be >= 1");

  Xoshiro256 rng(seed);
  FilteredSample out{Trace{simulated_header(source, seed), {}}, 0};
  std::vector<TokenId> tokens;
  for (std::uint32_t attempt = 1; attempt <= gf->max_attempts; ++attempt) {
    if (gf->inner->is_grammar_filtered()) {
      // Nested filters: the inner draw is itself a complete accepted string.
      auto inner = grammar_filtered_sample(*gf->inner, n, rng());
      out.trace.steps = std::move(inner.trace.steps);
      tokens.clear();
      for (const auto& s : out.trace.steps) tokens.push_back(s.chosen_id);
    } else {
      sample_steps(*gf->inner, n, rng, out.trace.steps, tokens);
    }
    if (gf->grammar.accepts(tokens)) {
      out.attempts = attempt;
      return out;
    }
  }
  throw Error(ErrorCode::MaxAttemptsExceeded,
              "no grammatical string of length " + std::to_string(n) + " in " +
                  std::to_string(gf->max_attempts) + " attempts");
}

SourceSpec auxiliary_from_trace(std::span<const TraceStep> steps) {
  if (steps.empty()) throw Error(ErrorCode::EmptyTrace, "auxiliary model of an empty trace");
  IndependentSeqSource aux;
  aux.schedule.reserve(steps.size());
  for (const auto& s : steps) aux.schedule.push_back(s.dist);
  return SourceSpec(std::move(aux));
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

SourceSpec source_from_json(const json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "source must be a JSON object");
    const auto type = j.at("type").get<std::string>();
    if (type == "iid") return SourceSpec(IidSource{dist_from_json(j)});
    if (type == "independent_seq") {
      IndependentSeqSource s;
      for (const auto& d : j.at("schedule")) s.schedule.push_back(dist_from_json(d));
      return SourceSpec(std::move(s));
    }
    if (type == "context_tree") {
      const auto v = j.at("alphabet_size").get<std::uint32_t>();
      const auto d = j.at("depth").get<std::uint32_t>();
      if (j.contains("weights")) {
        return SourceSpec(ContextTreeSource::from_weights(
            v, d, j.at("weights").get<std::vector<std::vector<double>>>()));
      }
      return SourceSpec(ContextTreeSource::generate(v, d, j.at("seed").get<std::uint64_t>(),
                                                    j.value("sharpness", 1.0)));
    }
    if (type == "grammar_filtered") {
      SourceSpec inner = source_from_json(j.at("inner"));
      json g = j.at("grammar");
      if (g.is_object() && !g.contains("alphabet_size")) g["alphabet_size"] = inner.alphabet_size();
      Grammar grammar = g.is_string() ? resolve_grammar(g.get<std::string>(), inner.alphabet_size())
                                      : grammar_from_json(g);
      return SourceSpec::grammar_filtered(std::move(inner), std::move(grammar),
                                          j.value("max_attempts", 1000u));
    }
    throw Error(ErrorCode::InvalidArgument, "unknown source type " + type);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("source JSON: ") + e.what());
  }
}

ojson source_to_json(const SourceSpec& s) {
  struct Visitor {
    ojson operator()(const IidSource& s) const {
      ojson j;
      j["type"] = "iid";
      j.update(dist_to_json(s.dist));
      return j;
    }
    ojson operator()(const IndependentSeqSource& s) const {
      ojson j;
      j["type"] = "independent_seq";
      j["schedule"] = ojson::array();
      for (const auto& d : s.schedule) j["schedule"].push_back(dist_to_json(d));
      return j;
    }
    ojson operator()(const ContextTreeSource& s) const {
      ojson j;
      j["type"] = "context_tree";
      j["alphabet_size"] = s.alphabet_size();
      j["depth"] = s.depth();
      if (s.construction_seed()) {
        j["seed"] = *s.construction_seed();
        j["sharpness"] = s.sharpness();
      } else {
        ojson rows = ojson::array();
        for (const auto& d : s.table()) {
          std::vector<double> row(s.alphabet_size(), 0.0);
          for (std::size_t i = 0; i < d.size(); ++i) row[d.ids()[i]] = d.probs()[i];
          rows.push_back(row);
        }
        j["weights"] = std::move(rows);
      }
      return j;
    }
    ojson operator()(const GrammarFilteredSource& s) const {
      ojson j;
      j["type"] = "grammar_filtered";
      j["inner"] = source_to_json(*s.inner);
      j["grammar"] = grammar_to_json(s.grammar);
      j["max_attempts"] = s.max_attempts;
      return j;
    }
  };
  return std::visit(Visitor{}, s.variant());
}

SourceSpec resolve_source(const std::string& spec) {
  const auto first = spec.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && spec[first] == '{') {
    try {
      return source_from_json(json::parse(spec));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, std::string("inline source: ") + e.what());
    }
  }
  if (!std::filesystem::exists(spec)) throw Error(ErrorCode::InputNotFound, "source file " + spec);
  std::ifstream in(spec);
  try {
    return source_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "source file " + spec + ": " + e.what());
  }
}

}  // namespace typlab
