#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file trace.hpp
 * @brief Token-probability traces: NDJSON format, streaming I/O, prefix series.
 *
 * A trace is one header line followed by one line per generation step:
 *
 *   {"type":"header","version":1,"source_kind":"simulated","model_label":"...",
 *    "top_k":null,"seed":7,"prompt_token_count":0,"alphabet_size":3}
 *   {"type":"step","index":1,"chosen_id":2,"chosen_prob":0.5,"ids":[0,2],"probs":[0.5,0.5]}
 *
 * Step indices start at 1 and are consecutive. `probs` are post-renormalization
 * and written with 17 significant digits, so a write/read cycle is lossless.
 *
 * For a prefix of length N the series carries
 *   l(N)   = -(1/N) sum log2 chosen_prob_n         (log-perplexity)
 *   h(N)   =  (1/N) sum H(p_n)                      (empirical entropy)
 *   lam(N) =  (1/N) sqrt(sum lambda(p_n)^2)         (log-deviation)
 */

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "typlab/distribution.hpp"
#include "typlab/numeric.hpp"

namespace typlab {

enum class SourceKind { ProbeGenerate, ProbeScore, Simulated };

std::string_view to_string(SourceKind kind) noexcept;
std::optional<SourceKind> parse_source_kind(std::string_view text) noexcept;

struct TraceHeader {
  int version = 1;
  SourceKind source_kind = SourceKind::Simulated;
  std::string model_label;
  std::optional<std::uint32_t> top_k;
  std::optional<std::uint64_t> seed;
  std::uint64_t prompt_token_count = 0;
  std::optional<std::uint32_t> alphabet_size;

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct TraceStep {
  std::uint64_t index = 0;  ///< 1-based
  TokenId chosen_id = 0;
  double chosen_prob = 0.0;  ///< dist.prob(chosen_id)
  Distribution dist;
};

/// Step whose chosen_prob is read off `dist`. Throws Error{ChosenNotInSupport}.
TraceStep make_step(std::uint64_t index, TokenId chosen_id, Distribution dist);

struct Trace {
  TraceHeader header;
  std::vector<TraceStep> steps;
};

/// Streaming reader. The header is read and validated on construction; steps
/// are validated one by one as `next()` pulls them, in constant memory.
class TraceReader {
 public:
  explicit TraceReader(std::istream& in);

  const TraceHeader& header() const noexcept { return header_; }
  std::optional<TraceStep> next();
  std::uint64_t line_number() const noexcept { return line_; }

 private:
  bool next_line(std::string& out);

  std::istream& in_;
  TraceHeader header_;
  std::uint64_t line_ = 0;
  std::uint64_t last_index_ = 0;
};

Trace read_trace(std::istream& in);

class TraceWriter {
 public:
  TraceWriter(std::ostream& out, const TraceHeader& header);

  void write(const TraceStep& step);
  std::uint64_t count() const noexcept { return count_; }

 private:
  std::ostream& out_;
  std::string buffer_;
  std::uint64_t count_ = 0;
};

/// Writes header + steps, returns the number of steps written.
/// Throws Error{SinkFailure} when the stream goes bad.
std::uint64_t write_trace(const TraceHeader& header, std::span<const TraceStep> steps,
                          std::ostream& out);

std::string header_to_json_line(const TraceHeader& header);
std::string step_to_json_line(const TraceStep& step);

// ---------------------------------------------------------------------------
// Prefix statistics
// ---------------------------------------------------------------------------

struct PrefixPoint {
  std::uint64_t n = 0;
  double l = 0.0;
  double h = 0.0;
  double lam = 0.0;
};

/// Single-pass accumulator of the (l, h, lam) prefix series.
class PrefixAccumulator {
 public:
  void add(double chosen_prob, const DistStats& stats) noexcept {
    surprisal_.add(typlab::surprisal(chosen_prob));
    entropy_.add(stats.entropy);
    lambda_sq_.add(stats.log_deviation * stats.log_deviation);
    ++n_;
  }
  void add(const TraceStep& step) noexcept { add(step.chosen_prob, step.dist.stats()); }

  std::uint64_t count() const noexcept { return n_; }
  /// Series value at the current length. Requires count() > 0.
  PrefixPoint current() const noexcept;

 private:
  KahanSum surprisal_;
  KahanSum entropy_;
  KahanSum lambda_sq_;
  std::uint64_t n_ = 0;
};

/// Series at N = stride, 2*stride, ... plus the final N. Throws Error{EmptyTrace}.
std::vector<PrefixPoint> prefix_stats(std::span<const TraceStep> steps, std::uint64_t stride = 1);

/// Value at the full length only. Throws Error{EmptyTrace}.
PrefixPoint final_stats(std::span<const TraceStep> steps);

// CSV: N,l,h,lam,h_minus_lam,h_plus_lam,h_minus_2lam,h_plus_2lam
void write_prefix_csv_header(std::ostream& out);
void write_prefix_csv_row(std::ostream& out, const PrefixPoint& p);
void write_prefix_csv(std::ostream& out, std::span<const PrefixPoint> series);
/// Last data row of a prefix CSV. Throws Error{MalformedRecord} / Error{EmptyTrace}.
PrefixPoint read_prefix_csv_last(std::istream& in);

}  // namespace typlab
