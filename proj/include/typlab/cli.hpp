#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file cli.hpp
 * @brief Command-line driver.
 *
 *   typlab simulate   --source S --n N [--seed K] [-o trace.ndjson]
 *   typlab analyze    [-i trace.ndjson] [--stride K] [-o prefix.csv]
 *   typlab classify   [-i trace.ndjson|prefix.csv] [--c C] [-o report.json]
 *   typlab score      --source S [-i tokens|trace] [--stride K] [-o prefix.csv]
 *   typlab enumerate  --source S --n N [--n-max M] [--grammar G] [--eps E] [--csv F]
 *   typlab verify     --source S --n N [--n-max M] [--grammar G] [--eps E] [--csv F]
 *   typlab export-csv [-i report.json] [-o table.csv]
 *
 * Every command also takes --config FILE (a JSON object with the same keys as
 * the long flags, '-' replaced by '_'); flags given on the command line win.
 * `typlab --config FILE` alone runs the file's "command". "-" means stdin or
 * stdout. Logs go to stderr, one line per stage, unless --quiet.
 *
 * Exit codes: 0 success / typical, 10 under-typical, 11 over-typical,
 * 12 a non-rigorous bound failed (verify), 64 usage or configuration error,
 * 65 invalid data, 66 missing input, 70 internal inconsistency (a rigorous
 * bound failed), 74 output failure.
 */

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace typlab {

inline constexpr int kExitUsage = 64;
inline constexpr int kExitData = 65;
inline constexpr int kExitNoInput = 66;
inline constexpr int kExitInternal = 70;
inline constexpr int kExitIo = 74;
inline constexpr int kExitNonRigorousBound = 12;

struct RunConfig {
  std::string command;
  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<std::string> csv;
  std::optional<std::string> source;   ///< path or inline JSON
  std::optional<std::string> grammar;  ///< builtin name, path or inline JSON
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> n_max;
  std::optional<std::uint64_t> seed;
  std::optional<double> eps;
  std::optional<double> c;
  std::optional<double> delta_g;
  std::optional<std::uint64_t> stride;
  std::optional<std::uint64_t> cap;
  std::optional<std::vector<double>> alphas;
  std::optional<bool> records;
  std::optional<bool> quiet;
};

/// Reads a config object. Throws Error{ConfigError} on unknown keys or bad types.
RunConfig config_from_json(const nlohmann::json& j);

/// Fields set in `overrides` replace those in `base`.
RunConfig merge_config(RunConfig base, const RunConfig& overrides);

/// Runs a fully merged configuration. Streams stand in for "-".
int run(const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& err);

/// Parses argv, merges any --config file and runs. Never throws.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace typlab
