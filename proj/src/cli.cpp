// SPDX-License-Identifier: Apache-2.0

#include "typlab/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "typlab/error.hpp"
#include "typlab/oracle.hpp"
#include "typlab/sources.hpp"
#include "typlab/trace.hpp"
#include "typlab/typicality.hpp"

namespace typlab {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

const std::vector<std::string> kCommands = {"simulate", "analyze", "classify", "score",
                                            "enumerate", "verify", "export-csv"};

class Log {
 public:
  Log(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  void operator()(const std::string& line) const {
    if (!quiet_) err_ << "typlab: " << line << '\n';
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

// Input stream for a path, or the caller's stream for "-".
class Input {
 public:
  Input(const std::string& path, std::istream& fallback) {
    if (path == "-") {
      stream_ = &fallback;
      return;
    }
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::InputNotFound, "input file " + path);
    file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file_) throw Error(ErrorCode::InputNotFound, "cannot open " + path);
    stream_ = file_.get();
  }
  std::istream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ifstream> file_;
  std::istream* stream_ = nullptr;
};

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path == "-") {
      stream_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw Error(ErrorCode::SinkFailure, "cannot open " + path + " for writing");
    stream_ = file_.get();
  }
  std::ostream& get() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw Error(ErrorCode::SinkFailure, "write to " + path_ + " failed");
  }

 private:
  std::string path_;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

int peek_nonspace(std::istream& in) {
  in >> std::ws;
  return in.peek();
}

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

template <typename T>
const T& require(const std::optional<T>& v, const char* flag, const std::string& command) {
  if (!v) config_error(command + " needs --" + std::string(flag));
  return *v;
}

std::uint32_t length_arg(std::uint64_t n, const char* flag) {
  if (n < 1) config_error(std::string("--") + flag + " must be >= 1");
  if (n > 64) config_error(std::string("--") + flag + " must be <= 64 for enumeration");
  return static_cast<std::uint32_t>(n);
}

std::uint64_t resolve_cap(const RunConfig& cfg, bool cap_from_flag) {
  if (cap_from_flag && cfg.cap) return *cfg.cap;
  if (const char* env = std::getenv("TYPLAB_CAP"); env && *env) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(env, &pos);
      if (pos != std::string(env).size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      config_error(std::string("TYPLAB_CAP is not an integer: ") + env);
    }
  }
  if (cfg.cap) return *cfg.cap;
  return kDefaultEnumerationCap;
}

void validate_ranges(const RunConfig& c) {
  if (c.n && *c.n < 1) config_error("--n must be >= 1");
  if (c.n_max && c.n && *c.n_max < *c.n) config_error("--n-max must be >= --n");
  if (c.eps && !(*c.eps > 0.0)) config_error("--eps must be > 0");
  if (c.c && !(*c.c > 0.0)) config_error("--c must be > 0");
  if (c.delta_g && !(*c.delta_g > 0.0)) config_error("--delta-g must be > 0");
  if (c.stride && *c.stride < 1) config_error("--stride must be >= 1");
  if (c.cap && *c.cap < 1) config_error("--cap must be >= 1");
  if (c.alphas) {
    for (double a : *c.alphas) {
      if (!(a > 0.0)) config_error("--alphas must all be > 0");
    }
  }
}

// ---------------------------------------------------------------------------
// Token input for `score`
// ---------------------------------------------------------------------------

std::vector<TokenId> read_tokens(std::istream& in) {
  const int first = peek_nonspace(in);
  if (first == '{') return trace_tokens(read_trace(in).steps);
  if (first == '[') {
    try {
      return json::parse(in).get<std::vector<TokenId>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, std::string("token array: ") + e.what());
    }
  }
  std::vector<TokenId> tokens;
  std::string word;
  while (in >> word) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), v);
    if (ec != std::errc() || ptr != word.data() + word.size() || v > 0xFFFFFFFFull) {
      throw Error(ErrorCode::MalformedRecord, "token '" + word + "' is not a non-negative integer");
    }
    tokens.push_back(static_cast<TokenId>(v));
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& c, std::ostream& out, const Log& log) {
  const SourceSpec source = resolve_source(require(c.source, "source", c.command));
  const auto n = require(c.n, "n", c.command);
  const auto seed = c.seed.value_or(0);
  log("simulate " + source.describe() + " n=" + std::to_string(n) + " seed=" + std::to_string(seed));
  const Trace trace = sample_trace(source, n, seed);
  Output o(c.output.value_or("-"), out);
  write_trace(trace.header, trace.steps, o.get());
  o.finish();
  log("wrote " + std::to_string(trace.steps.size()) + " steps");
  return 0;
}

int cmd_analyze(const RunConfig& c, std::istream& in, std::ostream& out, const Log& log) {
  Input i(c.input.value_or("-"), in);
  TraceReader reader(i.get());
  const std::uint64_t stride = c.stride.value_or(1);
  Output o(c.output.value_or("-"), out);
  write_prefix_csv_header(o.get());
  PrefixAccumulator acc;
  bool pending = false;
  while (auto step = reader.next()) {
    acc.add(*step);
    pending = acc.count() % stride != 0;
    if (!pending) write_prefix_csv_row(o.get(), acc.current());
  }
  if (acc.count() == 0) throw Error(ErrorCode::EmptyTrace, "trace has no steps");
  if (pending) write_prefix_csv_row(o.get(), acc.current());
  o.finish();
  log("analyzed " + std::to_string(acc.count()) + " steps");
  return 0;
}

int cmd_classify(const RunConfig& c, std::istream& in, std::ostream& out, const Log& log) {
  Input i(c.input.value_or("-"), in);
  PrefixPoint stats;
  if (peek_nonspace(i.get()) == '{') {
    TraceReader reader(i.get());
    PrefixAccumulator acc;
    while (auto step = reader.next()) acc.add(*step);
    if (acc.count() == 0) throw Error(ErrorCode::EmptyTrace, "trace has no steps");
    stats = acc.current();
  } else {
    stats = read_prefix_csv_last(i.get());
  }
  const auto report = classify(stats, c.c.value_or(kDefaultMultiplier));
  Output o(c.output.value_or("-"), out);
  o.get() << report_to_json(report).dump() << '\n';
  o.finish();
  log("classified N=" + std::to_string(report.n) + " as " + std::string(to_string(report.classification)));
  return exit_code(report.classification);
}

int cmd_score(const RunConfig& c, std::istream& in, std::ostream& out, const Log& log) {
  const SourceSpec scorer = resolve_source(require(c.source, "source", c.command));
  Input i(c.input.value_or("-"), in);
  const auto tokens = read_tokens(i.get());
  log("scoring " + std::to_string(tokens.size()) + " tokens under " + scorer.describe());
  const auto series = score_under_model(tokens, scorer, c.stride.value_or(1));
  Output o(c.output.value_or("-"), out);
  write_prefix_csv(o.get(), series);
  o.finish();
  return 0;
}

int cmd_oracle(const RunConfig& c, bool verify, std::ostream& out, const Log& log, std::uint64_t cap) {
  const SourceSpec source = resolve_source(require(c.source, "source", c.command));
  const auto n_lo = length_arg(require(c.n, "n", c.command), "n");
  const auto n_hi = c.n_max ? length_arg(*c.n_max, "n-max") : n_lo;
  const double eps = c.eps.value_or(0.25);
  const std::vector<double> alphas = c.alphas.value_or(std::vector<double>{1.5, 2.0, 3.0});

  // A grammar-filtered source is enumerated through its inner source; its
  // grammar is the default dictionary.
  const SourceSpec& model = source.recording_source();
  std::optional<Grammar> grammar;
  if (c.grammar) {
    grammar = resolve_grammar(*c.grammar, model.alphabet_size());
  } else if (const auto* gf = std::get_if<GrammarFilteredSource>(&source.variant())) {
    grammar = gf->grammar;
  } else {
    grammar = Grammar::accept_all(model.alphabet_size());
  }

  ojson doc;
  doc["command"] = c.command;
  doc["source"] = source_to_json(source);
  doc["grammar"] = grammar_to_json(*grammar);
  doc["eps"] = eps;
  doc["reports"] = ojson::array();

  std::unique_ptr<Output> csv;
  if (c.csv) {
    csv = std::make_unique<Output>(*c.csv, out);
    write_report_csv_header(csv->get());
  }

  bool rigorous_ok = true;
  bool all_ok = true;
  std::string failures;
  for (std::uint32_t n = n_lo; n <= n_hi; ++n) {
    log("enumerating n=" + std::to_string(n));
    EnumerationReport report = enumerate_strings(model, n, cap);
    build_sets(report, *grammar, eps, c.delta_g);
    if (verify) {
      verify_bounds(report);
      for (const auto& v : report.verdicts) {
        if (!v.applicable || v.holds) continue;
        all_ok = false;
        if (v.rigorous) rigorous_ok = false;
        failures += " n=" + std::to_string(n) + ":" + v.name;
      }
    }
    const auto variance = variance_decomposition(report, alphas);
    if (verify) {
      if (!variance.lemma_holds) {
        rigorous_ok = all_ok = false;
        failures += " n=" + std::to_string(n) + ":variance_decomposition";
      }
      for (const auto& ch : variance.chebyshev) {
        if (!ch.holds) {
          rigorous_ok = all_ok = false;
          failures += " n=" + std::to_string(n) + ":chebyshev(" + format_double(ch.alpha) + ")";
        }
      }
    }
    ojson entry = report_to_json(report, c.records.value_or(false));
    entry["variance"] = variance_to_json(variance);
    if (csv) write_report_csv_row(csv->get(), report);
    doc["reports"].push_back(std::move(entry));
  }

  Output o(c.output.value_or("-"), out);
  o.get() << doc.dump(2) << '\n';
  o.finish();
  if (csv) csv->finish();

  if (!verify) return 0;
  if (!rigorous_ok) {
    log("rigorous bound violated:" + failures);
    return kExitInternal;
  }
  if (!all_ok) {
    log("non-rigorous bound does not hold:" + failures);
    return kExitNonRigorousBound;
  }
  log("all bounds hold");
  return 0;
}

int cmd_export_csv(const RunConfig& c, std::istream& in, std::ostream& out, const Log& log) {
  Input i(c.input.value_or("-"), in);
  json doc;
  try {
    doc = json::parse(i.get());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("report JSON: ") + e.what());
  }
  const json reports = doc.contains("reports") ? doc["reports"] : json::array({doc});
  Output o(c.output.value_or("-"), out);
  write_report_csv_header(o.get());
  for (const auto& r : reports) write_report_csv_row(o.get(), r);
  o.finish();
  log("exported " + std::to_string(reports.size()) + " rows");
  return 0;
}

int exit_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    case ErrorCode::InputNotFound:
      return kExitNoInput;
    case ErrorCode::SinkFailure:
      return kExitIo;
    case ErrorCode::BoundViolated:
    case ErrorCode::NumericInconsistency:
      return kExitInternal;
    default:
      return kExitData;
  }
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

enum OptionSet : unsigned {
  kIn = 1u << 0,
  kOut = 1u << 1,
  kSource = 1u << 2,
  kLength = 1u << 3,
  kSeed = 1u << 4,
  kStride = 1u << 5,
  kMultiplier = 1u << 6,
  kOracle = 1u << 7,
};

template <typename T>
void bind_option(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void add_options(CLI::App* app, unsigned set, RunConfig& cli, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config file; flags override its values");
  app->add_flag_function("-q,--quiet", [&cli](std::int64_t) { cli.quiet = true; }, "No stage log on stderr");
  if (set & kIn) bind_option(app, "-i,--input", cli.input, "Input path, '-' for stdin");
  if (set & kOut) bind_option(app, "-o,--output", cli.output, "Output path, '-' for stdout");
  if (set & kSource) bind_option(app, "-s,--source", cli.source, "Source JSON file or inline JSON");
  if (set & kLength) bind_option(app, "-n,--n", cli.n, "String length");
  if (set & kSeed) bind_option(app, "--seed", cli.seed, "Sampling seed");
  if (set & kStride) bind_option(app, "--stride", cli.stride, "Emit every k-th prefix (the last one always)");
  if (set & kMultiplier) bind_option(app, "-c,--c", cli.c, "Threshold multiplier (default 3)");
  if (set & kOracle) {
    bind_option(app, "--n-max", cli.n_max, "Largest length of an n-range");
    bind_option(app, "-g,--grammar", cli.grammar, "norepeat, accept_all, grammar JSON file or inline JSON");
    bind_option(app, "--eps", cli.eps, "Typical-set width in bits (default 0.25)");
    bind_option(app, "--delta-g", cli.delta_g, "Entropy gap probe in bits (default: derived per n)");
    bind_option(app, "--cap", cli.cap, "Enumeration cap on V^n (default 1e8, env TYPLAB_CAP)");
    app->add_option_function<std::vector<double>>(
           "--alphas", [&cli](const std::vector<double>& v) { cli.alphas = v; },
           "Chebyshev multipliers (default 1.5 2 3)")
        ->delimiter(',');
    bind_option(app, "--csv", cli.csv, "Also write the per-n table here");
    app->add_flag_function("--records", [&cli](std::int64_t) { cli.records = true; },
                           "Include every string in the JSON report");
  }
}

RunConfig load_config_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::InputNotFound, "config file " + path);
  std::ifstream in(path);
  try {
    return config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    config_error("config file " + path + ": " + e.what());
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) config_error("config must be a JSON object");
  RunConfig c;
  auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command") {
        c.command = v.get<std::string>();
      } else if (key == "input") {
        c.input = v.get<std::string>();
      } else if (key == "output") {
        c.output = v.get<std::string>();
      } else if (key == "csv") {
        c.csv = v.get<std::string>();
      } else if (key == "source") {
        c.source = text(v);
      } else if (key == "grammar") {
        c.grammar = text(v);
      } else if (key == "n") {
        c.n = v.get<std::uint64_t>();
      } else if (key == "n_max") {
        c.n_max = v.get<std::uint64_t>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "eps") {
        c.eps = v.get<double>();
      } else if (key == "c") {
        c.c = v.get<double>();
      } else if (key == "delta_g") {
        c.delta_g = v.get<double>();
      } else if (key == "stride") {
        c.stride = v.get<std::uint64_t>();
      } else if (key == "cap") {
        c.cap = v.get<std::uint64_t>();
      } else if (key == "alphas") {
        c.alphas = v.get<std::vector<double>>();
      } else if (key == "records") {
        c.records = v.get<bool>();
      } else if (key == "quiet") {
        c.quiet = v.get<bool>();
      } else {
        config_error("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    config_error(std::string("config value: ") + e.what());
  }
  return c;
}

RunConfig merge_config(RunConfig base, const RunConfig& o) {
  if (!o.command.empty()) base.command = o.command;
  auto take = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  take(base.input, o.input);
  take(base.output, o.output);
  take(base.csv, o.csv);
  take(base.source, o.source);
  take(base.grammar, o.grammar);
  take(base.n, o.n);
  take(base.n_max, o.n_max);
  take(base.seed, o.seed);
  take(base.eps, o.eps);
  take(base.c, o.c);
  take(base.delta_g, o.delta_g);
  take(base.stride, o.stride);
  take(base.cap, o.cap);
  take(base.alphas, o.alphas);
  take(base.records, o.records);
  take(base.quiet, o.quiet);
  return base;
}

namespace {

int run_impl(const RunConfig& c, bool cap_from_flag, std::istream& in, std::ostream& out, std::ostream& err) {
  const Log log(err, c.quiet.value_or(false));
  try {
    validate_ranges(c);
    if (c.command == "simulate") return cmd_simulate(c, out, log);
    if (c.command == "analyze") return cmd_analyze(c, in, out, log);
    if (c.command == "classify") return cmd_classify(c, in, out, log);
    if (c.command == "score") return cmd_score(c, in, out, log);
    if (c.command == "enumerate") return cmd_oracle(c, false, out, log, resolve_cap(c, cap_from_flag));
    if (c.command == "verify") return cmd_oracle(c, true, out, log, resolve_cap(c, cap_from_flag));
    if (c.command == "export-csv") return cmd_export_csv(c, in, out, log);
    config_error(c.command.empty() ? "no command given" : "unknown command '" + c.command + "'");
  } catch (const Error& e) {
    err << "typlab: error: " << e.what() << '\n';
    return exit_for(e.code());
  } catch (const std::exception& e) {
    err << "typlab: error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace

int run(const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& err) {
  return run_impl(config, false, in, out, err);
}

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Typicality lab: traces, typical sets and exact bound checks", "typlab"};
  app.require_subcommand(0, 1);
  RunConfig cli;
  std::string top_config;
  app.add_option("--config", top_config, "JSON config file naming its own command");
  std::vector<std::string> sub_configs(kCommands.size());
  const std::vector<unsigned> sets = {
      kSource | kLength | kSeed | kOut,
      kIn | kOut | kStride,
      kIn | kOut | kMultiplier,
      kSource | kIn | kOut | kStride,
      kSource | kLength | kOracle | kOut,
      kSource | kLength | kOracle | kOut,
      kIn | kOut,
  };
  const std::vector<std::string> help = {
      "Sample a trace from a source",
      "Prefix statistics CSV of a trace",
      "Typicality report of a trace or prefix CSV",
      "Prefix statistics of a token file or trace under a source",
      "Exact enumeration report",
      "Exact enumeration report with bound verdicts",
      "Per-n table from an enumeration report",
  };
  for (std::size_t k = 0; k < kCommands.size(); ++k) {
    auto* sub = app.add_subcommand(kCommands[k], help[k]);
    add_options(sub, sets[k], cli, sub_configs[k]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "typlab: error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    std::string config_path = top_config;
    for (std::size_t k = 0; k < kCommands.size(); ++k) {
      auto* sub = app.get_subcommand(kCommands[k]);
      if (sub->parsed()) {
        if (cli.command.size()) config_error("only one command may be given");
        cli.command = kCommands[k];
        if (!sub_configs[k].empty()) config_path = sub_configs[k];
      }
    }
    RunConfig base;
    if (!config_path.empty()) base = load_config_file(config_path);
    if (!cli.command.empty() && !base.command.empty() && base.command != cli.command) {
      config_error("config file is for '" + base.command + "', not '" + cli.command + "'");
    }
    if (cli.command.empty() && base.command.empty()) {
      err << app.help();
      return kExitUsage;
    }
    return run_impl(merge_config(base, cli), cli.cap.has_value(), in, out, err);
  } catch (const Error& e) {
    err << "typlab: error: " << e.what() << '\n';
    return exit_for(e.code());
  }
}

}  // namespace typlab
