// SPDX-License-Identifier: Apache-2.0

#include "typlab/trace.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "typlab/error.hpp"

namespace typlab {

namespace {

using json = nlohmann::json;

constexpr double kChosenProbTolerance = 1e-9;

[[noreturn]] void malformed(std::uint64_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": " + what);
}

template <typename T>
T get_unsigned(const json& obj, const char* key, std::uint64_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(line, std::string("missing \"") + key + "\"");
  if (!it->is_number_unsigned()) {
    malformed(line, std::string("\"") + key + "\" must be a non-negative integer");
  }
  const auto v = it->get<std::uint64_t>();
  if (v > std::numeric_limits<T>::max()) malformed(line, std::string("\"") + key + "\" out of range");
  return static_cast<T>(v);
}

template <typename T>
std::optional<T> get_optional_unsigned(const json& obj, const char* key, std::uint64_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return get_unsigned<T>(obj, key, line);
}

double get_number(const json& obj, const char* key, std::uint64_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(line, std::string("missing \"") + key + "\"");
  if (!it->is_number()) malformed(line, std::string("\"") + key + "\" must be a number");
  return it->get<double>();
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

void append_json_string(std::string& out, const std::string& s) { out += json(s).dump(); }

template <typename Opt>
void append_optional(std::string& out, const Opt& v) {
  out += v ? std::to_string(*v) : std::string("null");
}

}  // namespace

std::string_view to_string(SourceKind kind) noexcept {
  switch (kind) {
    case SourceKind::ProbeGenerate: return "probe_generate";
    case SourceKind::ProbeScore: return "probe_score";
    case SourceKind::Simulated: return "simulated";
  }
  return "simulated";
}

std::optional<SourceKind> parse_source_kind(std::string_view text) noexcept {
  if (text == "probe_generate") return SourceKind::ProbeGenerate;
  if (text == "probe_score") return SourceKind::ProbeScore;
  if (text == "simulated") return SourceKind::Simulated;
  return std::nullopt;
}

TraceStep make_step(std::uint64_t index, TokenId chosen_id, Distribution dist) {
  auto pos = dist.find(chosen_id);
  if (!pos) {
    throw Error(ErrorCode::ChosenNotInSupport,
                "step " + std::to_string(index) + ": token " + std::to_string(chosen_id));
  }
  const double p = dist.probs()[*pos];
  return TraceStep{index, chosen_id, p, std::move(dist)};
}

// ---------------------------------------------------------------------------
// Reader
// ---------------------------------------------------------------------------

TraceReader::TraceReader(std::istream& in) : in_(in) {
  std::string text;
  if (!next_line(text)) throw Error(ErrorCode::HeaderMissing, "empty input");

  json rec;
  try {
    rec = json::parse(text);
  } catch (const json::exception& e) {
    malformed(line_, e.what());
  }
  if (!rec.is_object() || !rec.contains("type") || rec["type"] != "header") {
    throw Error(ErrorCode::HeaderMissing,
                "line " + std::to_string(line_) + " is not a header record");
  }

  header_.version = static_cast<int>(get_unsigned<std::uint32_t>(rec, "version", line_));
  if (header_.version != 1) malformed(line_, "unsupported version " + std::to_string(header_.version));

  auto kind_it = rec.find("source_kind");
  if (kind_it == rec.end() || !kind_it->is_string()) malformed(line_, "missing \"source_kind\"");
  auto kind = parse_source_kind(kind_it->get<std::string>());
  if (!kind) malformed(line_, "unknown source_kind " + kind_it->dump());
  header_.source_kind = *kind;

  auto label_it = rec.find("model_label");
  if (label_it != rec.end() && !label_it->is_null()) {
    if (!label_it->is_string()) malformed(line_, "\"model_label\" must be a string");
    header_.model_label = label_it->get<std::string>();
  }
  header_.top_k = get_optional_unsigned<std::uint32_t>(rec, "top_k", line_);
  if (header_.top_k && *header_.top_k < 1) malformed(line_, "\"top_k\" must be >= 1");
  header_.seed = get_optional_unsigned<std::uint64_t>(rec, "seed", line_);
  header_.prompt_token_count =
      get_optional_unsigned<std::uint64_t>(rec, "prompt_token_count", line_).value_or(0);
  header_.alphabet_size = get_optional_unsigned<std::uint32_t>(rec, "alphabet_size", line_);
}

bool TraceReader::next_line(std::string& out) {
  while (std::getline(in_, out)) {
    ++line_;
    if (!blank(out)) return true;
  }
  return false;
}

std::optional<TraceStep> TraceReader::next() {
  std::string text;
  if (!next_line(text)) return std::nullopt;

  json rec;
  try {
    rec = json::parse(text);
  } catch (const json::exception& e) {
    malformed(line_, e.what());
  }
  if (!rec.is_object()) malformed(line_, "record is not an object");
  auto type_it = rec.find("type");
  if (type_it == rec.end() || *type_it != "step") malformed(line_, "expected a step record");

  const auto index = get_unsigned<std::uint64_t>(rec, "index", line_);
  if (index != last_index_ + 1) {
    throw Error(ErrorCode::IndexGap, "line " + std::to_string(line_) + ": expected index " +
                                         std::to_string(last_index_ + 1) + ", found " +
                                         std::to_string(index));
  }
  const auto chosen = get_unsigned<TokenId>(rec, "chosen_id", line_);
  const double chosen_prob = get_number(rec, "chosen_prob", line_);

  auto ids_it = rec.find("ids");
  auto probs_it = rec.find("probs");
  if (ids_it == rec.end() || !ids_it->is_array()) malformed(line_, "missing \"ids\" array");
  if (probs_it == rec.end() || !probs_it->is_array()) malformed(line_, "missing \"probs\" array");
  if (ids_it->size() != probs_it->size()) malformed(line_, "\"ids\" and \"probs\" differ in length");

  std::vector<std::pair<TokenId, double>> raw;
  raw.reserve(ids_it->size());
  for (std::size_t i = 0; i < ids_it->size(); ++i) {
    const auto& id = (*ids_it)[i];
    const auto& p = (*probs_it)[i];
    if (!id.is_number_unsigned() || id.get<std::uint64_t>() > std::numeric_limits<TokenId>::max()) {
      malformed(line_, "token ids must be non-negative 32-bit integers");
    }
    if (!p.is_number()) malformed(line_, "probabilities must be numbers");
    raw.emplace_back(id.get<TokenId>(), p.get<double>());
  }

  std::optional<Distribution> dist;
  try {
    dist = validate_distribution(raw);
  } catch (const Error& e) {
    malformed(line_, e.what());
  }

  auto pos = dist->find(chosen);
  if (!pos) {
    throw Error(ErrorCode::ChosenNotInSupport, "line " + std::to_string(line_) + ": token " +
                                                   std::to_string(chosen) +
                                                   " is not in the recorded distribution");
  }
  const double recorded = dist->probs()[*pos];
  if (!(std::fabs(recorded - chosen_prob) <= kChosenProbTolerance)) {
    malformed(line_, "chosen_prob " + format_double(chosen_prob) +
                         " disagrees with distribution entry " + format_double(recorded));
  }

  last_index_ = index;
  return TraceStep{index, chosen, recorded, std::move(*dist)};
}

Trace read_trace(std::istream& in) {
  TraceReader reader(in);
  Trace trace{reader.header(), {}};
  while (auto step = reader.next()) trace.steps.push_back(std::move(*step));
  return trace;
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

std::string header_to_json_line(const TraceHeader& header) {
  std::string out = "{\"type\":\"header\",\"version\":";
  out += std::to_string(header.version);
  out += ",\"source_kind\":\"";
  out += to_string(header.source_kind);
  out += "\",\"model_label\":";
  append_json_string(out, header.model_label);
  out += ",\"top_k\":";
  append_optional(out, header.top_k);
  out += ",\"seed\":";
  append_optional(out, header.seed);
  out += ",\"prompt_token_count\":";
  out += std::to_string(header.prompt_token_count);
  out += ",\"alphabet_size\":";
  append_optional(out, header.alphabet_size);
  out += "}";
  return out;
}

std::string step_to_json_line(const TraceStep& step) {
  std::string out = "{\"type\":\"step\",\"index\":";
  out += std::to_string(step.index);
  out += ",\"chosen_id\":";
  out += std::to_string(step.chosen_id);
  out += ",\"chosen_prob\":";
  out += format_double(step.chosen_prob);
  out += ",\"ids\":[";
  const auto ids = step.dist.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(ids[i]);
  }
  out += "],\"probs\":[";
  const auto probs = step.dist.probs();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (i) out += ',';
    out += format_double(probs[i]);
  }
  out += "]}";
  return out;
}

TraceWriter::TraceWriter(std::ostream& out, const TraceHeader& header) : out_(out) {
  out_ << header_to_json_line(header) << '\n';
  if (!out_) throw Error(ErrorCode::SinkFailure, "failed to write trace header");
}

void TraceWriter::write(const TraceStep& step) {
  out_ << step_to_json_line(step) << '\n';
  if (!out_) throw Error(ErrorCode::SinkFailure, "failed to write step " + std::to_string(step.index));
  ++count_;
}

std::uint64_t write_trace(const TraceHeader& header, std::span<const TraceStep> steps,
                          std::ostream& out) {
  TraceWriter writer(out, header);
  for (const auto& step : steps) writer.write(step);
  out.flush();
  if (!out) throw Error(ErrorCode::SinkFailure, "failed to flush trace");
  return writer.count();
}

// ---------------------------------------------------------------------------
// Prefix statistics
// ---------------------------------------------------------------------------

PrefixPoint PrefixAccumulator::current() const noexcept {
  const double n = static_cast<double>(n_);
  return PrefixPoint{n_, surprisal_.value() / n, entropy_.value() / n,
                     std::sqrt(std::max(0.0, lambda_sq_.value())) / n};
}

std::vector<PrefixPoint> prefix_stats(std::span<const TraceStep> steps, std::uint64_t stride) {
  if (steps.empty()) throw Error(ErrorCode::EmptyTrace, "prefix statistics of an empty trace");
  if (stride == 0) stride = 1;
  std::vector<PrefixPoint> out;
  out.reserve(steps.size() / stride + 1);
  PrefixAccumulator acc;
  for (const auto& step : steps) {
    acc.add(step);
    if (acc.count() % stride == 0 || acc.count() == steps.size()) out.push_back(acc.current());
  }
  return out;
}

PrefixPoint final_stats(std::span<const TraceStep> steps) {
  if (steps.empty()) throw Error(ErrorCode::EmptyTrace, "prefix statistics of an empty trace");
  PrefixAccumulator acc;
  for (const auto& step : steps) acc.add(step);
  return acc.current();
}

void write_prefix_csv_header(std::ostream& out) {
  out << "N,l,h,lam,h_minus_lam,h_plus_lam,h_minus_2lam,h_plus_2lam\n";
}

void write_prefix_csv_row(std::ostream& out, const PrefixPoint& p) {
  out << p.n << ',' << format_double(p.l) << ',' << format_double(p.h) << ','
      << format_double(p.lam) << ',' << format_double(p.h - p.lam) << ','
      << format_double(p.h + p.lam) << ',' << format_double(p.h - 2.0 * p.lam) << ','
      << format_double(p.h + 2.0 * p.lam) << '\n';
}

void write_prefix_csv(std::ostream& out, std::span<const PrefixPoint> series) {
  write_prefix_csv_header(out);
  for (const auto& p : series) write_prefix_csv_row(out, p);
  if (!out) throw Error(ErrorCode::SinkFailure, "failed to write prefix CSV");
}

PrefixPoint read_prefix_csv_last(std::istream& in) {
  std::string line;
  std::string last;
  std::uint64_t line_no = 0;
  std::uint64_t last_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (!header_seen) {
      if (line.rfind("N,l,h,lam", 0) != 0) malformed(line_no, "not a prefix-statistics CSV");
      header_seen = true;
      continue;
    }
    last = line;
    last_no = line_no;
  }
  if (!header_seen) throw Error(ErrorCode::MalformedRecord, "empty CSV input");
  if (last.empty()) throw Error(ErrorCode::EmptyTrace, "prefix CSV has no rows");

  std::stringstream ss(last);
  std::string field;
  std::vector<std::string> fields;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (fields.size() < 4) malformed(last_no, "expected at least 4 columns");
  try {
    PrefixPoint p;
    p.n = std::stoull(fields[0]);
    p.l = std::stod(fields[1]);
    p.h = std::stod(fields[2]);
    p.lam = std::stod(fields[3]);
    if (p.n == 0) malformed(last_no, "N must be >= 1");
    return p;
  } catch (const std::logic_error&) {
    malformed(last_no, "unparseable number");
  }
}

}  // namespace typlab
