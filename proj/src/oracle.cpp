// SPDX-License-Identifier: Apache-2.0

#include "typlab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>
#include <sstream>

#include "typlab/error.hpp"
#include "typlab/numeric.hpp"

namespace typlab {

namespace {

using Matrix = std::vector<std::vector<BigCount>>;

Matrix multiply(const Matrix& a, const Matrix& b) {
  const std::size_t k = a.size();
  Matrix c(k, std::vector<BigCount>(k, 0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t m = 0; m < k; ++m) {
      if (a[i][m] == 0) continue;
      for (std::size_t j = 0; j < k; ++j) {
        if (b[m][j] != 0) c[i][j] += a[i][m] * b[m][j];
      }
    }
  }
  return c;
}

double big_ratio(const BigCount& num, const BigCount& den) { return std::exp2(log2_big(num) - log2_big(den)); }

// Identity check with an absolute tolerance; margin is tol - |a - b|.
BoundVerdict identity_verdict(std::string name, double lhs, double rhs, double tol) {
  BoundVerdict v;
  v.name = std::move(name);
  v.lhs = lhs;
  v.rhs = rhs;
  v.margin = tol - std::fabs(lhs - rhs);
  v.holds = v.margin >= 0.0;
  return v;
}

BoundVerdict upper_verdict(std::string name, double lhs, double rhs, double slack = 0.0) {
  BoundVerdict v;
  v.name = std::move(name);
  v.lhs = lhs;
  v.rhs = rhs;
  v.margin = rhs - lhs;
  v.holds = lhs <= rhs + slack;
  return v;
}

void collect(BoundVerdict& v, const EnumerationReport& r, SetFlag flag) {
  if (v.holds) return;
  for (const auto& rec : r.records) {
    if (rec.in(flag)) v.counterexamples.push_back(decode_tokens(rec.code, r.alphabet_size, r.n));
  }
}

std::string tokens_text(const std::vector<TokenId>& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(t[i]);
  }
  return s + "]";
}

nlohmann::ordered_json set_json(const SetStats& s) {
  nlohmann::ordered_json j;
  j["size"] = s.size;
  j["mass"] = s.mass;
  j["conditional_mass"] = s.conditional_mass;
  return j;
}

}  // namespace

double log2_big(const BigCount& x) {
  if (x <= 0) return -std::numeric_limits<double>::infinity();
  const std::size_t bits = boost::multiprecision::msb(x);
  if (bits < 1000) return std::log2(x.convert_to<double>());
  const std::size_t shift = bits - 63;
  return std::log2(BigCount(x >> shift).convert_to<double>()) + static_cast<double>(shift);
}

DfaCount count_dfa_strings(const Grammar& grammar, std::uint32_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "string length must be >= 1");
  const std::size_t k = grammar.num_states();
  Matrix step(k, std::vector<BigCount>(k, 0));
  for (std::size_t s = 0; s < k; ++s) {
    for (TokenId y = 0; y < grammar.alphabet_size(); ++y) step[s][grammar.next(static_cast<Grammar::State>(s), y)] += 1;
  }
  Matrix power(k, std::vector<BigCount>(k, 0));
  for (std::size_t i = 0; i < k; ++i) power[i][i] = 1;
  for (std::uint32_t e = n; e > 0; e >>= 1) {
    if (e & 1u) power = multiply(power, step);
    if (e > 1) step = multiply(step, step);
  }
  DfaCount out;
  out.n = n;
  out.count = 0;
  for (std::size_t t = 0; t < k; ++t) {
    if (grammar.accepting(static_cast<Grammar::State>(t))) out.count += power[grammar.start()][t];
  }
  if (out.count == 0) {
    throw Error(ErrorCode::EmptyLanguageAtLengthN,
                "grammar " + grammar.description() + " accepts no string of length " + std::to_string(n));
  }
  out.g = log2_big(out.count) / n;
  return out;
}

std::vector<std::vector<BigCount>> completion_counts(const Grammar& grammar, std::uint32_t max_len) {
  const std::size_t k = grammar.num_states();
  std::vector<std::vector<BigCount>> c(max_len + 1, std::vector<BigCount>(k, 0));
  for (std::size_t s = 0; s < k; ++s) c[0][s] = grammar.accepting(static_cast<Grammar::State>(s)) ? 1 : 0;
  for (std::uint32_t len = 1; len <= max_len; ++len) {
    for (std::size_t s = 0; s < k; ++s) {
      for (TokenId y = 0; y < grammar.alphabet_size(); ++y) {
        c[len][s] += c[len - 1][grammar.next(static_cast<Grammar::State>(s), y)];
      }
    }
  }
  return c;
}

std::vector<TokenId> decode_tokens(std::uint64_t code, std::uint32_t alphabet_size, std::uint32_t n) {
  std::vector<TokenId> t(n);
  for (std::uint32_t i = n; i-- > 0;) {
    t[i] = static_cast<TokenId>(code % alphabet_size);
    code /= alphabet_size;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

namespace {

class Walker {
 public:
  Walker(const ConditionalModel& model, std::uint32_t n, std::uint32_t v) : model_(model), n_(n), v_(v) {
    history_.reserve(n);
  }

  struct Partial {
    std::uint64_t code = 0;
    double prob = 1.0;
    double surprisal = 0.0;
    double entropy = 0.0;
    double lambda_sq = 0.0;
    double deviation = 0.0;
  };

  void extend(const Partial& at, const Distribution& d, std::size_t i, std::vector<StringRecord>& out) {
    const TokenId y = d.ids()[i];
    if (y >= v_) {
      throw Error(ErrorCode::InvalidArgument,
                  "model emits token " + std::to_string(y) + " outside its alphabet");
    }
    const double p = d.probs()[i];
    const double s = surprisal(p);
    const auto& st = d.stats();
    Partial next{at.code * v_ + y,
                 at.prob * p,
                 at.surprisal + s,
                 at.entropy + st.entropy,
                 at.lambda_sq + st.log_deviation * st.log_deviation,
                 at.deviation + (s - st.entropy)};
    history_.push_back(y);
    walk(next, out);
    history_.pop_back();
  }

  void walk(const Partial& at, std::vector<StringRecord>& out) {
    if (history_.size() == n_) {
      const double inv = 1.0 / n_;
      out.push_back(StringRecord{at.code, at.prob, at.surprisal * inv, at.entropy * inv,
                                 std::sqrt(at.lambda_sq) * inv, at.deviation * inv, 0});
      return;
    }
    const Distribution& d = model_.conditional(history_);
    for (std::size_t i = 0; i < d.size(); ++i) extend(at, d, i, out);
  }

 private:
  const ConditionalModel& model_;
  std::uint32_t n_;
  std::uint32_t v_;
  std::vector<TokenId> history_;
};

}  // namespace

EnumerationReport enumerate_strings(const ConditionalModel& model, std::uint32_t n, std::uint64_t cap) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "string length must be >= 1");
  if (const auto* spec = dynamic_cast<const SourceSpec*>(&model); spec && spec->is_grammar_filtered()) {
    throw Error(ErrorCode::UnsupportedModel,
                "grammar-filtered sources are enumerated through their inner source and build_sets");
  }
  const std::uint32_t v = model.alphabet_size();
  std::uint64_t total = 1;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (total > cap / v) {
      throw Error(ErrorCode::CapExceeded, std::to_string(v) + "^" + std::to_string(n) +
                                              " strings exceed the enumeration cap " + std::to_string(cap));
    }
    total *= v;
  }

  EnumerationReport r;
  r.n = n;
  r.alphabet_size = v;
  if (const auto* spec = dynamic_cast<const SourceSpec*>(&model)) {
    r.model_label = spec->describe();
  } else if (dynamic_cast<const UniformGrammarModel*>(&model)) {
    r.model_label = "uniform_over_grammar";
  }
  r.total_strings = total;

  const Distribution& first = model.conditional({});
  std::vector<std::future<std::vector<StringRecord>>> parts;
  parts.reserve(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    parts.push_back(std::async(std::launch::async, [&model, &first, n, v, i] {
      Walker w(model, n, v);
      std::vector<StringRecord> out;
      w.extend(Walker::Partial{}, first, i, out);
      return out;
    }));
  }
  for (auto& f : parts) {
    auto chunk = f.get();
    r.records.insert(r.records.end(), chunk.begin(), chunk.end());
  }
  r.zero_mass_strings = total - r.records.size();

  KahanSum mass, joint, mean_l, mean_h;
  for (const auto& rec : r.records) {
    mass += rec.prob;
    joint += -rec.prob * std::log2(rec.prob);
    mean_l += rec.prob * rec.l;
    mean_h += rec.prob * rec.h;
  }
  r.mass_total = mass.value();
  r.joint_entropy = joint.value();
  r.mean_l = mean_l.value();
  r.mean_h = mean_h.value();
  return r;
}

// ---------------------------------------------------------------------------
// Uniform-over-G model
// ---------------------------------------------------------------------------

UniformGrammarModel::UniformGrammarModel(const Grammar& grammar, std::uint32_t n)
    : grammar_(grammar), n_(n), alphabet_size_(grammar.alphabet_size()) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "string length must be >= 1");
  count_dfa_strings(grammar, n);  // rejects empty languages
  const auto completions = completion_counts(grammar, n);
  const std::uint32_t states = grammar.num_states();
  dists_.assign(n, std::vector<std::optional<Distribution>>(states));
  std::vector<TokenId> ids(alphabet_size_);
  for (TokenId y = 0; y < alphabet_size_; ++y) ids[y] = y;
  std::vector<double> w(alphabet_size_);
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto& rest = completions[n - k - 1];
    for (Grammar::State s = 0; s < states; ++s) {
      const BigCount& total = completions[n - k][s];
      if (total == 0) continue;
      for (TokenId y = 0; y < alphabet_size_; ++y) w[y] = big_ratio(rest[grammar.next(s, y)], total);
      dists_[k][s] = validate_distribution(ids, w);
    }
  }
}

const Distribution& UniformGrammarModel::conditional(std::span<const TokenId> history) const {
  if (history.size() >= n_) {
    throw Error(ErrorCode::InvalidArgument, "history is as long as the modeled strings");
  }
  Grammar::State s = grammar_.start();
  for (TokenId y : history) {
    if (y >= alphabet_size_) throw Error(ErrorCode::UnknownToken, "token " + std::to_string(y));
    s = grammar_.next(s, y);
  }
  const auto& d = dists_[history.size()][s];
  if (!d) {
    throw Error(ErrorCode::ZeroProbabilityPath,
                "prefix of length " + std::to_string(history.size()) + " has no grammatical completion");
  }
  return *d;
}

// ---------------------------------------------------------------------------
// Sets
// ---------------------------------------------------------------------------

void build_sets(EnumerationReport& r, const Grammar& grammar, double eps, std::optional<double> delta_g) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::InvalidArgument, "eps must be > 0");
  if (delta_g && (!std::isfinite(*delta_g) || *delta_g <= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "delta_g must be > 0");
  }
  if (grammar.alphabet_size() < r.alphabet_size) {
    throw Error(ErrorCode::InvalidArgument, "grammar alphabet is smaller than the model alphabet");
  }
  const DfaCount dfa = count_dfa_strings(grammar, r.n);
  r.grammar_label = grammar.description();
  r.eps = eps;
  r.g_count = dfa.count;
  r.g_n = dfa.g;
  const double g = dfa.g;

  KahanSum p_g;
  for (auto& rec : r.records) {
    Grammar::State s = grammar.start();
    std::uint64_t code = rec.code;
    std::uint64_t scale = 1;
    for (std::uint32_t i = 1; i < r.n; ++i) scale *= r.alphabet_size;
    for (std::uint32_t i = 0; i < r.n; ++i) {
      const auto y = static_cast<TokenId>(code / scale);
      code %= scale;
      scale /= r.alphabet_size;
      s = grammar.next(s, y);
    }
    rec.flags = grammar.accepting(s) ? kInG : 0;
    if (rec.in(kInG)) p_g += rec.prob;
  }
  r.p_G = p_g.value();
  if (!(r.p_G > 0.0)) throw Error(ErrorCode::InvalidArgument, "model puts no mass on grammatical strings");

  KahanSum h_over_p, mass_p;
  for (auto& rec : r.records) {
    if (std::fabs(rec.deviation) < eps) rec.flags |= kInT;
    if (!rec.in(kInG)) continue;
    if (rec.l > g + eps / 2) rec.flags |= kInE1;
    if (rec.in(kInT) && !rec.in(kInE1)) {
      rec.flags |= kInP;
      h_over_p += rec.prob * rec.h;
      mass_p += rec.prob;
    }
    if (rec.deviation <= -eps && rec.h < g) rec.flags |= kInV;
  }
  r.mean_h_over_P = mass_p.value() > 0.0 ? h_over_p.value() / mass_p.value()
                                          : std::numeric_limits<double>::quiet_NaN();
  r.delta_g_defaulted = !delta_g.has_value();
  if (delta_g) {
    r.delta_g = *delta_g;
  } else {
    r.delta_g = std::isfinite(r.mean_h_over_P) ? (g - r.mean_h_over_P) / 2 : 0.0;
  }

  SetStats t, tg, e1, p, e2, vs;
  KahanSum mt, mtg, me1, mp, me2, mv, ent, lg, nontyp;
  std::uint64_t g_positive_not_e1 = 0;
  for (auto& rec : r.records) {
    if (rec.in(kInP) && r.delta_g > 0.0 && rec.h <= g - r.delta_g) rec.flags |= kInE2;
    if (rec.in(kInT)) {
      ++t.size;
      mt += rec.prob;
    }
    if (!rec.in(kInG)) continue;
    const double q = rec.prob / r.p_G;
    ent += -q * std::log2(q);
    lg += q * rec.l;
    if (!rec.in(kInT)) nontyp += q;
    if (rec.in(kInT)) {
      ++tg.size;
      mtg += rec.prob;
    }
    if (rec.in(kInE1)) {
      me1 += rec.prob;
    } else {
      ++g_positive_not_e1;
    }
    if (rec.in(kInP)) {
      ++p.size;
      mp += rec.prob;
    }
    if (rec.in(kInE2)) {
      ++e2.size;
      me2 += rec.prob;
    }
    if (rec.in(kInV)) {
      ++vs.size;
      mv += rec.prob;
    }
  }
  // Zero-mass grammatical strings have l = inf and belong to E1.
  e1.size = r.g_count.convert_to<std::uint64_t>() - g_positive_not_e1;

  auto fill = [&](SetStats& s, const KahanSum& m, bool conditional) {
    s.mass = m.value();
    s.conditional_mass = conditional ? s.mass / r.p_G : s.mass;
  };
  fill(t, mt, false);
  fill(tg, mtg, true);
  fill(e1, me1, true);
  fill(p, mp, true);
  fill(e2, me2, true);
  fill(vs, mv, true);
  r.typical = t;
  r.typical_grammatical = tg;
  r.e1 = e1;
  r.purged = p;
  r.e2 = e2;
  r.over_typical = vs;
  r.rho = p.size > 0 ? static_cast<double>(e2.size) / static_cast<double>(p.size) : 0.0;
  r.grammatical_entropy_rate = ent.value() / r.n;
  r.mean_l_given_G = lg.value();
  r.nontypical_given_G = nontyp.value();
  r.sets_built = true;
  r.verdicts.clear();
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

std::vector<BoundVerdict> verify_bounds(EnumerationReport& r, bool throw_on_violation) {
  if (!r.sets_built) throw Error(ErrorCode::InvalidArgument, "build_sets must run before verify_bounds");
  const double n = r.n;
  const double g = r.g_n;
  const double eps = r.eps;
  const double g_count = r.g_count.convert_to<double>();
  const double tail = std::exp2(-n * eps / 2);
  std::vector<BoundVerdict> out;

  out.push_back(identity_verdict("total_probability", r.mass_total, 1.0, 1e-9));

  {
    auto v = identity_verdict("entropy_identity", r.mean_l, r.joint_entropy / n, 1e-9);
    const double dh = std::fabs(r.mean_h - r.joint_entropy / n);
    v.margin = std::min(v.margin, 1e-9 - dh);
    v.holds = v.margin >= 0.0;
    v.detail = "E[l] and E[h] against H(Y_n)/n; E[h] = " + format_double(r.mean_h);
    out.push_back(std::move(v));
  }

  {
    auto v = upper_verdict("e1_mass", r.e1.mass, tail);
    v.detail = "Pr(E1) <= 2^(-n eps/2)";
    collect(v, r, kInE1);
    out.push_back(std::move(v));
  }

  {
    KahanSum high;
    for (const auto& rec : r.records) {
      if (rec.in(kInG) && rec.h > g + eps) high += rec.prob / r.p_G;
    }
    auto v = upper_verdict("entropy_tail", high.value(), tail / r.p_G);
    v.rigorous = false;
    v.detail = "Pr(h > g + eps | G) <= 2^(-n eps/2) / p_G; needs |l - h| < eps/2 w.h.p.";
    if (!v.holds) {
      for (const auto& rec : r.records) {
        if (rec.in(kInG) && rec.h > g + eps) {
          v.counterexamples.push_back(decode_tokens(rec.code, r.alphabet_size, r.n));
        }
      }
    }
    out.push_back(std::move(v));
  }

  {
    const double lhs = static_cast<double>(r.purged.size) / g_count;
    BoundVerdict v;
    if (r.rho > 0.0 && r.delta_g > 0.0) {
      v = upper_verdict("purged_size", lhs, std::exp2(-n * (r.delta_g / 2 - std::log2(r.rho) / n)));
      v.rigorous = eps <= r.delta_g / 2;
      collect(v, r, kInP);
    } else {
      v.name = "purged_size";
      v.lhs = lhs;
      v.rhs = std::numeric_limits<double>::infinity();
      v.margin = v.rhs;
      v.applicable = false;
    }
    v.detail = "|P|/|G| <= 2^(-n (delta_g/2 - log2(rho)/n))";
    out.push_back(std::move(v));
  }

  {
    auto v = upper_verdict("over_typical_size", static_cast<double>(r.over_typical.size) / g_count,
                           std::exp2(-n * eps));
    v.detail = "|V|/|G| <= 2^(-n eps)";
    collect(v, r, kInV);
    out.push_back(std::move(v));
  }

  {
    // 1e-12 absorbs rounding when the model is uniform over G (equality).
    auto v = upper_verdict("grammatical_entropy", r.grammatical_entropy_rate, g, 1e-12);
    v.detail = "(1/n) H(Y_n | G) <= g(n)";
    out.push_back(std::move(v));
  }

  {
    auto v = identity_verdict("grammatical_entropy_identity", r.grammatical_entropy_rate,
                              std::log2(r.p_G) / n + r.mean_l_given_G, 1e-9);
    v.detail = "(1/n) H(Y_n | G) = log2(p_G)/n + E[l | G]";
    out.push_back(std::move(v));
  }

  {
    BoundVerdict v;
    v.name = "purged_mass";
    v.lhs = r.purged.conditional_mass;
    v.rhs = 1.0 - tail / r.p_G - r.nontypical_given_G;
    v.margin = v.lhs - v.rhs;
    v.holds = v.lhs >= v.rhs - 1e-12;
    v.detail = "Pr(P | G) >= 1 - 2^(-n eps/2)/p_G - Pr(|l - h| >= eps | G)";
    out.push_back(std::move(v));
  }

  r.verdicts = out;
  if (throw_on_violation) {
    for (const auto& v : out) {
      if (v.rigorous && v.applicable && !v.holds) {
        std::ostringstream msg;
        msg << v.name << " fails at n=" << r.n << ": lhs=" << format_double(v.lhs)
            << " rhs=" << format_double(v.rhs) << "; counterexamples (" << v.counterexamples.size() << "):";
        for (const auto& t : v.counterexamples) msg << ' ' << tokens_text(t);
        throw Error(ErrorCode::BoundViolated, msg.str());
      }
    }
  }
  return out;
}

bool all_hold(std::span<const BoundVerdict> verdicts, bool rigorous_only) noexcept {
  return std::all_of(verdicts.begin(), verdicts.end(), [&](const BoundVerdict& v) {
    return !v.applicable || v.holds || (rigorous_only && !v.rigorous);
  });
}

// ---------------------------------------------------------------------------
// Variance decomposition
// ---------------------------------------------------------------------------

VarianceReport variance_decomposition(const EnumerationReport& r, std::span<const double> alphas) {
  VarianceReport out;
  out.n = r.n;
  KahanSum mean, cond;
  for (const auto& rec : r.records) {
    mean += rec.prob * rec.deviation;
    cond += rec.prob * rec.lam * rec.lam;
  }
  out.mean_l_minus_h = mean.value();
  KahanSum var;
  for (const auto& rec : r.records) {
    const double d = rec.deviation - out.mean_l_minus_h;
    var += rec.prob * d * d;
  }
  out.exact_var_l_minus_h = var.value();
  out.sum_conditional_vars = cond.value();
  const double diff = std::fabs(out.exact_var_l_minus_h - out.sum_conditional_vars);
  const double scale = std::max(std::fabs(out.exact_var_l_minus_h), std::fabs(out.sum_conditional_vars));
  out.relative_gap = scale > 0.0 ? diff / scale : 0.0;
  // Absolute floor for models where both sides vanish (deterministic or uniform).
  out.lemma_holds = diff <= kVarianceRelTol * scale + 1e-15;

  const double sigma = std::sqrt(out.sum_conditional_vars);
  for (double alpha : alphas) {
    if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "Chebyshev alpha must be > 0");
    KahanSum ex;
    for (const auto& rec : r.records) {
      if (std::fabs(rec.deviation) > alpha * sigma + 1e-12) ex += rec.prob;
    }
    ChebyshevCheck c;
    c.alpha = alpha;
    c.exceedance = ex.value();
    c.bound = 1.0 / (alpha * alpha);
    c.holds = c.exceedance <= c.bound;
    out.chebyshev.push_back(c);
  }
  return out;
}

VarianceReport variance_decomposition(const ConditionalModel& model, std::uint32_t n,
                                      std::span<const double> alphas, std::uint64_t cap) {
  return variance_decomposition(enumerate_strings(model, n, cap), alphas);
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

nlohmann::ordered_json report_to_json(const EnumerationReport& r, bool include_records) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["alphabet_size"] = r.alphabet_size;
  j["model"] = r.model_label;
  j["total_strings"] = r.total_strings;
  j["zero_mass_strings"] = r.zero_mass_strings;
  j["mass_total"] = r.mass_total;
  j["joint_entropy"] = r.joint_entropy;
  j["mean_l"] = r.mean_l;
  j["mean_h"] = r.mean_h;
  if (r.sets_built) {
    nlohmann::ordered_json s;
    s["grammar"] = r.grammar_label;
    s["eps"] = r.eps;
    s["g_count"] = r.g_count.str();
    s["g_n"] = r.g_n;
    s["p_G"] = r.p_G;
    s["typical"] = set_json(r.typical);
    s["typical_grammatical"] = set_json(r.typical_grammatical);
    s["e1"] = set_json(r.e1);
    s["purged"] = set_json(r.purged);
    s["e2"] = set_json(r.e2);
    s["over_typical"] = set_json(r.over_typical);
    s["mean_h_over_P"] = r.mean_h_over_P;
    s["delta_g"] = r.delta_g;
    s["delta_g_defaulted"] = r.delta_g_defaulted;
    s["rho"] = r.rho;
    s["grammatical_entropy_rate"] = r.grammatical_entropy_rate;
    s["mean_l_given_G"] = r.mean_l_given_G;
    s["nontypical_given_G"] = r.nontypical_given_G;
    j["sets"] = std::move(s);
  }
  if (!r.verdicts.empty()) {
    nlohmann::ordered_json vs = nlohmann::ordered_json::array();
    for (const auto& v : r.verdicts) {
      nlohmann::ordered_json jv;
      jv["name"] = v.name;
      jv["holds"] = v.holds;
      jv["lhs"] = v.lhs;
      jv["rhs"] = v.rhs;
      jv["margin"] = v.margin;
      jv["rigorous"] = v.rigorous;
      jv["applicable"] = v.applicable;
      jv["detail"] = v.detail;
      jv["counterexamples"] = v.counterexamples;
      vs.push_back(std::move(jv));
    }
    j["verdicts"] = std::move(vs);
    j["all_verdicts_hold"] = all_hold(r.verdicts);
  }
  if (include_records) {
    nlohmann::ordered_json recs = nlohmann::ordered_json::array();
    for (const auto& rec : r.records) {
      nlohmann::ordered_json jr;
      jr["tokens"] = decode_tokens(rec.code, r.alphabet_size, r.n);
      jr["prob"] = rec.prob;
      jr["l"] = rec.l;
      jr["h"] = rec.h;
      jr["lam"] = rec.lam;
      if (r.sets_built) {
        jr["grammatical"] = rec.in(kInG);
        nlohmann::ordered_json sets = nlohmann::ordered_json::array();
        for (auto [flag, name] : {std::pair{kInT, "T"}, std::pair{kInE1, "E1"}, std::pair{kInP, "P"},
                                  std::pair{kInE2, "E2"}, std::pair{kInV, "V"}}) {
          if (rec.in(flag)) sets.push_back(name);
        }
        jr["sets"] = std::move(sets);
      }
      recs.push_back(std::move(jr));
    }
    j["records"] = std::move(recs);
  }
  return j;
}

nlohmann::ordered_json variance_to_json(const VarianceReport& v) {
  nlohmann::ordered_json j;
  j["n"] = v.n;
  j["mean_l_minus_h"] = v.mean_l_minus_h;
  j["exact_var_l_minus_h"] = v.exact_var_l_minus_h;
  j["sum_conditional_vars"] = v.sum_conditional_vars;
  j["relative_gap"] = v.relative_gap;
  j["lemma_holds"] = v.lemma_holds;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : v.chebyshev) {
    checks.push_back({{"alpha", c.alpha}, {"exceedance", c.exceedance}, {"bound", c.bound}, {"holds", c.holds}});
  }
  j["chebyshev"] = std::move(checks);
  return j;
}

void write_report_csv_header(std::ostream& out) {
  out << "n,alphabet_size,g_count,g_n,p_G,typical,typical_grammatical,e1,purged,e2,over_typical,"
         "purged_over_G,over_typical_over_G,delta_g,rho,all_verdicts_hold\n";
}

void write_report_csv_row(std::ostream& out, const EnumerationReport& r) {
  write_report_csv_row(out, nlohmann::json(report_to_json(r)));
}

void write_report_csv_row(std::ostream& out, const nlohmann::json& j) {
  try {
    const auto& s = j.at("sets");
    const BigCount g_count(s.at("g_count").get<std::string>());
    const double g = g_count.convert_to<double>();
    auto num = [](const nlohmann::json& v) {
      return v.is_number() ? format_double(v.get<double>()) : std::string("nan");
    };
    const auto purged = s.at("purged").at("size").get<std::uint64_t>();
    const auto over = s.at("over_typical").at("size").get<std::uint64_t>();
    out << j.at("n").get<std::uint32_t>() << ',' << j.at("alphabet_size").get<std::uint32_t>() << ','
        << g_count.str() << ',' << num(s.at("g_n")) << ',' << num(s.at("p_G")) << ','
        << s.at("typical").at("size").get<std::uint64_t>() << ','
        << s.at("typical_grammatical").at("size").get<std::uint64_t>() << ','
        << s.at("e1").at("size").get<std::uint64_t>() << ',' << purged << ','
        << s.at("e2").at("size").get<std::uint64_t>() << ',' << over << ','
        << format_double(static_cast<double>(purged) / g) << ',' << format_double(static_cast<double>(over) / g)
        << ',' << num(s.at("delta_g")) << ',' << num(s.at("rho")) << ','
        << (j.contains("all_verdicts_hold") ? (j["all_verdicts_hold"].get<bool>() ? "true" : "false") : "")
        << '\n';
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("report JSON lacks set statistics: ") + e.what());
  }
  if (!out) throw Error(ErrorCode::SinkFailure, "CSV write failed");
}

}  // namespace typlab
