// SPDX-License-Identifier: Apache-2.0

#include "typlab/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "typlab/error.hpp"
#include "typlab/numeric.hpp"

namespace typlab {

namespace {

constexpr double kNormalizedTolerance = 1e-12;
constexpr double kRadicandSlack = 1e-12;

DistStats compute_stats(std::span<const double> probs) {
  KahanSum h;
  KahanSum s;
  for (double p : probs) {
    const double lp = std::log2(p);
    h.add(-p * lp);
    s.add(p * lp * lp);
  }
  DistStats out;
  out.entropy = std::max(0.0, h.value());
  out.second_log_moment = s.value();

  // Fails only if the moments themselves are broken.
  (void)log_deviation_from_moments(out.second_log_moment, out.entropy);

  const bool all_equal = std::all_of(probs.begin(), probs.end(),
                                     [&](double p) { return p == probs.front(); });
  if (all_equal) {
    out.log_deviation = 0.0;
  } else {
    KahanSum var;
    for (double p : probs) {
      const double d = surprisal(p) - out.entropy;
      var.add(p * d * d);
    }
    out.log_deviation = std::sqrt(var.value());
  }
  return out;
}

bool already_valid(std::span<const double> probs) {
  KahanSum total;
  for (double p : probs) {
    if (!(p >= kProbFloor)) return false;
    total.add(p);
  }
  return std::fabs(total.value() - 1.0) <= kNormalizedTolerance;
}

}  // namespace

Distribution make_distribution_unchecked(std::vector<TokenId> ids, std::vector<double> probs) {
  auto rep = std::make_shared<Distribution::Rep>();
  rep->stats = compute_stats(probs);
  rep->ids = std::move(ids);
  rep->probs = std::move(probs);
  return Distribution(std::move(rep));
}

Distribution Distribution::point_mass(TokenId id) {
  return make_distribution_unchecked({id}, {1.0});
}

Distribution Distribution::uniform(std::uint32_t size) {
  if (size == 0) throw Error(ErrorCode::EmptySupport, "uniform distribution over zero ids");
  std::vector<TokenId> ids(size);
  for (std::uint32_t i = 0; i < size; ++i) ids[i] = i;
  std::vector<double> probs(size, 1.0 / static_cast<double>(size));
  if (already_valid(probs)) return make_distribution_unchecked(std::move(ids), std::move(probs));
  return validate_distribution(ids, probs);
}

std::optional<std::size_t> Distribution::find(TokenId id) const noexcept {
  const auto& ids = rep_->ids;
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

double Distribution::prob(TokenId id) const noexcept {
  auto pos = find(id);
  return pos ? rep_->probs[*pos] : 0.0;
}

bool operator==(const Distribution& a, const Distribution& b) noexcept {
  if (a.rep_ == b.rep_) return true;
  return a.rep_->ids == b.rep_->ids && a.rep_->probs == b.rep_->probs;
}

Distribution validate_distribution(std::span<const std::pair<TokenId, double>> raw) {
  std::vector<std::pair<TokenId, double>> entries(raw.begin(), raw.end());
  for (const auto& [id, p] : entries) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorCode::NonFinite,
                  "probability for id " + std::to_string(id) + " is " + std::to_string(p));
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].first == entries[i - 1].first) {
      throw Error(ErrorCode::DuplicateId, "token id " + std::to_string(entries[i].first));
    }
  }

  std::vector<TokenId> ids;
  std::vector<double> weights;
  ids.reserve(entries.size());
  weights.reserve(entries.size());
  for (const auto& [id, p] : entries) {
    if (p > 0.0) {
      ids.push_back(id);
      weights.push_back(p);
    }
  }
  if (ids.empty()) throw Error(ErrorCode::EmptySupport, "no strictly positive probability");

  if (already_valid(weights)) return make_distribution_unchecked(std::move(ids), std::move(weights));

  KahanSum total;
  for (double w : weights) total.add(w);
  const double sum = total.value();
  if (!std::isfinite(sum)) throw Error(ErrorCode::NonFinite, "weights overflow when summed");

  std::vector<double> probs(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / sum;

  // Pin sub-floor entries to the floor and rescale the rest; rescaling can
  // push further entries under the floor, so repeat until none do.
  std::vector<bool> pinned(weights.size(), false);
  std::size_t n_pinned = 0;
  for (;;) {
    bool changed = false;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!pinned[i] && probs[i] < kProbFloor) {
        pinned[i] = true;
        ++n_pinned;
        changed = true;
      }
    }
    if (!changed) break;
    const double free_mass = 1.0 - static_cast<double>(n_pinned) * kProbFloor;
    if (n_pinned == probs.size() || free_mass <= 0.0) {
      throw Error(ErrorCode::NumericInconsistency,
                  "support of " + std::to_string(probs.size()) + " ids cannot respect the floor");
    }
    KahanSum rest;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!pinned[i]) rest.add(weights[i]);
    }
    const double scale = free_mass / rest.value();
    for (std::size_t i = 0; i < probs.size(); ++i) {
      probs[i] = pinned[i] ? kProbFloor : weights[i] * scale;
    }
  }
  return make_distribution_unchecked(std::move(ids), std::move(probs));
}

Distribution validate_distribution(std::span<const TokenId> ids, std::span<const double> weights) {
  if (ids.size() != weights.size()) {
    throw Error(ErrorCode::InvalidArgument, "ids and probabilities differ in length");
  }
  std::vector<std::pair<TokenId, double>> raw(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) raw[i] = {ids[i], weights[i]};
  return validate_distribution(raw);
}

double entropy(const Distribution& d) noexcept { return d.stats().entropy; }

double second_log_moment(const Distribution& d) noexcept { return d.stats().second_log_moment; }

double log_deviation(const Distribution& d) noexcept { return d.stats().log_deviation; }

double log_deviation_from_moments(double second_log_moment, double entropy) {
  const double radicand = second_log_moment - entropy * entropy;
  if (radicand < -kRadicandSlack) {
    throw Error(ErrorCode::NumericInconsistency,
                "S - H^2 = " + std::to_string(radicand) + " is negative");
  }
  return radicand <= 0.0 ? 0.0 : std::sqrt(radicand);
}

double cross_entropy(const Distribution& p, const Distribution& q) {
  KahanSum acc;
  const auto ids = p.ids();
  const auto probs = p.probs();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto pos = q.find(ids[i]);
    if (!pos) {
      throw Error(ErrorCode::SupportMismatch,
                  "id " + std::to_string(ids[i]) + " has mass under p but not under q");
    }
    acc.add(probs[i] * surprisal(q.probs()[*pos]));
  }
  return acc.value();
}

Distribution empirical_distribution(std::span<const TokenId> tokens,
                                    std::span<const TokenId> alphabet) {
  if (tokens.empty()) throw Error(ErrorCode::EmptyString, "empirical distribution of no tokens");
  std::vector<TokenId> sorted_alphabet(alphabet.begin(), alphabet.end());
  std::sort(sorted_alphabet.begin(), sorted_alphabet.end());
  sorted_alphabet.erase(std::unique(sorted_alphabet.begin(), sorted_alphabet.end()),
                        sorted_alphabet.end());

  std::vector<double> counts(sorted_alphabet.size(), 0.0);
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    auto it = std::lower_bound(sorted_alphabet.begin(), sorted_alphabet.end(), tokens[n]);
    if (it == sorted_alphabet.end() || *it != tokens[n]) {
      throw Error(ErrorCode::UnknownToken, "token " + std::to_string(tokens[n]) +
                                               " at position " + std::to_string(n + 1));
    }
    counts[static_cast<std::size_t>(it - sorted_alphabet.begin())] += 1.0;
  }
  return validate_distribution(sorted_alphabet, counts);
}

}  // namespace typlab
