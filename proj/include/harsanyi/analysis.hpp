#pragma once

// Measurements over an interaction table: salient concept extraction,
// sparsity curves, sparse-approximation matching, transferability between
// two inputs, and attribution of a wrong prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "harsanyi/core.hpp"
#include "harsanyi/oracle.hpp"
#include "harsanyi/transform.hpp"

namespace harsanyi {

/// Default half-window for windowed RMSE (a 51-sample neighbourhood).
inline constexpr std::size_t kDefaultHalfWindow = 25;

/// Exhaustive matching is the default up to this many players.
inline constexpr int kExhaustiveMatchingMaxPlayers = 20;

/// The M interactions with largest |I|, ties broken by ascending mask.
inline SalientSet extract_salient(const InteractionTable& interactions, std::size_t m) {
  const std::size_t total = interactions.size();
  if (m < 1 || m > total) {
    throw domain_error("salient count " + std::to_string(m) + " outside [1, " +
                       std::to_string(total) + "]");
  }
  const auto effects = interactions.entries();
  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0u);
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    return SalientSet::ranks_before({SubsetMask{a}, effects[a]}, {SubsetMask{b}, effects[b]});
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m),
                    order.end(), before);
  std::vector<SalientEntry> entries;
  entries.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    entries.push_back({SubsetMask{order[i]}, effects[order[i]]});
  }
  return SalientSet{interactions.n(), std::move(entries)};
}

/// Every |I(S)|, descending.
inline std::vector<double> strength_curve(const InteractionTable& interactions) {
  std::vector<double> out;
  out.reserve(interactions.size());
  for (double e : interactions.entries()) out.push_back(std::abs(e));
  std::sort(out.begin(), out.end(), std::greater<>{});
  return out;
}

/// out[i] = RMS of errors over [i - t, i + t], clamped at the series ends.
inline std::vector<double> windowed_rmse(std::span<const double> errors,
                                         std::size_t half_window = kDefaultHalfWindow) {
  if (errors.empty()) throw domain_error("windowed RMSE of an empty series");
  const std::size_t count = errors.size();
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t lo = i > half_window ? i - half_window : 0;
    const std::size_t hi = std::min(count - 1, i + half_window);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += errors[j] * errors[j];
    out[i] = std::sqrt(sum / static_cast<double>(hi - lo + 1));
  }
  return out;
}

/// Which masks a matching curve is computed on.
struct MatchingSample {
  std::optional<std::size_t> count;  // nullopt: every mask
  std::uint64_t seed = 0;

  static MatchingSample all() { return {}; }
  static MatchingSample random(std::size_t count, std::uint64_t seed) {
    return {count, seed};
  }
};

struct MatchingRecord {
  SubsetMask mask;
  double v_real = 0.0;
  double v_approx = 0.0;
  double error = 0.0;  // v_real - v_approx
  double windowed_rmse = 0.0;
};

/// Real vs. salient-only reconstructed outputs, sorted by v_real ascending.
struct MatchingCurve {
  std::size_t salient_count = 0;
  std::size_t half_window = kDefaultHalfWindow;
  std::vector<MatchingRecord> records;

  double mean_rmse() const {
    double sum = 0.0;
    for (const auto& r : records) sum += r.windowed_rmse;
    return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
  }
  double max_rmse() const {
    double best = 0.0;
    for (const auto& r : records) best = std::max(best, r.windowed_rmse);
    return best;
  }
};

inline MatchingCurve matching_curve(const ValueTable& values,
                                    const InteractionTable& interactions, std::size_t m,
                                    std::size_t half_window = kDefaultHalfWindow,
                                    const MatchingSample& sample = MatchingSample::all()) {
  const int n = values.n();
  if (interactions.n() != n) {
    throw domain_error("value table arity " + std::to_string(n) +
                       " does not match interaction arity " +
                       std::to_string(interactions.n()));
  }
  const std::size_t total = lattice_size(n);

  std::vector<SubsetMask> masks;
  if (!sample.count) {
    if (n > kExhaustiveMatchingMaxPlayers) {
      throw domain_error("exhaustive matching refused for n=" + std::to_string(n) +
                         "; use a sample budget");
    }
    masks.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
      masks.push_back(SubsetMask{static_cast<std::uint32_t>(i)});
    }
  } else {
    if (*sample.count < 1 || *sample.count > total) {
      throw domain_error("sample budget " + std::to_string(*sample.count) +
                         " outside [1, " + std::to_string(total) + "]");
    }
    std::mt19937_64 rng(sample.seed);
    masks = detail::draw_distinct_masks(rng, *sample.count, total);
  }

  const SalientSet salient = extract_salient(interactions, m);
  MatchingCurve curve;
  curve.salient_count = m;
  curve.half_window = half_window;
  curve.records.reserve(masks.size());
  for (SubsetMask s : masks) {
    MatchingRecord r;
    r.mask = s;
    r.v_real = values[s];
    r.v_approx = partial_sum(interactions, salient, s);
    r.error = r.v_real - r.v_approx;
    curve.records.push_back(r);
  }
  std::sort(curve.records.begin(), curve.records.end(),
            [](const MatchingRecord& a, const MatchingRecord& b) {
              if (a.v_real != b.v_real) return a.v_real < b.v_real;
              return a.mask < b.mask;
            });

  std::vector<double> errors;
  errors.reserve(curve.records.size());
  for (const auto& r : curve.records) errors.push_back(r.error);
  const auto rmse = windowed_rmse(errors, half_window);
  for (std::size_t i = 0; i < rmse.size(); ++i) curve.records[i].windowed_rmse = rmse[i];
  return curve;
}

/// Injective map from one input's players to shared-word slots.
class SharedPlayers {
 public:
  /// `pairs` holds (player index, slot). Slots must lie in [0, slot_count).
  SharedPlayers(int n, int slot_count, const std::vector<std::pair<int, int>>& pairs)
      : slot_count_(slot_count), slot_of_(static_cast<std::size_t>(n), -1) {
    check_player_count(n);
    if (slot_count < 0 || slot_count > 20) {
      throw domain_error("shared slot count " + std::to_string(slot_count) +
                         " outside [0, 20]");
    }
    std::vector<bool> used(static_cast<std::size_t>(slot_count), false);
    for (auto [player, slot] : pairs) {
      if (player < 0 || player >= n) {
        throw domain_error("shared player " + std::to_string(player) + " out of range");
      }
      if (slot < 0 || slot >= slot_count) {
        throw domain_error("shared slot " + std::to_string(slot) + " out of range");
      }
      if (slot_of_[static_cast<std::size_t>(player)] != -1) {
        throw domain_error("player " + std::to_string(player) + " mapped twice");
      }
      if (used[static_cast<std::size_t>(slot)]) {
        throw domain_error("mapping is not injective: slot " + std::to_string(slot) +
                           " reused");
      }
      used[static_cast<std::size_t>(slot)] = true;
      slot_of_[static_cast<std::size_t>(player)] = slot;
    }
  }

  int n() const { return static_cast<int>(slot_of_.size()); }
  int slot_count() const { return slot_count_; }

  /// Mask over slots, or nullopt if the mask touches a non-shared player.
  std::optional<SubsetMask> translate(SubsetMask mask) const {
    std::uint32_t out = 0;
    for (int i = 0; i < n(); ++i) {
      if (!mask.contains(i)) continue;
      const int slot = slot_of_[static_cast<std::size_t>(i)];
      if (slot < 0) return std::nullopt;
      out |= 1u << slot;
    }
    return SubsetMask{out};
  }

 private:
  int slot_count_;
  std::vector<int> slot_of_;
};

/// Nonnegative split of salient effects over every subset of the shared
/// words: [positive parts ‖ negative parts], each of length 2^|shared|.
class ConceptVector {
 public:
  ConceptVector(std::vector<double> pos, std::vector<double> neg)
      : pos_(std::move(pos)), neg_(std::move(neg)) {
    if (pos_.size() != neg_.size()) throw domain_error("concept halves differ in length");
    for (std::size_t i = 0; i < pos_.size(); ++i) {
      if (!(pos_[i] >= 0.0) || !(neg_[i] >= 0.0)) {
        throw domain_error("concept vector entries must be nonnegative");
      }
      if (pos_[i] * neg_[i] != 0.0) {
        throw domain_error("slot " + std::to_string(i) + " is both positive and negative");
      }
    }
  }

  std::size_t dim() const { return 2 * pos_.size(); }
  std::size_t slots() const { return pos_.size(); }
  const std::vector<double>& pos() const { return pos_; }
  const std::vector<double>& neg() const { return neg_; }

  bool is_zero() const {
    auto zero = [](double x) { return x == 0.0; };
    return std::all_of(pos_.begin(), pos_.end(), zero) &&
           std::all_of(neg_.begin(), neg_.end(), zero);
  }

  /// Concatenated 2d layout.
  std::vector<double> flat() const {
    std::vector<double> out(pos_);
    out.insert(out.end(), neg_.begin(), neg_.end());
    return out;
  }

 private:
  std::vector<double> pos_;
  std::vector<double> neg_;
};

inline ConceptVector build_concept_vector(const SalientSet& salient,
                                          const SharedPlayers& shared) {
  if (salient.source_n() != shared.n()) {
    throw domain_error("shared-player map arity does not match salient set");
  }
  const std::size_t d = lattice_size(shared.slot_count());
  std::vector<double> pos(d, 0.0);
  std::vector<double> neg(d, 0.0);
  for (const auto& entry : salient) {
    const auto slot = shared.translate(entry.mask);
    if (!slot) continue;  // involves a word the other input lacks
    pos[slot->bits] = std::max(entry.effect, 0.0);
    neg[slot->bits] = -std::min(entry.effect, 0.0);
  }
  return ConceptVector{std::move(pos), std::move(neg)};
}

class undefined_similarity : public domain_error {
 public:
  using domain_error::domain_error;
};

/// ‖min(a, b)‖₁ / ‖max(a, b)‖₁ over the concatenated vectors.
inline double jaccard_similarity(const ConceptVector& a, const ConceptVector& b) {
  if (a.dim() != b.dim()) {
    throw domain_error("concept vector dimensions differ: " + std::to_string(a.dim()) +
                       " vs " + std::to_string(b.dim()));
  }
  double lo = 0.0;
  double hi = 0.0;
  auto accumulate = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      lo += std::min(x[i], y[i]);
      hi += std::max(x[i], y[i]);
    }
  };
  accumulate(a.pos(), b.pos());
  accumulate(a.neg(), b.neg());
  if (hi == 0.0) throw undefined_similarity("similarity of two all-zero concept vectors");
  return lo / hi;
}

struct AttributionEntry {
  SubsetMask mask;
  std::string concept_label;
  double effect = 0.0;
};

/// Salient concepts that push the model toward the (wrong) target.
struct AttributionReport {
  std::string target;
  std::optional<double> target_value;  // v(x) on the unmasked input
  std::vector<AttributionEntry> entries;
};

inline AttributionReport attribute_error(const InteractionTable& interactions, std::size_t m,
                                         const PlayerSet& players) {
  if (players.size() != interactions.n()) {
    throw domain_error("label count does not match table arity");
  }
  AttributionReport report;
  for (const auto& entry : extract_salient(interactions, m)) {
    if (entry.effect > 0.0) {
      report.entries.push_back({entry.mask, players.render(entry.mask), entry.effect});
    }
  }
  // Salient order is already |effect| descending with ascending-mask ties,
  // which equals effect-descending once negatives are dropped.
  return report;
}

}  // namespace harsanyi
