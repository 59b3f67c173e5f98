#pragma once

// Domain types shared by every module: players, subset masks, and dense
// tables over the subset lattice of n players.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace harsanyi {

/// Largest player count supported by dense lattice tables (2^24 doubles ~ 128 MB).
inline constexpr int kMaxPlayers = 24;

class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Set of kept (unmasked) players. Bit i set means player i is kept.
struct SubsetMask {
  std::uint32_t bits = 0;

  constexpr SubsetMask() = default;
  constexpr explicit SubsetMask(std::uint32_t b) : bits(b) {}

  constexpr int size() const { return std::popcount(bits); }
  constexpr bool empty() const { return bits == 0; }
  constexpr bool contains(int player) const { return (bits >> player) & 1u; }
  constexpr bool is_subset_of(SubsetMask other) const {
    return (bits & ~other.bits) == 0;
  }

  friend constexpr bool operator==(SubsetMask, SubsetMask) = default;
  friend constexpr auto operator<=>(SubsetMask, SubsetMask) = default;
};

/// Number of lattice entries for n players.
constexpr std::size_t lattice_size(int n) { return std::size_t{1} << n; }

constexpr SubsetMask full_mask(int n) {
  return SubsetMask{static_cast<std::uint32_t>(lattice_size(n) - 1)};
}

inline void check_player_count(int n, int max_players = kMaxPlayers) {
  if (n < 0 || n > max_players) {
    throw domain_error("player count " + std::to_string(n) +
                       " outside [0, " + std::to_string(max_players) + "]");
  }
}

inline void check_mask(SubsetMask mask, int n) {
  if (static_cast<std::size_t>(mask.bits) >= lattice_size(n)) {
    throw domain_error("mask " + std::to_string(mask.bits) +
                       " out of range for n=" + std::to_string(n));
  }
}

/// Bitwise complement of `mask` within n bits (N \ T).
inline SubsetMask complement(SubsetMask mask, int n) {
  check_player_count(n);
  check_mask(mask, n);
  return SubsetMask{mask.bits ^ full_mask(n).bits};
}

/// Range over every submask of a mask, in ascending integer order.
/// Includes the empty mask and the mask itself.
class Submasks {
 public:
  class iterator {
   public:
    using value_type = SubsetMask;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(std::uint32_t whole, std::uint32_t current, bool done)
        : whole_(whole), current_(current), done_(done) {}

    SubsetMask operator*() const { return SubsetMask{current_}; }

    iterator& operator++() {
      if (current_ == whole_) {
        done_ = true;
      } else {
        // Next submask in ascending order: add one in the "free" bits.
        current_ = (current_ - whole_) & whole_;
      }
      return *this;
    }
    iterator operator++(int) {
      auto tmp = *this;
      ++*this;
      return tmp;
    }

    bool operator==(std::default_sentinel_t) const { return done_; }

   private:
    std::uint32_t whole_ = 0;
    std::uint32_t current_ = 0;
    bool done_ = true;
  };

  explicit Submasks(SubsetMask whole) : whole_(whole.bits) {}

  iterator begin() const { return iterator{whole_, 0, false}; }
  std::default_sentinel_t end() const { return {}; }

  std::size_t size() const { return std::size_t{1} << std::popcount(whole_); }

 private:
  std::uint32_t whole_;
};

inline Submasks subsets_of(SubsetMask mask) { return Submasks{mask}; }

/// Ordered, position-identified variable names. Duplicated labels are
/// distinct players.
class PlayerSet {
 public:
  explicit PlayerSet(std::vector<std::string> labels,
                     int max_players = kMaxPlayers)
      : labels_(std::move(labels)) {
    if (max_players > kMaxPlayers) {
      throw domain_error("max_players may not exceed " +
                         std::to_string(kMaxPlayers));
    }
    check_player_count(static_cast<int>(labels_.size()), max_players);
  }

  /// Players named x1..xn.
  static PlayerSet numbered(int n) {
    check_player_count(n);
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) labels.push_back("x" + std::to_string(i));
    return PlayerSet{std::move(labels)};
  }

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& operator[](int i) const {
    return labels_.at(static_cast<std::size_t>(i));
  }
  const std::vector<std::string>& labels() const { return labels_; }

  /// "{green, hand}" style rendering of a concept.
  std::string render(SubsetMask mask) const {
    check_mask(mask, size());
    std::string out = "{";
    bool first = true;
    for (int i = 0; i < size(); ++i) {
      if (!mask.contains(i)) continue;
      if (!first) out += ", ";
      out += labels_[static_cast<std::size_t>(i)];
      first = false;
    }
    out += "}";
    return out;
  }

 private:
  std::vector<std::string> labels_;
};

namespace detail {
struct value_tag {};
struct interaction_tag {};
}  // namespace detail

/// Complete, immutable map from all 2^n masks to finite reals.
template <class Tag>
class LatticeTable {
 public:
  LatticeTable(int n, std::vector<double> entries)
      : n_(n), entries_(std::move(entries)) {
    check_player_count(n_);
    if (entries_.size() != lattice_size(n_)) {
      throw domain_error("table for n=" + std::to_string(n_) + " needs " +
                         std::to_string(lattice_size(n_)) + " entries, got " +
                         std::to_string(entries_.size()));
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!std::isfinite(entries_[i])) {
        throw domain_error("non-finite entry at mask " + std::to_string(i));
      }
    }
  }

  int n() const { return n_; }
  std::size_t size() const { return entries_.size(); }

  double operator[](SubsetMask mask) const { return entries_[mask.bits]; }
  double at(SubsetMask mask) const {
    check_mask(mask, n_);
    return entries_[mask.bits];
  }

  std::span<const double> entries() const { return entries_; }

  friend bool operator==(const LatticeTable&, const LatticeTable&) = default;

 private:
  int n_;
  std::vector<double> entries_;
};

/// v(x_T) for every T ⊆ N.
using ValueTable = LatticeTable<detail::value_tag>;
/// Harsanyi effects I(S|x) for every S ⊆ N.
using InteractionTable = LatticeTable<detail::interaction_tag>;

struct SalientEntry {
  SubsetMask mask;
  double effect = 0.0;

  friend bool operator==(const SalientEntry&, const SalientEntry&) = default;
};

/// Top-M interactions by |effect|, descending, ties by ascending mask.
class SalientSet {
 public:
  SalientSet(int source_n, std::vector<SalientEntry> entries)
      : source_n_(source_n), entries_(std::move(entries)) {
    check_player_count(source_n_);
    if (entries_.size() > lattice_size(source_n_)) {
      throw domain_error("salient set larger than the lattice");
    }
    std::vector<bool> seen(lattice_size(source_n_), false);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      check_mask(e.mask, source_n_);
      if (seen[e.mask.bits]) {
        throw domain_error("duplicate mask " + std::to_string(e.mask.bits) +
                           " in salient set");
      }
      seen[e.mask.bits] = true;
      if (i > 0 && !ranks_before(entries_[i - 1], e)) {
        throw domain_error("salient entries not in |effect|-descending order");
      }
    }
  }

  /// Strict ranking order used by SalientSet.
  static bool ranks_before(const SalientEntry& a, const SalientEntry& b) {
    const double ma = std::abs(a.effect);
    const double mb = std::abs(b.effect);
    if (ma != mb) return ma > mb;
    return a.mask.bits < b.mask.bits;
  }

  int source_n() const { return source_n_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<SalientEntry>& entries() const { return entries_; }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  int source_n_;
  std::vector<SalientEntry> entries_;
};

}  // namespace harsanyi
