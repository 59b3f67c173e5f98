#pragma once

// Exact conversion between value tables and Harsanyi interaction tables.
//
//   I(S) = sum_{T ⊆ S} (-1)^{|S|-|T|} v(T)     (Möbius inversion)
//   v(S) = sum_{T ⊆ S} I(T)                     (zeta transform)
//
// The fast forms run one in-place pass per player, O(n 2^n). The reference
// form is the literal double sum (3^n terms) and is kept as an oracle.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "harsanyi/core.hpp"

namespace harsanyi {

/// Largest n accepted by mobius_inverse_reference.
inline constexpr int kReferenceMaxPlayers = 16;

namespace detail {

enum class LatticeSign { plus, minus };

// One layer of the subset-sum transform restricted to blocks [first, last).
// A block is a pair of half-runs of length `step`; entries in the upper half
// have the layer's bit set.
template <LatticeSign Sign>
void subset_sum_layer(std::span<double> data, std::size_t step,
                      std::size_t first_block, std::size_t last_block) {
  for (std::size_t b = first_block; b < last_block; ++b) {
    double* lo = data.data() + b * 2 * step;
    double* hi = lo + step;
    for (std::size_t j = 0; j < step; ++j) {
      if constexpr (Sign == LatticeSign::plus) {
        hi[j] += lo[j];
      } else {
        hi[j] -= lo[j];
      }
    }
  }
}

template <LatticeSign Sign>
void subset_sum_in_place(std::span<double> data, int n, int threads) {
  const std::size_t size = data.size();
  const auto workers = static_cast<std::size_t>(std::max(threads, 1));
  for (int bit = 0; bit < n; ++bit) {
    const std::size_t step = std::size_t{1} << bit;
    const std::size_t blocks = size / (2 * step);
    // Small layers are not worth a thread fan-out. Every entry is updated by
    // exactly one addition per layer, so the split does not change results.
    if (workers == 1 || size < (std::size_t{1} << 14)) {
      subset_sum_layer<Sign>(data, step, 0, blocks);
      continue;
    }
    if (blocks >= workers) {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t first = blocks * w / workers;
        const std::size_t last = blocks * (w + 1) / workers;
        pool.emplace_back([=] { subset_sum_layer<Sign>(data, step, first, last); });
      }
    } else {
      // Few wide blocks: split inside each half-run instead.
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t first = step * w / workers;
        const std::size_t last = step * (w + 1) / workers;
        pool.emplace_back([=] {
          for (std::size_t b = 0; b < blocks; ++b) {
            double* lo = data.data() + b * 2 * step;
            double* hi = lo + step;
            for (std::size_t j = first; j < last; ++j) {
              if constexpr (Sign == LatticeSign::plus) {
                hi[j] += lo[j];
              } else {
                hi[j] -= lo[j];
              }
            }
          }
        });
      }
    }
  }
}

}  // namespace detail

/// Harsanyi interactions of a complete value table. `threads` > 1 splits each
/// layer across threads; the output is bit-identical to the sequential form.
inline InteractionTable mobius_inverse(const ValueTable& values, int threads = 1) {
  std::vector<double> work(values.entries().begin(), values.entries().end());
  detail::subset_sum_in_place<detail::LatticeSign::minus>(work, values.n(), threads);
  return InteractionTable{values.n(), std::move(work)};
}

/// Literal evaluation of the alternating subset sum for every S.
inline InteractionTable mobius_inverse_reference(const ValueTable& values) {
  const int n = values.n();
  if (n > kReferenceMaxPlayers) {
    throw domain_error("reference Möbius inversion refused for n=" +
                       std::to_string(n) + " (limit " +
                       std::to_string(kReferenceMaxPlayers) + ")");
  }
  std::vector<double> out(lattice_size(n));
  for (std::size_t s = 0; s < out.size(); ++s) {
    const SubsetMask whole{static_cast<std::uint32_t>(s)};
    double sum = 0.0;
    for (SubsetMask part : subsets_of(whole)) {
      const bool odd = ((whole.size() - part.size()) & 1) != 0;
      sum += odd ? -values[part] : values[part];
    }
    out[s] = sum;
  }
  return InteractionTable{n, std::move(out)};
}

/// Reconstruct every v(S) as the sum of the interactions triggered by S.
inline ValueTable zeta_transform(const InteractionTable& interactions, int threads = 1) {
  std::vector<double> work(interactions.entries().begin(),
                           interactions.entries().end());
  detail::subset_sum_in_place<detail::LatticeSign::plus>(work, interactions.n(), threads);
  return ValueTable{interactions.n(), std::move(work)};
}

/// Truncated reconstruction: sum of the salient effects whose masks lie in
/// `query`.
inline double partial_sum(const InteractionTable& interactions,
                          const SalientSet& salient, SubsetMask query) {
  if (salient.source_n() != interactions.n()) {
    throw domain_error("salient set arity " + std::to_string(salient.source_n()) +
                       " does not match table arity " +
                       std::to_string(interactions.n()));
  }
  check_mask(query, interactions.n());
  double sum = 0.0;
  for (const auto& entry : salient) {
    if (entry.mask.is_subset_of(query)) sum += entry.effect;
  }
  return sum;
}

}  // namespace harsanyi
