#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "harsanyi/transform.hpp"

using namespace harsanyi;

namespace {

std::vector<double> random_entries(int n, std::mt19937_64& rng, double scale = 1000.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<double> out(lattice_size(n));
  for (auto& x : out) x = dist(rng);
  return out;
}

SalientSet everything(const InteractionTable& t) {
  std::vector<SalientEntry> entries;
  for (std::size_t i = 0; i < t.size(); ++i) {
    entries.push_back({SubsetMask{static_cast<std::uint32_t>(i)}, t.entries()[i]});
  }
  std::sort(entries.begin(), entries.end(), SalientSet::ranks_before);
  return SalientSet{t.n(), std::move(entries)};
}

double relative_gap(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace

TEST(mobius_inverse, constant_table_has_only_the_empty_interaction) {
  const ValueTable v(4, std::vector<double>(16, 3.5));
  for (const auto& table : {mobius_inverse(v), mobius_inverse_reference(v)}) {
    EXPECT_EQ(table[SubsetMask{0}], 3.5);
    for (std::uint32_t s = 1; s < 16; ++s) EXPECT_EQ(table[SubsetMask{s}], 0.0) << s;
  }
}

TEST(mobius_inverse, two_player_example) {
  const ValueTable v(2, {0.0, 1.0, 2.0, 5.0});
  const std::vector<double> expected{0.0, 1.0, 2.0, 2.0};
  for (const auto& table : {mobius_inverse(v), mobius_inverse_reference(v)}) {
    for (std::uint32_t s = 0; s < 4; ++s) EXPECT_DOUBLE_EQ(table[SubsetMask{s}], expected[s]);
  }
}

TEST(mobius_inverse, and_function) {
  const ValueTable v(2, {0.0, 0.0, 0.0, 1.0});
  const std::vector<double> expected{0.0, 0.0, 0.0, 1.0};
  for (const auto& table : {mobius_inverse(v), mobius_inverse_reference(v)}) {
    for (std::uint32_t s = 0; s < 4; ++s) EXPECT_EQ(table[SubsetMask{s}], expected[s]);
  }
}

TEST(mobius_inverse, empty_entry_equals_empty_value) {
  std::mt19937_64 rng(3);
  const ValueTable v(6, random_entries(6, rng));
  EXPECT_EQ(mobius_inverse(v)[SubsetMask{0}], v[SubsetMask{0}]);
}

TEST(mobius_inverse_reference, refuses_large_n) {
  const ValueTable big(17, std::vector<double>(lattice_size(17), 0.0));
  EXPECT_THROW(mobius_inverse_reference(big), domain_error);
  const ValueTable ok(16, std::vector<double>(lattice_size(16), 1.0));
  EXPECT_NO_THROW(mobius_inverse_reference(ok));
}

TEST(mobius_inverse_reference, matches_fast_form_on_random_tables) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const ValueTable v(8, random_entries(8, rng));
    const auto fast = mobius_inverse(v);
    const auto slow = mobius_inverse_reference(v);
    for (std::size_t i = 0; i < fast.size(); ++i) {
      ASSERT_NEAR(fast.entries()[i], slow.entries()[i], 1e-9) << "trial " << trial << " mask " << i;
    }
  }
  for (int n = 0; n <= 10; ++n) {
    const ValueTable v(n, random_entries(n, rng));
    const auto fast = mobius_inverse(v);
    const auto slow = mobius_inverse_reference(v);
    for (std::size_t i = 0; i < fast.size(); ++i) {
      ASSERT_NEAR(fast.entries()[i], slow.entries()[i], 1e-9) << "n " << n << " mask " << i;
    }
  }
}

TEST(zeta_transform, examples) {
  std::vector<double> only_empty(8, 0.0);
  only_empty[0] = -2.25;
  const auto flat = zeta_transform(InteractionTable(3, only_empty));
  for (double x : flat.entries()) EXPECT_EQ(x, -2.25);

  const auto v = zeta_transform(InteractionTable(2, {0.0, 1.0, 2.0, 2.0}));
  const std::vector<double> expected{0.0, 1.0, 2.0, 5.0};
  for (std::uint32_t s = 0; s < 4; ++s) EXPECT_DOUBLE_EQ(v[SubsetMask{s}], expected[s]);
}

TEST(zeta_transform, round_trip_is_identity) {
  std::mt19937_64 rng(99);
  for (int n = 0; n <= 12; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const ValueTable v(n, random_entries(n, rng));
      const auto back = zeta_transform(mobius_inverse(v));
      for (std::size_t i = 0; i < v.size(); ++i) {
        ASSERT_LT(relative_gap(back.entries()[i], v.entries()[i]), 1e-9) << n << "/" << i;
      }
    }
  }
}

TEST(transform, threaded_form_is_bit_identical) {
  std::mt19937_64 rng(8);
  for (int n : {3, 14, 17}) {
    const ValueTable v(n, random_entries(n, rng));
    const auto seq = mobius_inverse(v, 1);
    for (int threads : {2, 3, 8}) {
      EXPECT_EQ(mobius_inverse(v, threads), seq) << n << "/" << threads;
      EXPECT_EQ(zeta_transform(seq, threads), zeta_transform(seq, 1)) << n << "/" << threads;
    }
  }
}

TEST(partial_sum, examples) {
  const InteractionTable t(2, {0.0, 1.0, 2.0, 2.0});
  const auto v = zeta_transform(t);
  const auto all = everything(t);
  for (std::uint32_t s = 0; s < 4; ++s) {
    EXPECT_DOUBLE_EQ(partial_sum(t, all, SubsetMask{s}), v[SubsetMask{s}]);
  }
  const SalientSet none(2, {});
  for (std::uint32_t s = 0; s < 4; ++s) EXPECT_EQ(partial_sum(t, none, SubsetMask{s}), 0.0);

  const SalientSet two(2, {{SubsetMask{0b11}, 2.0}, {SubsetMask{0b01}, 1.0}});
  EXPECT_DOUBLE_EQ(partial_sum(t, two, SubsetMask{0b11}), 3.0);
}

TEST(partial_sum, arity_mismatch) {
  const InteractionTable t(2, {0.0, 1.0, 2.0, 2.0});
  const SalientSet other(3, {{SubsetMask{1}, 1.0}});
  EXPECT_THROW(partial_sum(t, other, SubsetMask{1}), domain_error);
  EXPECT_THROW(partial_sum(t, SalientSet(2, {}), SubsetMask{4}), domain_error);
}

TEST(partial_sum, full_lattice_matches_zeta_and_entries_act_on_supersets_only) {
  std::mt19937_64 rng(17);
  const int n = 6;
  const InteractionTable t(n, random_entries(n, rng, 10.0));
  const auto v = zeta_transform(t);
  const auto all = everything(t);
  double worst = 0.0;
  for (std::uint32_t s = 0; s < lattice_size(n); ++s) {
    worst = std::max(worst, std::abs(v[SubsetMask{s}] - partial_sum(t, all, SubsetMask{s})));
  }
  EXPECT_LT(worst, 1e-9);

  // Growing the salient set by one entry moves only the supersets of its mask.
  const auto& entries = all.entries();
  for (std::size_t k = 0; k + 1 < 12; ++k) {
    const SalientSet before(n, {entries.begin(), entries.begin() + static_cast<long>(k)});
    const SalientSet after(n, {entries.begin(), entries.begin() + static_cast<long>(k + 1)});
    const SubsetMask added = entries[k].mask;
    for (std::uint32_t s = 0; s < lattice_size(n); ++s) {
      const SubsetMask q{s};
      const double delta = partial_sum(t, after, q) - partial_sum(t, before, q);
      if (added.is_subset_of(q)) {
        EXPECT_NEAR(delta, entries[k].effect, 1e-12);
      } else {
        EXPECT_EQ(delta, 0.0);
      }
    }
  }
}

TEST(mobius_inverse, recovers_planted_sparse_support) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10;
    const int k = 1 + static_cast<int>(rng() % 30);
    std::vector<double> sparse(lattice_size(n), 0.0);
    for (int placed = 0; placed < k;) {
      const auto m = rng() % lattice_size(n);
      if (sparse[m] != 0.0) continue;
      sparse[m] = std::uniform_real_distribution<double>(0.1, 5.0)(rng) * ((rng() & 1) ? 1 : -1);
      ++placed;
    }
    const auto recovered = mobius_inverse(zeta_transform(InteractionTable(n, sparse)));
    int nonzero = 0;
    for (std::size_t i = 0; i < sparse.size(); ++i) {
      if (sparse[i] != 0.0) {
        ++nonzero;
        EXPECT_NEAR(recovered.entries()[i], sparse[i], 1e-9);
      } else {
        EXPECT_LT(std::abs(recovered.entries()[i]), 1e-9);
      }
    }
    EXPECT_EQ(nonzero, k);
  }
}
