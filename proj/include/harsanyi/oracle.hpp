#pragma once

// Black-box value functions over masked inputs and exhaustive evaluation.
//
// An Oracle answers v(x_T) for a kept set T. How the players outside T are
// masked is the source's business; the core never builds masked inputs.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "harsanyi/core.hpp"
#include "harsanyi/transform.hpp"

namespace harsanyi {

/// Probabilities are clamped to [eps, 1 - eps] before the log-odds transform.
inline constexpr double kProbabilityEpsilon = 1e-12;

/// log(p / (1 - p)), with saturation guarded by clamping.
inline double log_odds(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw domain_error("probability " + std::to_string(p) + " outside [0, 1]");
  }
  // 1 - p is exact for p >= 0.5, so both tails saturate symmetrically.
  return std::log(std::max(p, kProbabilityEpsilon)) -
         std::log(std::max(1.0 - p, kProbabilityEpsilon));
}

enum class FailureKind { oracle, transport, protocol };

inline const char* to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::transport: return "transport";
    case FailureKind::protocol: return "protocol";
    default: return "oracle";
  }
}

/// A query could not be answered.
class oracle_error : public std::runtime_error {
 public:
  explicit oracle_error(const std::string& what,
                        std::optional<SubsetMask> mask = std::nullopt,
                        FailureKind kind = FailureKind::oracle)
      : std::runtime_error(what), mask_(mask), kind_(kind) {}

  std::optional<SubsetMask> mask() const { return mask_; }
  FailureKind kind() const { return kind_; }

 private:
  std::optional<SubsetMask> mask_;
  FailureKind kind_;
};

/// The connection to an external host failed (unreachable, closed, timeout).
class transport_error : public oracle_error {
 public:
  explicit transport_error(const std::string& what,
                           std::optional<SubsetMask> mask = std::nullopt)
      : oracle_error(what, mask, FailureKind::transport) {}
};

/// The host violated the wire protocol (bad handshake, malformed or
/// non-finite response, unknown id).
class protocol_error : public oracle_error {
 public:
  explicit protocol_error(const std::string& what,
                          std::optional<SubsetMask> mask = std::nullopt)
      : oracle_error(what, mask, FailureKind::protocol) {}
};

/// evaluate_all gave up after exhausting retries.
class evaluation_error : public std::runtime_error {
 public:
  evaluation_error(const std::string& what, SubsetMask mask,
                   std::size_t completed, FailureKind kind)
      : std::runtime_error(what), mask_(mask), completed_(completed), kind_(kind) {}

  SubsetMask mask() const { return mask_; }
  std::size_t completed() const { return completed_; }
  FailureKind kind() const { return kind_; }

 private:
  SubsetMask mask_;
  std::size_t completed_;
  FailureKind kind_;
};

/// v: SubsetMask -> real. Implementations must be deterministic and must
/// tolerate concurrent calls.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual int size() const = 0;

  virtual std::vector<std::string> labels() const {
    if (size() == 0) return {};
    return PlayerSet::numbered(size()).labels();
  }

  virtual double query(SubsetMask keep) = 0;

  /// Answers `keep[i]` into `out[i]`. Failures carry the offending mask.
  virtual void query_batch(std::span<const SubsetMask> keep, std::span<double> out) {
    for (std::size_t i = 0; i < keep.size(); ++i) {
      try {
        out[i] = query(keep[i]);
      } catch (const oracle_error& e) {
        if (e.mask()) throw;
        throw oracle_error(e.what(), keep[i], e.kind());
      } catch (const std::exception& e) {
        throw oracle_error(e.what(), keep[i]);
      }
    }
  }

  /// Batch size evaluate_all hands to query_batch.
  virtual std::size_t preferred_batch() const { return 256; }
};

/// Oracle backed by a preloaded value table.
class TableOracle final : public Oracle {
 public:
  explicit TableOracle(ValueTable table, std::vector<std::string> labels = {})
      : table_(std::move(table)), labels_(std::move(labels)) {
    if (!labels_.empty() && static_cast<int>(labels_.size()) != table_.n()) {
      throw domain_error("label count does not match table arity");
    }
  }

  int size() const override { return table_.n(); }
  std::vector<std::string> labels() const override {
    return labels_.empty() ? Oracle::labels() : labels_;
  }
  double query(SubsetMask keep) override { return table_.at(keep); }

 private:
  ValueTable table_;
  std::vector<std::string> labels_;
};

struct EvaluateOptions {
  int parallelism = 1;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{10};
};

/// Queries every mask once and assembles the table by mask index.
inline ValueTable evaluate_all(Oracle& oracle, const EvaluateOptions& options = {}) {
  const int n = oracle.size();
  check_player_count(n);
  if (options.parallelism < 1) {
    throw domain_error("parallelism must be at least 1");
  }
  const std::size_t total = lattice_size(n);
  const std::size_t batch = std::max<std::size_t>(1, oracle.preferred_batch());
  const std::size_t chunks = (total + batch - 1) / batch;

  std::vector<double> values(total, 0.0);
  std::atomic<std::size_t> next_chunk{0};
  std::atomic<std::size_t> completed{0};
  std::atomic<bool> abort{false};
  std::mutex failure_mutex;
  std::optional<evaluation_error> failure;

  auto work = [&] {
    std::vector<SubsetMask> masks;
    while (!abort.load()) {
      const std::size_t c = next_chunk.fetch_add(1);
      if (c >= chunks) return;
      const std::size_t first = c * batch;
      const std::size_t count = std::min(batch, total - first);
      masks.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        masks[i] = SubsetMask{static_cast<std::uint32_t>(first + i)};
      }
      std::span<double> out{values.data() + first, count};

      auto backoff = options.initial_backoff;
      for (int attempt = 0;; ++attempt) {
        try {
          oracle.query_batch(masks, out);
          for (double v : out) {
            if (!std::isfinite(v)) throw oracle_error("oracle returned a non-finite value");
          }
          completed.fetch_add(count);
          break;
        } catch (const std::exception& e) {
          if (attempt < options.max_retries && !abort.load()) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
            continue;
          }
          SubsetMask where = masks.front();
          FailureKind kind = FailureKind::oracle;
          if (const auto* oe = dynamic_cast<const oracle_error*>(&e)) {
            if (oe->mask()) where = *oe->mask();
            kind = oe->kind();
          }
          std::lock_guard lock(failure_mutex);
          if (!failure || where < failure->mask()) {
            failure.emplace("query for mask " + std::to_string(where.bits) +
                                " failed after " + std::to_string(attempt + 1) +
                                " attempts: " + e.what(),
                            where, 0, kind);
          }
          abort.store(true);
          return;
        }
      }
    }
  };

  if (options.parallelism == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < options.parallelism; ++i) pool.emplace_back(work);
  }

  if (failure) {
    throw evaluation_error(failure->what() + std::string{" ("} +
                               std::to_string(completed.load()) + " of " +
                               std::to_string(total) + " queries completed)",
                           failure->mask(), completed.load(), failure->kind());
  }
  return ValueTable{n, std::move(values)};
}

/// How planted effects are signed.
enum class SignPolicy { mixed, positive, negative };

struct PlantedConfig {
  int n = 0;
  std::size_t salient_count = 0;  // K
  std::uint64_t seed = 0;
  double sigma = 0.0;  // std of the dense Gaussian dither on every interaction
  double effect_floor = 0.1;
  double effect_ceiling = 5.0;
  SignPolicy sign = SignPolicy::mixed;
  std::size_t background_count = 0;  // small extra terms outside the ground truth
  double background_ceiling = 0.05;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, 1) from the top 53 bits; portable across standard libraries.
inline double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Standard normal, a pure function of (seed, mask).
inline double hashed_normal(std::uint64_t seed, std::uint32_t mask) {
  const std::uint64_t a = splitmix64(seed ^ splitmix64(mask + 0x51ed2701ULL));
  const std::uint64_t b = splitmix64(a);
  const double u1 = 1.0 - unit_double(a);  // (0, 1]
  const double u2 = unit_double(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// `count` distinct masks drawn uniformly from [0, lattice).
inline std::vector<SubsetMask> draw_distinct_masks(std::mt19937_64& rng, std::size_t count,
                                                   std::size_t lattice) {
  std::vector<SubsetMask> out;
  out.reserve(count);
  if (count * 2 > lattice) {
    // Dense draw: partial Fisher-Yates over the whole lattice.
    std::vector<std::uint32_t> all(lattice);
    for (std::size_t i = 0; i < lattice; ++i) all[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (lattice - i));
      std::swap(all[i], all[j]);
      out.push_back(SubsetMask{all[i]});
    }
    return out;
  }
  std::unordered_set<std::uint32_t> seen;
  while (out.size() < count) {
    const auto m = static_cast<std::uint32_t>(rng() % lattice);
    if (seen.insert(m).second) out.push_back(SubsetMask{m});
  }
  return out;
}

}  // namespace detail

/// Synthetic oracle with a known sparse interaction table.
///
/// v(S) = sum of planted effects inside S + sum of background terms inside S
///        + sum of dither(T) over T ⊆ S.
/// With sigma = 0 and no background terms the oracle reproduces the ground
/// truth exactly under Möbius inversion.
class PlantedModel final : public Oracle {
 public:
  explicit PlantedModel(const PlantedConfig& config) : config_(config),
      ground_truth_(0, {0.0}) {
    check_player_count(config.n);
    const std::size_t lattice = lattice_size(config.n);
    if (config.salient_count > lattice) {
      throw domain_error("cannot plant " + std::to_string(config.salient_count) +
                         " interactions on a lattice of " + std::to_string(lattice));
    }
    if (config.salient_count + config.background_count > lattice) {
      throw domain_error("planted plus background terms exceed the lattice");
    }
    if (!(config.sigma >= 0.0) || !(config.effect_floor >= 0.0) ||
        !(config.effect_ceiling >= config.effect_floor) ||
        !(config.background_ceiling >= 0.0)) {
      throw domain_error("invalid planted model magnitudes");
    }

    std::mt19937_64 rng(config.seed);
    const auto masks = detail::draw_distinct_masks(
        rng, config.salient_count + config.background_count, lattice);
    std::vector<double> truth(lattice, 0.0);
    for (std::size_t i = 0; i < masks.size(); ++i) {
      const bool background = i >= config.salient_count;
      const double u = detail::unit_double(rng());
      const double magnitude =
          background ? config.background_ceiling * (1.0 - u)  // (0, ceiling]
                     : config.effect_floor + u * (config.effect_ceiling - config.effect_floor);
      const bool negative = sign_is_negative(rng, background ? SignPolicy::mixed : config.sign);
      const double effect = negative ? -magnitude : magnitude;
      if (background) {
        background_.push_back({masks[i], effect});
      } else {
        truth[masks[i].bits] = effect;
        terms_.push_back({masks[i], effect});
      }
    }
    ground_truth_ = InteractionTable{config.n, std::move(truth)};

    if (config.sigma > 0.0) {
      std::vector<double> dither(lattice);
      for (std::size_t m = 0; m < lattice; ++m) {
        dither[m] = config.sigma *
                    detail::hashed_normal(config.seed, static_cast<std::uint32_t>(m));
      }
      const auto summed = zeta_transform(InteractionTable{config.n, std::move(dither)});
      dither_values_.assign(summed.entries().begin(), summed.entries().end());
    }
  }

  int size() const override { return config_.n; }

  double query(SubsetMask keep) override {
    check_mask(keep, config_.n);
    double sum = 0.0;
    for (const auto& t : terms_) {
      if (t.mask.is_subset_of(keep)) sum += t.effect;
    }
    for (const auto& t : background_) {
      if (t.mask.is_subset_of(keep)) sum += t.effect;
    }
    if (!dither_values_.empty()) sum += dither_values_[keep.bits];
    return sum;
  }

  const PlantedConfig& config() const { return config_; }

  /// Exactly K nonzero entries (the salient terms only).
  const InteractionTable& ground_truth() const { return ground_truth_; }

  /// Planted salient terms in draw order.
  const std::vector<SalientEntry>& planted_terms() const { return terms_; }
  const std::vector<SalientEntry>& background_terms() const { return background_; }

 private:
  static bool sign_is_negative(std::mt19937_64& rng, SignPolicy policy) {
    const bool coin = (rng() >> 63) != 0;
    switch (policy) {
      case SignPolicy::positive: return false;
      case SignPolicy::negative: return true;
      default: return coin;
    }
  }

  PlantedConfig config_;
  InteractionTable ground_truth_;
  std::vector<SalientEntry> terms_;
  std::vector<SalientEntry> background_;
  std::vector<double> dither_values_;
};

/// Seeded planted model with K salient effects uniform in ±[0.1, 5.0].
inline PlantedModel make_planted(int n, std::size_t k, std::uint64_t seed,
                                 double sigma = 0.0) {
  PlantedConfig config;
  config.n = n;
  config.salient_count = k;
  config.seed = seed;
  config.sigma = sigma;
  return PlantedModel{config};
}

}  // namespace harsanyi
