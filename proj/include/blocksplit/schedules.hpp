#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace blocksplit {

/// Sorted, duplicate-free list of 0-based operator indices.
using Block = std::vector<std::size_t>;

/// The sequence (I_n) of activated operator blocks over {0, ..., m-1}
/// together with its covering constant K.
///
/// Blocks are produced by a deterministic generator n -> I_n, so infinite
/// horizons are representable. Copies share state; block(n) is safe to call
/// concurrently.
class BlockSchedule {
public:
  using Generator = std::function<Block(std::size_t n)>;

  /// `generator` must be a pure function of n. Every block it returns is
  /// normalized (sorted, deduplicated) and checked for nonemptiness and range.
  BlockSchedule(std::size_t m, std::size_t K, Generator generator, std::string kind = "custom");

  std::size_t operator_count() const { return m_; }
  std::size_t covering_constant() const { return K_; }
  const std::string& kind() const { return kind_; }

  Block block(std::size_t n) const;
  bool contains(std::size_t n, std::size_t i) const;

private:
  std::size_t m_;
  std::size_t K_;
  std::shared_ptr<const Generator> generator_;
  std::string kind_;
};

/// Consecutive index windows of width `block_size`, cycled; K is the period
/// ceil(m / block_size). The final window is shorter when block_size does
/// not divide m.
BlockSchedule make_cyclic(std::size_t m, std::size_t block_size);

/// Seeded random nonempty blocks. Any index not activated during the
/// previous K-1 steps is inserted into the current block, so every
/// K-window covers {0, ..., m-1}.
BlockSchedule make_quasicyclic_random(std::size_t m, std::size_t K, std::uint64_t seed);

/// I_n = blocks[n mod blocks.size()], with the given K (not validated here).
BlockSchedule make_explicit(std::size_t m, std::size_t K, std::vector<Block> blocks);

/// I_n = {0, ..., m-1} for all n, K = 1.
BlockSchedule make_full(std::size_t m);

struct CoveringReport {
  bool ok = true;
  /// First window start n whose window {n, ..., n+K-1} misses an index.
  std::optional<std::size_t> window_start;
  std::optional<std::size_t> missing_index;
};

/// Checks that every K-window inside blocks 0..horizon-1 covers all
/// indices. Requires horizon >= K.
CoveringReport validate_covering(const BlockSchedule& s, std::size_t horizon);

/// Throws CoveringError carrying the violation, if any.
void require_covering(const BlockSchedule& s, std::size_t horizon);

/// c(i, n) = max{k in {n-K+1, ..., n} : i in I_k}. Requires n >= K-1; throws
/// CoveringError if i is not activated inside the window.
std::size_t last_activation(const BlockSchedule& s, std::size_t i, std::size_t n);

/// One row (mu_{n,j})_j of the concentrating array built from a schedule,
/// stored sparsely as (j, mu_{n,j}) pairs with ascending j.
struct ConcentratingRow {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, double>> entries;

  double at(std::size_t j) const;
  double sum() const;
};

/// Row n of the array: the unit mass at j = n when n < K-1, otherwise
/// mu_{n,j} = sum{w_i : i in I_j minus (I_{j+1} u ... u I_n)} for
/// n-K < j <= n and zero elsewhere.
ConcentratingRow mu_row(const BlockSchedule& s, std::span<const double> weights, std::size_t n);

struct ConcentratingReport {
  bool passed = true;
  bool row_stochastic = true;
  bool banded = true;
  bool diagonal_bounded_below = true;
  /// inf over the supplied rows of mu_{n,n}.
  double diagonal_infimum = 0.0;
  std::optional<std::size_t> first_sum_failure;
  std::optional<std::size_t> first_band_failure;
  std::optional<std::size_t> first_diagonal_failure;
  double max_sum_error = 0.0;
};

/// Checks row sums equal one, mu_{n,j} = 0 whenever n - j >= K, and a
/// strictly positive diagonal infimum.
ConcentratingReport check_concentrating(std::span<const ConcentratingRow> rows, std::size_t K,
                                        double tol = 1e-12);

struct LagIdentitySides {
  double weighted_rows = 0.0;     // sum_j mu_{n,j} xi_j
  double lagged_gather = 0.0;     // sum_i w_i xi_{c(i,n)}
};

/// Evaluates both sides of sum_j mu_{n,j} xi_j = sum_i w_i xi_{c(i,n)}
/// independently. `xs` holds xi_0, ..., xi_n.
LagIdentitySides lag_identity_sides(const BlockSchedule& s, std::span<const double> weights,
                                    std::size_t n, std::span<const double> xs);

bool lag_identity_check(const BlockSchedule& s, std::span<const double> weights, std::size_t n,
                        std::span<const double> xs, double tol);

} // namespace blocksplit
