#include "blocksplit/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "blocksplit/errors.hpp"
#include "blocksplit/operators.hpp"

namespace blocksplit {

BlockSchedule::BlockSchedule(std::size_t m, std::size_t K, Generator generator, std::string kind)
    : m_(m), K_(K), generator_(std::make_shared<const Generator>(std::move(generator))),
      kind_(std::move(kind)) {
  if (m_ == 0) throw DomainError("BlockSchedule: operator count m must be >= 1");
  if (K_ == 0) throw DomainError("BlockSchedule: covering constant K must be >= 1");
  if (!*generator_) throw DomainError("BlockSchedule: empty generator");
}

Block BlockSchedule::block(std::size_t n) const {
  Block b = (*generator_)(n);
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (b.empty()) {
    std::ostringstream msg;
    msg << "BlockSchedule: block I_" << n << " is empty";
    throw CoveringError(msg.str());
  }
  if (b.back() >= m_) {
    std::ostringstream msg;
    msg << "BlockSchedule: block I_" << n << " contains index " << b.back() + 1
        << " outside {1, ..., " << m_ << "}";
    throw CoveringError(msg.str());
  }
  return b;
}

bool BlockSchedule::contains(std::size_t n, std::size_t i) const {
  const Block b = block(n);
  return std::binary_search(b.begin(), b.end(), i);
}

BlockSchedule make_cyclic(std::size_t m, std::size_t block_size) {
  if (m == 0) throw DomainError("make_cyclic: m must be >= 1");
  if (block_size == 0 || block_size > m)
    throw DomainError("make_cyclic: block_size must lie in [1, m]");
  const std::size_t period = (m + block_size - 1) / block_size;
  auto gen = [m, block_size, period](std::size_t n) {
    const std::size_t first = (n % period) * block_size;
    const std::size_t last = std::min(m, first + block_size);
    Block b(last - first);
    std::iota(b.begin(), b.end(), first);
    return b;
  };
  return BlockSchedule(m, period, gen, "cyclic");
}

namespace {

// History-dependent generator; blocks are materialized on demand and cached
// so that block(n) stays a pure function of n.
struct QuasicyclicState {
  std::size_t m;
  std::size_t K;
  std::mt19937_64 rng;
  std::vector<Block> blocks;
  // last step at which each index was active, -1 if never
  std::vector<long long> last;
  std::mutex mutex;

  QuasicyclicState(std::size_t m_, std::size_t K_, std::uint64_t seed)
      : m(m_), K(K_), rng(seed), last(m_, -1) {}

  void extend_to(std::size_t n) {
    const std::size_t max_draw = std::max<std::size_t>(1, (m + K - 1) / K);
    std::vector<std::size_t> pool(m);
    while (blocks.size() <= n) {
      const auto step = static_cast<long long>(blocks.size());
      const std::size_t size = 1 + static_cast<std::size_t>(rng() % max_draw);
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t k = 0; k < size; ++k) {
        const std::size_t pick = k + static_cast<std::size_t>(rng() % (m - k));
        std::swap(pool[k], pool[pick]);
      }
      Block b(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
      // Sweep completion: an index idle for K-1 steps must fire now.
      for (std::size_t i = 0; i < m; ++i)
        if (last[i] <= step - static_cast<long long>(K)) b.push_back(i);
      std::sort(b.begin(), b.end());
      b.erase(std::unique(b.begin(), b.end()), b.end());
      for (std::size_t i : b) last[i] = step;
      blocks.push_back(std::move(b));
    }
  }
};

} // namespace

BlockSchedule make_quasicyclic_random(std::size_t m, std::size_t K, std::uint64_t seed) {
  if (m == 0) throw DomainError("make_quasicyclic_random: m must be >= 1");
  if (K == 0) throw DomainError("make_quasicyclic_random: K must be >= 1");
  auto state = std::make_shared<QuasicyclicState>(m, K, seed);
  auto gen = [state](std::size_t n) {
    std::lock_guard lock(state->mutex);
    state->extend_to(n);
    return state->blocks[n];
  };
  return BlockSchedule(m, K, gen, "quasicyclic");
}

BlockSchedule make_explicit(std::size_t m, std::size_t K, std::vector<Block> blocks) {
  if (blocks.empty()) throw DomainError("make_explicit: no blocks given");
  for (const auto& b : blocks) {
    if (b.empty()) throw DomainError("make_explicit: empty block");
    for (std::size_t i : b)
      if (i >= m) throw DomainError("make_explicit: block index out of range");
  }
  auto gen = [blocks = std::move(blocks)](std::size_t n) { return blocks[n % blocks.size()]; };
  return BlockSchedule(m, K, gen, "explicit");
}

BlockSchedule make_full(std::size_t m) { return make_cyclic(m, m); }

CoveringReport validate_covering(const BlockSchedule& s, std::size_t horizon) {
  const std::size_t m = s.operator_count();
  const std::size_t K = s.covering_constant();
  if (horizon < K) throw DomainError("validate_covering: horizon must be >= K");
  // count[i] = number of blocks in the current window containing i
  std::vector<std::size_t> count(m, 0);
  std::size_t covered = 0;
  std::vector<Block> window;
  window.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    window.push_back(s.block(k));
    for (std::size_t i : window.back())
      if (count[i]++ == 0) ++covered;
  }
  CoveringReport report;
  for (std::size_t start = 0;; ++start) {
    if (covered < m) {
      report.ok = false;
      report.window_start = start;
      for (std::size_t i = 0; i < m; ++i)
        if (count[i] == 0) {
          report.missing_index = i;
          break;
        }
      return report;
    }
    if (start + K >= horizon) break;
    // slide: drop I_start, add I_{start+K}
    for (std::size_t i : window[start % K])
      if (--count[i] == 0) --covered;
    window[start % K] = s.block(start + K);
    for (std::size_t i : window[start % K])
      if (count[i]++ == 0) ++covered;
  }
  return report;
}

void require_covering(const BlockSchedule& s, std::size_t horizon) {
  const CoveringReport r = validate_covering(s, std::max(horizon, s.covering_constant()));
  if (!r.ok) {
    std::ostringstream msg;
    msg << "covering violation: index " << *r.missing_index + 1 << " missing from window starting at n="
        << *r.window_start << " (K=" << s.covering_constant() << ")";
    throw CoveringError(msg.str());
  }
}

std::size_t last_activation(const BlockSchedule& s, std::size_t i, std::size_t n) {
  const std::size_t K = s.covering_constant();
  if (n + 1 < K) throw DomainError("last_activation: requires n >= K - 1");
  if (i >= s.operator_count()) throw DomainError("last_activation: index out of range");
  for (std::size_t k = n + 1; k-- > n + 1 - K;)
    if (s.contains(k, i)) return k;
  std::ostringstream msg;
  msg << "last_activation: index " << i + 1 << " not active in window ending at n=" << n;
  throw CoveringError(msg.str());
}

double ConcentratingRow::at(std::size_t j) const {
  for (const auto& [col, value] : entries)
    if (col == j) return value;
  return 0.0;
}

double ConcentratingRow::sum() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.second;
  return s;
}

ConcentratingRow mu_row(const BlockSchedule& s, std::span<const double> weights, std::size_t n) {
  validate_weights(weights);
  if (weights.size() != s.operator_count())
    throw DomainError("mu_row: weight count differs from operator count");
  const std::size_t K = s.covering_constant();
  ConcentratingRow row;
  row.n = n;
  if (n + 1 < K) {
    row.entries.emplace_back(n, 1.0);
    return row;
  }
  // Walk j = n, n-1, ..., n-K+1 keeping the union of I_{j+1}, ..., I_n.
  std::vector<char> seen(s.operator_count(), 0);
  std::vector<std::pair<std::size_t, double>> reversed;
  for (std::size_t j = n + 1; j-- > n + 1 - K;) {
    double mass = 0.0;
    for (std::size_t i : s.block(j)) {
      if (!seen[i]) {
        mass += weights[i];
        seen[i] = 1;
      }
    }
    if (mass != 0.0) reversed.emplace_back(j, mass);
  }
  row.entries.assign(reversed.rbegin(), reversed.rend());
  return row;
}

ConcentratingReport check_concentrating(std::span<const ConcentratingRow> rows, std::size_t K,
                                        double tol) {
  ConcentratingReport report;
  report.diagonal_infimum = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    const double err = std::abs(row.sum() - 1.0);
    report.max_sum_error = std::max(report.max_sum_error, err);
    if (err > tol && !report.first_sum_failure) {
      report.row_stochastic = false;
      report.first_sum_failure = row.n;
    }
    for (const auto& [j, value] : row.entries) {
      if (j > row.n || (row.n - j >= K && value != 0.0)) {
        if (!report.first_band_failure) report.first_band_failure = row.n;
        report.banded = false;
      }
    }
    const double diag = row.at(row.n);
    report.diagonal_infimum = std::min(report.diagonal_infimum, diag);
    if (!(diag > 0.0) && !report.first_diagonal_failure) {
      report.diagonal_bounded_below = false;
      report.first_diagonal_failure = row.n;
    }
  }
  if (rows.empty()) report.diagonal_infimum = 0.0;
  report.passed = report.row_stochastic && report.banded && report.diagonal_bounded_below;
  return report;
}

LagIdentitySides lag_identity_sides(const BlockSchedule& s, std::span<const double> weights,
                                    std::size_t n, std::span<const double> xs) {
  if (xs.size() != n + 1) throw DimensionError("lag_identity: xs must hold n + 1 values");
  if (n + 1 < s.covering_constant()) throw DomainError("lag_identity: requires n >= K - 1");
  LagIdentitySides sides;
  const ConcentratingRow row = mu_row(s, weights, n);
  for (const auto& [j, value] : row.entries) sides.weighted_rows += value * xs[j];
  for (std::size_t i = 0; i < s.operator_count(); ++i)
    sides.lagged_gather += weights[i] * xs[last_activation(s, i, n)];
  return sides;
}

bool lag_identity_check(const BlockSchedule& s, std::span<const double> weights, std::size_t n,
                        std::span<const double> xs, double tol) {
  const LagIdentitySides sides = lag_identity_sides(s, weights, n, xs);
  return std::abs(sides.weighted_rows - sides.lagged_gather) <= tol;
}

} // namespace blocksplit
