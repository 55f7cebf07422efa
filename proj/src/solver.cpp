#include "blocksplit/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "blocksplit/errors.hpp"

namespace blocksplit {

namespace {

constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

const AveragedOp& require_alpha(const AveragedOp& op, double epsilon, const char* role) {
  if (!(op.alpha() < 1.0 / (1.0 + epsilon))) {
    std::ostringstream msg;
    msg << "operator " << (op.name().empty() ? role : op.name()) << " declares alpha="
        << op.alpha() << ", which is not below 1/(1+epsilon) with epsilon=" << epsilon;
    throw DomainError(msg.str());
  }
  return op;
}

struct Task {
  std::size_t i;
  std::size_t n;
};

// Evaluates T_{i,n} x for each task, splitting the tasks over up to `threads`
// workers. Each worker writes only its own output slots.
std::vector<Point> evaluate_inner(const OperatorFamilies& ops, const std::vector<Task>& tasks,
                                  const Point& x, double epsilon, std::size_t threads) {
  std::vector<Point> out(tasks.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const AveragedOp op = ops.inner(tasks[k].i, tasks[k].n);
      out[k] = apply(require_alpha(op, epsilon, "T_i"), x);
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), tasks.size());
  if (workers <= 1) {
    work(0, tasks.size());
    return out;
  }
  std::vector<std::exception_ptr> failures(workers);
  const std::size_t chunk = (tasks.size() + workers - 1) / workers;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
      const std::size_t begin = std::min(tasks.size(), w * chunk);
      const std::size_t end = std::min(tasks.size(), begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
    try {
      work(0, std::min(tasks.size(), chunk));
    } catch (...) {
      failures[0] = std::current_exception();
    }
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

void validate_inputs(const OperatorFamilies& ops, const SolverConfig& cfg, const Point& x0) {
  if (ops.m == 0 || ops.dim == 0) throw DomainError("operator families must have m >= 1 and dim >= 1");
  if (!ops.outer || !ops.inner) throw DomainError("operator families are incomplete");
  validate_weights(cfg.weights);
  if (cfg.weights.size() != ops.m)
    throw DomainError("weight count differs from the number of inner operators");
  if (cfg.schedule.operator_count() != ops.m)
    throw DomainError("schedule operator count differs from the number of inner operators");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
  if (!(cfg.tol_residual >= 0.0)) throw DomainError("tol_residual must be >= 0");
  if (cfg.check_every == 0) throw DomainError("check_every must be >= 1");
  if (static_cast<std::size_t>(x0.size()) != ops.dim)
    throw DimensionError("x0 dimension differs from the problem dimension");
  if (!all_finite(x0)) throw NonFiniteError("x0 is not finite");
  if (cfg.t_init) {
    if (cfg.t_init->size() != ops.m) throw DimensionError("t_init must hold m points");
    for (const auto& t : *cfg.t_init) {
      if (static_cast<std::size_t>(t.size()) != ops.dim)
        throw DimensionError("t_init entry has the wrong dimension");
      if (!all_finite(t)) throw NonFiniteError("t_init entry is not finite");
    }
  }
  if (cfg.reference && static_cast<std::size_t>(cfg.reference->size()) != ops.dim)
    throw DimensionError("reference dimension differs from the problem dimension");
  require_covering(cfg.schedule, std::max<std::size_t>(cfg.max_iters, 1));
}

double residual_at(const OperatorFamilies& ops, const SolverConfig& cfg, const AveragedOp& outer,
                   const Point& x, const std::vector<std::size_t>& last, std::size_t n) {
  std::vector<Task> tasks(ops.m);
  for (std::size_t i = 0; i < ops.m; ++i) tasks[i] = {i, last[i] == kNever ? n : last[i]};
  const std::vector<Point> values = evaluate_inner(ops, tasks, x, cfg.epsilon, cfg.threads);
  return (x - apply(outer, weighted_sum(values, cfg.weights))).norm();
}

RunResult iterate(const OperatorFamilies& ops, const SolverConfig& cfg, const Point& x0,
                  bool economical) {
  validate_inputs(ops, cfg, x0);
  const std::size_t m = ops.m;
  const std::size_t dim = ops.dim;
  const auto& w = cfg.weights;

  std::vector<Point> t = cfg.t_init ? *cfg.t_init : std::vector<Point>(m, x0);
  std::vector<double> lagged_err(m, 0.0);
  std::vector<std::size_t> last(m, kNever);
  Point z;
  if (economical) z = weighted_sum(t, w);

  RunResult result;
  Point x = x0;
  if (cfg.store_iterates) result.iterates.push_back(x);

  for (std::size_t n = 0;; ++n) {
    TraceRecord rec;
    rec.n = n;
    rec.block = cfg.schedule.block(n);
    for (std::size_t i : rec.block) last[i] = n;
    if (cfg.reference) rec.dist_ref = (x - *cfg.reference).norm();

    const AveragedOp outer = ops.outer(n);
    require_alpha(outer, cfg.epsilon, "T_0");
    const bool at_cap = n >= cfg.max_iters;
    if (at_cap || n % cfg.check_every == 0) {
      const double r = residual_at(ops, cfg, outer, x, last, n);
      rec.residual = r;
      result.final_residual = r;
      if (r <= cfg.tol_residual) result.converged = true;
    }
    if (result.converged || at_cap) {
      result.trace.push_back(std::move(rec));
      result.iterations = n;
      break;
    }

    std::vector<Task> tasks;
    tasks.reserve(rec.block.size());
    for (std::size_t i : rec.block) tasks.push_back({i, n});
    std::vector<Point> fresh = evaluate_inner(ops, tasks, x, cfg.epsilon, cfg.threads);
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      const std::size_t i = tasks[k].i;
      lagged_err[i] = 0.0;
      if (cfg.error_model) {
        if (auto e = cfg.error_model->inner_error(i, n, dim)) {
          fresh[k] += *e;
          lagged_err[i] = e->norm();
        }
      }
    }

    if (economical && rec.block.size() == m) {
      for (std::size_t k = 0; k < tasks.size(); ++k) t[tasks[k].i] = std::move(fresh[k]);
      z = weighted_sum(t, w);
    } else if (economical) {
      Point stale = Point::Zero(static_cast<Eigen::Index>(dim));
      Point update = Point::Zero(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        const std::size_t i = tasks[k].i;
        stale += w[i] * t[i];
        update += w[i] * fresh[k];
        t[i] = std::move(fresh[k]);
      }
      const Point y = z - stale;
      z = y + update;
    } else {
      for (std::size_t k = 0; k < tasks.size(); ++k) t[tasks[k].i] = std::move(fresh[k]);
    }

    if (cfg.observer)
      cfg.observer(IterationView{n, x, t, rec.block, economical ? &z : nullptr});

    Point next = apply(outer, economical ? z : weighted_sum(t, w));
    if (cfg.error_model) {
      if (auto e = cfg.error_model->outer_error(n, dim)) {
        next += *e;
        rec.err0 = e->norm();
      }
    }
    if (!all_finite(next)) {
      std::ostringstream msg;
      msg << "iterate x_" << n + 1 << " is not finite";
      throw NonFiniteError(msg.str());
    }
    for (double e : lagged_err) rec.errsum += e;
    result.outer_error_total += rec.err0;
    result.inner_error_total += rec.errsum;
    rec.step = (next - x).norm();
    result.trace.push_back(std::move(rec));
    x = std::move(next);
    if (cfg.store_iterates) result.iterates.push_back(x);
  }
  result.solution = x;
  return result;
}

} // namespace

OperatorFamilies OperatorFamilies::constant(AveragedOp outer, std::vector<AveragedOp> inner) {
  if (inner.empty()) throw DomainError("OperatorFamilies::constant: no inner operators");
  for (const auto& op : inner)
    if (op.dim() != outer.dim())
      throw DimensionError("OperatorFamilies::constant: operator dimensions differ");
  OperatorFamilies f;
  f.dim = outer.dim();
  f.m = inner.size();
  f.autonomous = true;
  f.outer_limit = outer;
  f.inner_limit = inner;
  f.outer = [outer](std::size_t) { return outer; };
  f.inner = [inner = std::move(inner)](std::size_t i, std::size_t) { return inner.at(i); };
  return f;
}

SummableErrors::SummableErrors(std::uint64_t seed, double scale, double power, bool outer,
                               bool inner)
    : seed_(seed), scale_(scale), power_(power), outer_(outer), inner_(inner) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("SummableErrors: scale must be >= 0");
  if (!(power > 1.0)) throw DomainError("SummableErrors: power must exceed 1 for summability");
}

Point SummableErrors::direction(std::uint64_t stream, std::size_t n, std::size_t dim) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(n),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(n) >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  Point d(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = normal(rng);
  } while (d.norm() == 0.0);
  return d / d.norm();
}

std::optional<Point> SummableErrors::outer_error(std::size_t n, std::size_t dim) const {
  if (!outer_ || scale_ == 0.0) return std::nullopt;
  return direction(0, n, dim) * (scale_ / std::pow(static_cast<double>(n) + 1.0, power_));
}

std::optional<Point> SummableErrors::inner_error(std::size_t i, std::size_t n,
                                                 std::size_t dim) const {
  if (!inner_ || scale_ == 0.0) return std::nullopt;
  return direction(i + 1, n, dim) * (scale_ / std::pow(static_cast<double>(n) + 1.0, power_));
}

double SummableErrors::per_sequence_bound() const {
  // zeta(p) <= 1 + 1/(p-1) by comparison with the integral of t^-p on [1, inf)
  return scale_ * (1.0 + 1.0 / (power_ - 1.0));
}

RunResult run(const OperatorFamilies& ops, const SolverConfig& cfg, const Point& x0) {
  return iterate(ops, cfg, x0, false);
}

RunResult run_economical(const OperatorFamilies& ops, const SolverConfig& cfg, const Point& x0) {
  return iterate(ops, cfg, x0, true);
}

double fixed_point_residual(const Point& x, const AveragedOp& outer,
                            std::span<const AveragedOp> inner, std::span<const double> weights) {
  if (inner.size() != weights.size())
    throw DimensionError("fixed_point_residual: operator and weight counts differ");
  std::vector<Point> values;
  values.reserve(inner.size());
  for (const auto& op : inner) values.push_back(apply(op, x));
  return (x - apply(outer, weighted_sum(values, weights))).norm();
}

std::optional<double> declared_contraction(const OperatorFamilies& ops,
                                           std::span<const double> weights) {
  if (!ops.autonomous || !ops.outer_limit || ops.inner_limit.size() != weights.size())
    return std::nullopt;
  const auto& rho0 = ops.outer_limit->lipschitz();
  if (!rho0) return std::nullopt;
  double avg = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& rho = ops.inner_limit[i].lipschitz();
    if (!rho) return std::nullopt;
    avg += weights[i] * *rho;
  }
  return *rho0 * avg;
}

FejerReport fejer_audit(std::span<const TraceRecord> trace, std::span<const Point> iterates,
                        const Point& x_ref, std::span<const double> weights, std::size_t K) {
  if (K == 0) throw DomainError("fejer_audit: K must be >= 1");
  if (iterates.empty()) throw DomainError("fejer_audit: missing iterates");
  FejerReport report;
  report.tolerance = 1e-9 * (1.0 + (iterates[0] - x_ref).norm());
  const std::size_t m = weights.size();
  std::vector<std::size_t> last(m, kNever);
  std::optional<std::size_t> previous;
  for (const auto& row : trace) {
    if (previous && row.n <= *previous) throw DomainError("fejer_audit: trace rows out of order");
    previous = row.n;
    for (std::size_t i : row.block) {
      if (i >= m) throw DomainError("fejer_audit: block index out of range");
      last[i] = row.n;
    }
    if (!row.step || row.n + 1 < K) continue;
    if (row.n + 1 >= iterates.size()) throw DomainError("fejer_audit: missing iterates");
    double rhs = row.err0 + row.errsum;
    for (std::size_t i = 0; i < m; ++i) {
      if (last[i] == kNever || row.n - last[i] >= K) {
        std::ostringstream msg;
        msg << "fejer_audit: index " << i + 1 << " not active in the window ending at n=" << row.n;
        throw CoveringError(msg.str());
      }
      rhs += weights[i] * (iterates[last[i]] - x_ref).norm();
    }
    const double lhs = (iterates[row.n + 1] - x_ref).norm();
    const double excess = lhs - rhs;
    ++report.checked;
    report.max_violation = std::max(report.max_violation, excess);
    if (excess > report.tolerance && report.passed) {
      report.passed = false;
      report.first_violation = row.n + 1;
    }
    if (!(lhs < (iterates[row.n] - x_ref).norm())) report.strictly_decreasing = false;
  }
  return report;
}

LinearRateReport linear_rate_audit(std::span<const Point> iterates, const Point& x_ref,
                                   double rho0, std::span<const double> rhos,
                                   std::span<const double> weights, std::size_t K) {
  if (K == 0) throw DomainError("linear_rate_audit: K must be >= 1");
  if (rhos.size() != weights.size())
    throw DimensionError("linear_rate_audit: rho and weight counts differ");
  double avg = 0.0;
  for (std::size_t i = 0; i < rhos.size(); ++i) avg += weights[i] * rhos[i];
  LinearRateReport report;
  report.rho = rho0 * avg;
  if (!(report.rho < 1.0)) throw DomainError("linear_rate_audit: no contraction factor declared (rho >= 1)");
  if (!(report.rho > 0.0)) throw DomainError("linear_rate_audit: rho must be positive");
  if (iterates.size() < K) throw DomainError("linear_rate_audit: missing iterates");
  for (std::size_t k = 0; k < K; ++k)
    report.xi_hat = std::max(report.xi_hat, (iterates[k] - x_ref).norm());
  const double slack = 1e-12 * (1.0 + report.xi_hat);
  const double log_rho = std::log(report.rho);
  const double Kd = static_cast<double>(K);
  for (std::size_t n = 0; n < iterates.size(); ++n) {
    const double bound =
        report.xi_hat * std::exp((1.0 - Kd + static_cast<double>(n)) / Kd * log_rho);
    const double excess = (iterates[n] - x_ref).norm() - bound;
    ++report.checked;
    report.max_excess = std::max(report.max_excess, excess);
    if (excess > slack && report.passed) {
      report.passed = false;
      report.first_violation = n;
    }
  }
  return report;
}

} // namespace blocksplit
