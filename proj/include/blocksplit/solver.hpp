#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blocksplit/operators.hpp"
#include "blocksplit/schedules.hpp"

namespace blocksplit {

/// The operator families of a composite fixed-point problem: the outer
/// operators T_{0,n} and the inner operators T_{i,n}, i = 0..m-1 (0-based).
/// Autonomous problems use constant families.
struct OperatorFamilies {
  std::size_t dim = 0;
  std::size_t m = 0;
  std::function<AveragedOp(std::size_t n)> outer;
  std::function<AveragedOp(std::size_t i, std::size_t n)> inner;
  bool autonomous = false;
  /// Set for autonomous families so audits can read declared constants.
  std::optional<AveragedOp> outer_limit;
  std::vector<AveragedOp> inner_limit;

  static OperatorFamilies constant(AveragedOp outer, std::vector<AveragedOp> inner);
};

/// Perturbations e_{0,n} (outer) and e_{i,n} (inner) added to operator outputs.
class ErrorModel {
public:
  virtual ~ErrorModel() = default;
  virtual std::optional<Point> outer_error(std::size_t n, std::size_t dim) const = 0;
  virtual std::optional<Point> inner_error(std::size_t i, std::size_t n, std::size_t dim) const = 0;
};

/// Deterministic errors of norm scale / (n + 1)^power along seeded random
/// unit directions. With power > 1 both the outer sequence and every lagged
/// inner sequence are summable.
class SummableErrors final : public ErrorModel {
public:
  SummableErrors(std::uint64_t seed, double scale, double power = 2.0, bool outer = true,
                 bool inner = true);

  std::optional<Point> outer_error(std::size_t n, std::size_t dim) const override;
  std::optional<Point> inner_error(std::size_t i, std::size_t n, std::size_t dim) const override;

  /// Upper bound on sum_n |e_n| for one sequence: scale * zeta(power).
  double per_sequence_bound() const;

private:
  Point direction(std::uint64_t stream, std::size_t n, std::size_t dim) const;

  std::uint64_t seed_;
  double scale_;
  double power_;
  bool outer_;
  bool inner_;
};

/// Per-iteration diagnostics. Row n describes the step x_n -> x_{n+1}; the
/// terminal row has no step.
struct TraceRecord {
  std::size_t n = 0;
  Block block;
  /// |x_n - T_{0,n}(sum_i w_i T_{i,c(i,n)} x_n)|, present on checked iterations.
  std::optional<double> residual;
  /// |x_{n+1} - x_n|
  std::optional<double> step;
  /// |e_{0,n}|
  double err0 = 0.0;
  /// sum_i |e_{i,c(i,n)}|
  double errsum = 0.0;
  std::optional<double> dist_ref;
};

/// State handed to SolverConfig::observer after the stale buffer has been
/// updated at iteration n and before x_{n+1} is formed.
struct IterationView {
  std::size_t n;
  const Point& x;
  std::span<const Point> buffer;
  const Block& block;
  /// Running weighted sum (economical variant only).
  const Point* running_sum;
};

struct SolverConfig {
  std::vector<double> weights;
  BlockSchedule schedule;
  /// Declared alphas must satisfy alpha < 1 / (1 + epsilon).
  double epsilon = 1e-3;
  std::size_t max_iters = 1000;
  double tol_residual = 1e-10;
  /// Residual evaluated every check_every iterations (and at the end).
  std::size_t check_every = 10;
  /// Initial stale values t_{i,-1}; defaults to x_0 for every i.
  std::optional<std::vector<Point>> t_init{};
  std::shared_ptr<const ErrorModel> error_model{};
  /// Optional reference solution for the dist_ref column.
  std::optional<Point> reference{};
  bool store_iterates = true;
  /// Upper bound on worker threads evaluating one block.
  std::size_t threads = 1;
  std::function<void(const IterationView&)> observer{};
};

struct RunResult {
  Point solution;
  std::vector<TraceRecord> trace;
  /// x_0, ..., x_N when SolverConfig::store_iterates is set.
  std::vector<Point> iterates;
  bool converged = false;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  /// sum_n |e_{0,n}| and sum_n sum_i |e_{i,c(i,n)}| over the run.
  double outer_error_total = 0.0;
  double inner_error_total = 0.0;
};

/// Block-update iteration: for i in I_n, t_i = T_{i,n} x_n + e_{i,n}; other
/// t_i are carried over; x_{n+1} = T_{0,n}(sum_i w_i t_i) + e_{0,n}.
/// Stops once the residual drops to tol_residual or after max_iters steps.
RunResult run(const OperatorFamilies& ops, const SolverConfig& cfg, const Point& x0);

/// Same iteration maintaining the running sum z_n by subtracting the stale
/// contributions of I_n and adding the fresh ones (recomputed from scratch
/// when I_n is everything).
RunResult run_economical(const OperatorFamilies& ops, const SolverConfig& cfg, const Point& x0);

/// |x - T0(sum_i w_i T_i x)|
double fixed_point_residual(const Point& x, const AveragedOp& outer,
                            std::span<const AveragedOp> inner, std::span<const double> weights);

/// Product rho_0 * sum_i w_i rho_i of declared Lipschitz constants of an
/// autonomous family, if all are declared.
std::optional<double> declared_contraction(const OperatorFamilies& ops,
                                           std::span<const double> weights);

struct FejerReport {
  bool passed = true;
  std::size_t checked = 0;
  double tolerance = 0.0;
  /// max over n of lhs - rhs
  double max_violation = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> first_violation;
  /// true when |x_{n+1} - x| < |x_n - x| held at every audited step
  bool strictly_decreasing = true;
};

/// Checks, for every n >= K-1 with a recorded step,
///   |x_{n+1} - x| <= sum_i w_i |x_{c(i,n)} - x| + |e_{0,n}| + sum_i |e_{i,c(i,n)}|
/// with c(i,n) reconstructed from the recorded blocks. Passes iff no excess
/// exceeds 1e-9 (1 + |x_0 - x|).
FejerReport fejer_audit(std::span<const TraceRecord> trace, std::span<const Point> iterates,
                        const Point& x_ref, std::span<const double> weights, std::size_t K);

struct LinearRateReport {
  bool passed = true;
  double rho = 1.0;
  double xi_hat = 0.0;
  std::size_t checked = 0;
  double max_excess = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> first_violation;
};

/// Checks |x_n - x| <= rho^((1-K)/K) xi_hat rho^(n/K) for every stored
/// iterate, where rho = rho0 sum_i w_i rho_i and xi_hat = max_{k<K} |x_k - x|,
/// with slack 1e-12 (1 + xi_hat). Throws DomainError when rho >= 1.
LinearRateReport linear_rate_audit(std::span<const Point> iterates, const Point& x_ref,
                                   double rho0, std::span<const double> rhos,
                                   std::span<const double> weights, std::size_t K);

} // namespace blocksplit
