#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace blocksplit {

/// Element of the ambient space R^d.
using Point = Eigen::VectorXd;

bool all_finite(const Point& x);

/// Throws DimensionError unless both points have dimension `a.size()`.
void require_same_dim(const Point& a, const Point& b, const char* what);

/// Validates a weight vector: nonempty, strictly positive, sums to one
/// within `tol`. Throws DomainError otherwise.
void validate_weights(std::span<const double> weights, double tol = 1e-12);

/// sum_i w_i * terms[i], accumulated coordinatewise in ascending index order
/// with Neumaier compensation.
Point weighted_sum(std::span<const Point> terms, std::span<const double> weights);

/// An operator on R^d carrying its averagedness constant alpha in (0,1]
/// (1 means merely nonexpansive) and, optionally, a Lipschitz constant.
///
/// Instances are immutable; copies share the underlying map, so an
/// AveragedOp may be evaluated concurrently provided the wrapped callable
/// holds no mutable state.
class AveragedOp {
public:
  using Map = std::function<Point(const Point&)>;

  AveragedOp(std::size_t dim, Map eval, double alpha,
             std::optional<double> lipschitz = std::nullopt,
             std::string name = {});

  std::size_t dim() const { return dim_; }
  double alpha() const { return alpha_; }
  const std::optional<double>& lipschitz() const { return lipschitz_; }
  const std::string& name() const { return name_; }

  /// Checked evaluation, same as apply(*this, x).
  Point operator()(const Point& x) const;

private:
  std::size_t dim_;
  std::shared_ptr<const Map> eval_;
  double alpha_;
  std::optional<double> lipschitz_;
  std::string name_;
};

/// Returns Tx. Throws DimensionError on a size mismatch and NonFiniteError
/// if the operator returns NaN/Inf or changes the dimension.
Point apply(const AveragedOp& op, const Point& x);

AveragedOp identity(std::size_t dim);

/// x -> c x for c in [-1, 1]; averaged with alpha = (1 - c) / 2 (1/2 for c = 1).
AveragedOp scaling(std::size_t dim, double c);

/// x -> sum_i w_i T_i x. alpha is max alpha_i; the Lipschitz constant is
/// sum_i w_i rho_i when every operand declares one.
AveragedOp convex_combination(std::span<const AveragedOp> ops,
                              std::span<const double> weights);

/// x -> outer(inner(x)). The averagedness constant of a composition is not
/// tracked: alpha is stored as 1.
AveragedOp compose(const AveragedOp& outer, const AveragedOp& inner);

/// x -> x + lambda (Tx - x), with alpha = lambda * alpha(T). Requires
/// lambda > 0 and lambda * alpha(T) <= 1.
AveragedOp relax(const AveragedOp& op, double lambda);

struct CertificateReport {
  bool passed = true;
  std::size_t samples = 0;
  std::size_t failures = 0;
  /// Largest raw excess of the averagedness inequality over sampled pairs.
  double max_violation = 0.0;
  /// Largest excess divided by (1 + |x - y|^2); compared against the tolerance.
  double max_scaled_violation = 0.0;
  /// Same quantities for the declared Lipschitz bound, when present.
  std::optional<double> max_lipschitz_violation;
  std::size_t lipschitz_failures = 0;
};

/// Samples `sample_count` seeded pairs (x, y) and checks
///   |Tx - Ty|^2 <= |x - y|^2 - (1 - alpha)/alpha |(Id - T)x - (Id - T)y|^2
/// using the declared alpha (and the declared Lipschitz bound, if any).
/// Passes iff every excess is below tolerance * (1 + |x - y|^2).
CertificateReport certify_averaged(const AveragedOp& op, std::size_t sample_count,
                                   std::uint64_t seed, double tolerance = 1e-10);

/// Same check against an explicit alpha instead of the declared one.
CertificateReport certify_averaged_at(const AveragedOp& op, double alpha,
                                      std::size_t sample_count, std::uint64_t seed,
                                      double tolerance = 1e-10);

} // namespace blocksplit
