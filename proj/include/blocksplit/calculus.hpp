#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "blocksplit/operators.hpp"

namespace blocksplit {

using Matrix = Eigen::MatrixXd;

/// Componentwise soft threshold sign(x) max(|x| - t, 0), i.e. prox of t|.|_1.
Point prox_l1(const Point& x, double t);

/// prox_l1 with threshold t as a firmly nonexpansive operator on R^dim.
AveragedOp prox_l1_operator(std::size_t dim, double t);

/// Nonempty closed convex subset of R^d with a closed-form projector.
class ConvexSet {
public:
  enum class Kind { space, box, halfspace, hyperplane, ball, affine, singleton };

  /// The whole space R^d.
  static ConvexSet space(std::size_t dim);
  /// {x : lower <= x <= upper} (entries may be infinite).
  static ConvexSet box(Point lower, Point upper);
  /// {x : <a, x> <= b}
  static ConvexSet halfspace(Point a, double b);
  /// {x : <a, x> = b}
  static ConvexSet hyperplane(Point a, double b);
  static ConvexSet ball(Point center, double radius);
  /// {x : A x = b}; A must have full row rank.
  static ConvexSet affine(Matrix A, Point b);
  static ConvexSet singleton(Point p);

  Kind kind() const { return kind_; }
  std::string kind_name() const;
  std::size_t dim() const { return dim_; }

  Point project(const Point& x) const;
  double distance(const Point& x) const { return (x - project(x)).norm(); }
  bool contains(const Point& x, double tol = 1e-12) const { return distance(x) <= tol; }

private:
  ConvexSet(Kind kind, std::size_t dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  std::size_t dim_;
  Point u_;        // lower / normal / center / point
  Point v_;        // upper / affine right-hand side
  double scalar_ = 0.0;  // offset / radius
  Matrix A_;
  Eigen::LLT<Matrix> gram_;  // factorization of A A^T for affine sets
};

Point project(const ConvexSet& set, const Point& x);

/// proj_C as a firmly nonexpansive operator (alpha = 1/2, Lipschitz 1).
AveragedOp projector(const ConvexSet& set);

/// Resolvent (I + gamma A)^{-1} of the affine monotone operator x -> A x - b,
/// i.e. v solving (I + gamma A) v = x + gamma b. The symmetric part of A must be
/// positive semidefinite (minimum eigenvalue >= -1e-10).
class LinearResolvent {
public:
  LinearResolvent(Matrix A, double gamma, Point shift = Point());

  std::size_t dim() const { return static_cast<std::size_t>(A_.rows()); }
  double gamma() const { return gamma_; }
  Point operator()(const Point& x) const;
  /// Firmly nonexpansive operator view.
  AveragedOp as_operator() const;

private:
  Matrix A_;
  double gamma_;
  Point shift_;
  Eigen::PartialPivLU<Matrix> lu_;
};

Point resolvent_linear(const Matrix& A, double gamma, const Point& x);

/// Minimum eigenvalue of (A + A^T) / 2.
double monotonicity_margin(const Matrix& A);

/// Yosida approximation (x - J_{rho A} x) / rho given the resolvent J_{rho A}.
Point yosida(const std::function<Point(const Point&)>& resolvent, double rho, const Point& x);

/// phi : R -> R with a Lipschitz derivative. `even_vanishing` marks functions
/// that are even, nonnegative and vanish only at zero.
struct SmoothScalar {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  double lipschitz_of_derivative = 0.0;
  bool even_vanishing = false;
  std::string name;

  /// t^2 / 2
  static SmoothScalar half_square();
  /// mu t^2 / 2
  static SmoothScalar scaled_half_square(double mu);
  /// t^2
  static SmoothScalar square();
  /// Huber function with threshold delta: t^2/2 for |t| <= delta, delta(|t| - delta/2) beyond.
  static SmoothScalar huber(double delta);
  /// (t - eta)^2
  static SmoothScalar shifted_square(double eta);
  /// ln(1 + e^t) - eta t
  static SmoothScalar logistic(double eta);
};

/// Dense linear map with cached operator norm (power iteration).
class LinearMap {
public:
  explicit LinearMap(Matrix matrix);
  static LinearMap identity(std::size_t dim);
  /// x -> <x, a>, as a 1 x d map.
  static LinearMap functional(const Point& a);

  std::size_t domain_dim() const { return static_cast<std::size_t>(matrix_.cols()); }
  std::size_t codomain_dim() const { return static_cast<std::size_t>(matrix_.rows()); }
  const Matrix& matrix() const { return matrix_; }
  double norm() const { return norm_; }

  Point apply(const Point& x) const;
  Point adjoint(const Point& y) const;

private:
  Matrix matrix_;
  double norm_;
};

/// Largest singular value by power iteration on M^T M (relative tolerance
/// 1e-13, at most 10^4 iterations).
double operator_norm(const Matrix& M);

/// Gradient of x -> phi(d_D(L x)): zero when L x lies in D (projection
/// residual <= 1e-14), otherwise (phi'(d)/d) L^*(L x - proj_D(L x)).
Point grad_distance_penalty(const SmoothScalar& phi, const LinearMap& L, const ConvexSet& D,
                            const Point& x);

/// phi(d_D(L x)).
double distance_penalty(const SmoothScalar& phi, const LinearMap& L, const ConvexSet& D,
                        const Point& x);

/// Scalar proximity operator, already scaled by the step size.
using ScalarProx = std::function<double(double)>;

ScalarProx scalar_prox_zero();
/// prox of t |.|
ScalarProx scalar_prox_abs(double t);
/// projection onto [lo, hi]
ScalarProx scalar_prox_interval(double lo, double hi);

/// Applies proxes[k] to coordinate k.
Point prox_separable(const Point& x, std::span<const ScalarProx> proxes);

/// Forward step x -> x - gamma A(x) for a map A that is (1/lipschitz)-cocoercive
/// (e.g. a gradient with Lipschitz constant `lipschitz`); averaged with
/// alpha = gamma lipschitz / 2, which requires 0 < gamma lipschitz < 2.
/// When A is also sigma-strongly monotone the step is a contraction with
/// factor sqrt(1 - gamma sigma (2 - gamma lipschitz)).
AveragedOp gradient_step(std::size_t dim, std::function<Point(const Point&)> grad,
                         double lipschitz, double gamma,
                         std::optional<double> strong_monotonicity = std::nullopt,
                         std::string name = "gradient_step");

} // namespace blocksplit
