#include "blocksplit/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "blocksplit/errors.hpp"

namespace blocksplit {

Point prox_l1(const Point& x, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("prox_l1: threshold must be >= 0");
  Point p(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double mag = std::max(std::abs(x[k]) - t, 0.0);
    p[k] = x[k] < 0.0 ? -mag : mag;
  }
  return p;
}

AveragedOp prox_l1_operator(std::size_t dim, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("prox_l1: threshold must be >= 0");
  return AveragedOp(dim, [t](const Point& x) { return prox_l1(x, t); }, 0.5, 1.0, "prox_l1");
}

// ---------------------------------------------------------------------------
// ConvexSet

namespace {

void require_finite(const Point& p, const char* what) {
  if (!p.allFinite()) throw DomainError(std::string(what) + ": parameters must be finite");
}

} // namespace

ConvexSet ConvexSet::space(std::size_t dim) {
  if (dim == 0) throw DomainError("ConvexSet::space: dimension must be positive");
  return ConvexSet(Kind::space, dim);
}

ConvexSet ConvexSet::box(Point lower, Point upper) {
  if (lower.size() == 0) throw DomainError("ConvexSet::box: empty bounds");
  if (lower.size() != upper.size()) throw DimensionError("ConvexSet::box: bound dimension mismatch");
  for (Eigen::Index k = 0; k < lower.size(); ++k) {
    if (std::isnan(lower[k]) || std::isnan(upper[k]) || lower[k] > upper[k] ||
        lower[k] == std::numeric_limits<double>::infinity() ||
        upper[k] == -std::numeric_limits<double>::infinity())
      throw DomainError("ConvexSet::box: need lower <= upper with a nonempty interval");
  }
  ConvexSet s(Kind::box, static_cast<std::size_t>(lower.size()));
  s.u_ = std::move(lower);
  s.v_ = std::move(upper);
  return s;
}

ConvexSet ConvexSet::halfspace(Point a, double b) {
  require_finite(a, "ConvexSet::halfspace");
  if (a.size() == 0 || a.norm() == 0.0 || !std::isfinite(b))
    throw DomainError("ConvexSet::halfspace: normal must be nonzero");
  ConvexSet s(Kind::halfspace, static_cast<std::size_t>(a.size()));
  s.u_ = std::move(a);
  s.scalar_ = b;
  return s;
}

ConvexSet ConvexSet::hyperplane(Point a, double b) {
  ConvexSet s = halfspace(std::move(a), b);
  s.kind_ = Kind::hyperplane;
  return s;
}

ConvexSet ConvexSet::ball(Point center, double radius) {
  require_finite(center, "ConvexSet::ball");
  if (center.size() == 0) throw DomainError("ConvexSet::ball: empty center");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw DomainError("ConvexSet::ball: radius must be > 0");
  ConvexSet s(Kind::ball, static_cast<std::size_t>(center.size()));
  s.u_ = std::move(center);
  s.scalar_ = radius;
  return s;
}

ConvexSet ConvexSet::affine(Matrix A, Point b) {
  if (A.rows() == 0 || A.cols() == 0) throw DomainError("ConvexSet::affine: empty system");
  if (A.rows() != b.size()) throw DimensionError("ConvexSet::affine: A and b disagree");
  if (!A.allFinite() || !b.allFinite()) throw DomainError("ConvexSet::affine: parameters must be finite");
  Eigen::FullPivLU<Matrix> lu(A);
  if (lu.rank() != A.rows())
    throw DomainError("ConvexSet::affine: A must have full row rank");
  ConvexSet s(Kind::affine, static_cast<std::size_t>(A.cols()));
  s.gram_.compute(A * A.transpose());
  if (s.gram_.info() != Eigen::Success)
    throw DomainError("ConvexSet::affine: singular Gram matrix");
  s.A_ = std::move(A);
  s.v_ = std::move(b);
  return s;
}

ConvexSet ConvexSet::singleton(Point p) {
  require_finite(p, "ConvexSet::singleton");
  if (p.size() == 0) throw DomainError("ConvexSet::singleton: empty point");
  ConvexSet s(Kind::singleton, static_cast<std::size_t>(p.size()));
  s.u_ = std::move(p);
  return s;
}

std::string ConvexSet::kind_name() const {
  switch (kind_) {
    case Kind::space: return "space";
    case Kind::box: return "box";
    case Kind::halfspace: return "halfspace";
    case Kind::hyperplane: return "hyperplane";
    case Kind::ball: return "ball";
    case Kind::affine: return "affine";
    case Kind::singleton: return "singleton";
  }
  return "unknown";
}

Point ConvexSet::project(const Point& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) {
    std::ostringstream msg;
    msg << "project(" << kind_name() << "): expected dimension " << dim_ << ", got " << x.size();
    throw DimensionError(msg.str());
  }
  switch (kind_) {
    case Kind::space:
      return x;
    case Kind::box:
      return x.cwiseMax(u_).cwiseMin(v_);
    case Kind::halfspace: {
      const double excess = u_.dot(x) - scalar_;
      if (excess <= 0.0) return x;
      return x - (excess / u_.squaredNorm()) * u_;
    }
    case Kind::hyperplane:
      return x - ((u_.dot(x) - scalar_) / u_.squaredNorm()) * u_;
    case Kind::ball: {
      const Point offset = x - u_;
      const double r = offset.norm();
      if (r <= scalar_) return x;
      return u_ + (scalar_ / r) * offset;
    }
    case Kind::affine:
      return x - A_.transpose() * gram_.solve(A_ * x - v_);
    case Kind::singleton:
      return u_;
  }
  return x;
}

Point project(const ConvexSet& set, const Point& x) { return set.project(x); }

AveragedOp projector(const ConvexSet& set) {
  return AveragedOp(
      set.dim(), [set](const Point& x) { return set.project(x); }, 0.5, 1.0,
      "proj_" + set.kind_name());
}

// ---------------------------------------------------------------------------
// Resolvents

double monotonicity_margin(const Matrix& A) {
  if (A.rows() != A.cols()) throw DimensionError("monotonicity_margin: matrix must be square");
  const Matrix sym = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

LinearResolvent::LinearResolvent(Matrix A, double gamma, Point shift)
    : A_(std::move(A)), gamma_(gamma), shift_(std::move(shift)) {
  if (A_.rows() == 0 || A_.rows() != A_.cols())
    throw DimensionError("LinearResolvent: matrix must be square and nonempty");
  if (!(gamma_ > 0.0) || !std::isfinite(gamma_))
    throw DomainError("LinearResolvent: gamma must be > 0");
  if (shift_.size() == 0) shift_ = Point::Zero(A_.rows());
  if (shift_.size() != A_.rows()) throw DimensionError("LinearResolvent: shift dimension mismatch");
  if (monotonicity_margin(A_) < -1e-10)
    throw DomainError("LinearResolvent: A is not monotone (A + A^T not positive semidefinite)");
  const Matrix M = Matrix::Identity(A_.rows(), A_.cols()) + gamma_ * A_;
  lu_.compute(M);
  if (!std::isfinite(lu_.rcond()) || lu_.rcond() < 1e-14)
    throw NonFiniteError("LinearResolvent: I + gamma A is numerically singular");
}

Point LinearResolvent::operator()(const Point& x) const {
  if (x.size() != A_.rows()) throw DimensionError("LinearResolvent: dimension mismatch");
  return lu_.solve(x + gamma_ * shift_);
}

AveragedOp LinearResolvent::as_operator() const {
  LinearResolvent self = *this;
  return AveragedOp(
      dim(), [self](const Point& x) { return self(x); }, 0.5, 1.0, "resolvent_linear");
}

Point resolvent_linear(const Matrix& A, double gamma, const Point& x) {
  return LinearResolvent(A, gamma)(x);
}

Point yosida(const std::function<Point(const Point&)>& resolvent, double rho, const Point& x) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("yosida: rho must be > 0");
  const Point jx = resolvent(x);
  require_same_dim(x, jx, "yosida");
  return (x - jx) / rho;
}

// ---------------------------------------------------------------------------
// Smooth scalar functions

SmoothScalar SmoothScalar::half_square() { return scaled_half_square(1.0); }

SmoothScalar SmoothScalar::scaled_half_square(double mu) {
  if (!(mu > 0.0)) throw DomainError("scaled_half_square: mu must be > 0");
  return {[mu](double t) { return 0.5 * mu * t * t; }, [mu](double t) { return mu * t; }, mu, true,
          "scaled_half_square"};
}

SmoothScalar SmoothScalar::square() {
  return {[](double t) { return t * t; }, [](double t) { return 2.0 * t; }, 2.0, true, "square"};
}

SmoothScalar SmoothScalar::huber(double delta) {
  if (!(delta > 0.0)) throw DomainError("huber: delta must be > 0");
  return {[delta](double t) {
            const double a = std::abs(t);
            return a <= delta ? 0.5 * t * t : delta * (a - 0.5 * delta);
          },
          [delta](double t) { return std::clamp(t, -delta, delta); }, 1.0, true, "huber"};
}

SmoothScalar SmoothScalar::shifted_square(double eta) {
  return {[eta](double t) { return (t - eta) * (t - eta); },
          [eta](double t) { return 2.0 * (t - eta); }, 2.0, eta == 0.0, "shifted_square"};
}

SmoothScalar SmoothScalar::logistic(double eta) {
  auto value = [eta](double t) {
    return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))) - eta * t;
  };
  auto derivative = [eta](double t) {
    // sigmoid without overflow for large |t|
    const double s = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    return s - eta;
  };
  return {value, derivative, 0.25, false, "logistic"};
}

// ---------------------------------------------------------------------------
// Linear maps

double operator_norm(const Matrix& M) {
  if (M.size() == 0) throw DomainError("operator_norm: empty matrix");
  const Eigen::Index n = M.cols();
  Point v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = 1.0 + 0.01 * static_cast<double>(k % 7);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 10000; ++it) {
    const Point w = M.transpose() * (M * v);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    const double next = std::sqrt(v.dot(w));
    v = w / wn;
    if (std::abs(next - estimate) <= 1e-13 * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return std::max((M * v).norm(), estimate);
}

LinearMap::LinearMap(Matrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.size() == 0) throw DomainError("LinearMap: empty matrix");
  if (!matrix_.allFinite()) throw DomainError("LinearMap: non-finite entries");
  norm_ = operator_norm(matrix_);
  if (norm_ == 0.0) throw DomainError("LinearMap: the zero map is not allowed");
}

LinearMap LinearMap::identity(std::size_t dim) {
  return LinearMap(Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
}

LinearMap LinearMap::functional(const Point& a) { return LinearMap(Matrix(a.transpose())); }

Point LinearMap::apply(const Point& x) const {
  if (x.size() != matrix_.cols()) throw DimensionError("LinearMap::apply: dimension mismatch");
  return matrix_ * x;
}

Point LinearMap::adjoint(const Point& y) const {
  if (y.size() != matrix_.rows()) throw DimensionError("LinearMap::adjoint: dimension mismatch");
  return matrix_.transpose() * y;
}

Point grad_distance_penalty(const SmoothScalar& phi, const LinearMap& L, const ConvexSet& D,
                            const Point& x) {
  if (D.dim() != L.codomain_dim()) throw DimensionError("grad_distance_penalty: D lives in the wrong space");
  const Point lx = L.apply(x);
  const Point residual = lx - D.project(lx);
  const double d = residual.norm();
  if (d <= 1e-14) return Point::Zero(x.size());
  return (phi.derivative(d) / d) * L.adjoint(residual);
}

double distance_penalty(const SmoothScalar& phi, const LinearMap& L, const ConvexSet& D,
                        const Point& x) {
  return phi.value(D.distance(L.apply(x)));
}

// ---------------------------------------------------------------------------
// Separable proximity operators

ScalarProx scalar_prox_zero() {
  return [](double v) { return v; };
}

ScalarProx scalar_prox_abs(double t) {
  if (!(t >= 0.0)) throw DomainError("scalar_prox_abs: threshold must be >= 0");
  return [t](double v) {
    const double mag = std::max(std::abs(v) - t, 0.0);
    return v < 0.0 ? -mag : mag;
  };
}

ScalarProx scalar_prox_interval(double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("scalar_prox_interval: need lo <= hi");
  return [lo, hi](double v) { return std::clamp(v, lo, hi); };
}

Point prox_separable(const Point& x, std::span<const ScalarProx> proxes) {
  if (static_cast<std::size_t>(x.size()) != proxes.size())
    throw DimensionError("prox_separable: one scalar prox per coordinate required");
  Point p(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) p[k] = proxes[static_cast<std::size_t>(k)](x[k]);
  return p;
}

AveragedOp gradient_step(std::size_t dim, std::function<Point(const Point&)> grad, double lipschitz,
                         double gamma, std::optional<double> strong_monotonicity, std::string name) {
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz))
    throw DomainError("gradient_step: Lipschitz constant must be > 0");
  if (!(gamma > 0.0) || !(gamma * lipschitz < 2.0))
    throw DomainError("gradient_step: step size must satisfy 0 < gamma < 2 / lipschitz");
  std::optional<double> contraction = 1.0;
  if (strong_monotonicity) {
    const double sigma = *strong_monotonicity;
    if (!(sigma > 0.0) || sigma > lipschitz)
      throw DomainError("gradient_step: strong monotonicity must lie in (0, lipschitz]");
    contraction = std::sqrt(std::max(0.0, 1.0 - gamma * sigma * (2.0 - gamma * lipschitz)));
  }
  auto eval = [grad = std::move(grad), gamma](const Point& x) {
    Point g = grad(x);
    require_same_dim(x, g, "gradient_step");
    return Point(x - gamma * g);
  };
  return AveragedOp(dim, std::move(eval), gamma * lipschitz / 2.0, contraction, std::move(name));
}

} // namespace blocksplit
