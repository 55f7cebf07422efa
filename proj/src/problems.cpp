#include "blocksplit/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "blocksplit/errors.hpp"

namespace blocksplit {

namespace {

std::vector<double> weights_or_uniform(std::vector<double> weights, std::size_t m) {
  if (weights.empty()) return uniform_weights(m);
  if (weights.size() != m) throw DomainError("weight count differs from the number of operators");
  validate_weights(weights);
  return weights;
}

void certify_firm(const AveragedOp& op, std::size_t samples, std::uint64_t seed) {
  const CertificateReport r = certify_averaged_at(op, 0.5, samples, seed);
  if (!r.passed) {
    std::ostringstream msg;
    msg << "operator " << (op.name().empty() ? "<unnamed>" : op.name())
        << " failed the firm nonexpansiveness certificate (" << r.failures << " of " << r.samples
        << " pairs, max scaled violation " << r.max_scaled_violation << ")";
    throw DomainError(msg.str());
  }
}

AveragedOp resolvent_op(std::size_t dim, ResolventFamily resolvent, double gamma, std::string name) {
  return AveragedOp(
      dim, [resolvent = std::move(resolvent), gamma](const Point& x) { return resolvent(gamma, x); },
      0.5, 1.0, std::move(name));
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix A(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index k = 0; k < A.cols(); ++k) A(i, k) = scale * normal(rng);
  return A;
}

Point sparse_truth(std::size_t N, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(N);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_real_distribution<double> mag(1.0, 2.0);
  std::bernoulli_distribution sign(0.5);
  Point x = Point::Zero(static_cast<Eigen::Index>(N));
  const std::size_t nnz = std::max<std::size_t>(1, N / 4);
  for (std::size_t k = 0; k < nnz; ++k) {
    const double v = mag(rng);
    x[static_cast<Eigen::Index>(idx[k])] = sign(rng) ? v : -v;
  }
  return x;
}

} // namespace

std::vector<double> uniform_weights(std::size_t m) {
  if (m == 0) throw DomainError("uniform_weights: m must be >= 1");
  return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

SolverInputs build_common_fixed_point(std::vector<AveragedOp> Ts, std::vector<double> weights,
                                      std::size_t certify_samples, std::uint64_t certify_seed) {
  if (Ts.empty()) throw DomainError("build_common_fixed_point: no operators");
  for (const auto& T : Ts) certify_firm(T, certify_samples, certify_seed);
  SolverInputs in;
  in.variant = "common_fixed_point";
  in.weights = weights_or_uniform(std::move(weights), Ts.size());
  const std::size_t dim = Ts.front().dim();
  in.families = OperatorFamilies::constant(identity(dim), std::move(Ts));
  return in;
}

SolverInputs build_cohypomonotone(std::size_t dim, std::vector<ResolventFamily> resolvents,
                                  std::vector<double> rhos, std::vector<std::vector<double>> gammas,
                                  std::vector<double> weights, double epsilon) {
  const std::size_t m = resolvents.size();
  if (m == 0) throw DomainError("build_cohypomonotone: no resolvents");
  if (rhos.size() != m || gammas.size() != m)
    throw DomainError("build_cohypomonotone: one rho and one gamma list per operator required");
  if (!(epsilon > 0.0)) throw DomainError("build_cohypomonotone: epsilon must be > 0");
  std::vector<std::vector<AveragedOp>> ops(m);
  bool constant = true;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(rhos[i] >= 0.0) || !std::isfinite(rhos[i]))
      throw DomainError("build_cohypomonotone: rho must be >= 0");
    if (gammas[i].empty()) throw DomainError("build_cohypomonotone: empty gamma list");
    if (gammas[i].size() > 1) constant = false;
    for (double g : gammas[i]) {
      if (!(g >= rhos[i] + epsilon) || !std::isfinite(g)) {
        std::ostringstream msg;
        msg << "build_cohypomonotone: gamma=" << g << " for operator " << i + 1
            << " is below rho + epsilon = " << rhos[i] + epsilon;
        throw DomainError(msg.str());
      }
      // J itself need not be nonexpansive here; the relaxed map is firmly nonexpansive
      const double lambda = 1.0 - rhos[i] / g;
      ops[i].push_back(AveragedOp(
          dim, [J = resolvents[i], g, lambda](const Point& x) { return Point(x + lambda * (J(g, x) - x)); },
          0.5, 1.0, "T_" + std::to_string(i + 1)));
    }
  }
  SolverInputs in;
  in.variant = "cohypomonotone";
  in.weights = weights_or_uniform(std::move(weights), m);
  if (constant) {
    std::vector<AveragedOp> flat;
    for (auto& row : ops) flat.push_back(row.front());
    in.families = OperatorFamilies::constant(identity(dim), std::move(flat));
    return in;
  }
  OperatorFamilies f;
  f.dim = dim;
  f.m = m;
  f.autonomous = false;
  const AveragedOp id = identity(dim);
  f.outer = [id](std::size_t) { return id; };
  f.inner = [ops = std::move(ops)](std::size_t i, std::size_t n) {
    const auto& row = ops.at(i);
    return row[n % row.size()];
  };
  in.families = std::move(f);
  return in;
}

SolverInputs build_residual_system(std::vector<AveragedOp> Rs, std::vector<Point> rs,
                                   std::vector<double> weights, std::size_t certify_samples,
                                   std::uint64_t certify_seed) {
  if (Rs.empty()) throw DomainError("build_residual_system: no operators");
  if (rs.size() != Rs.size()) throw DomainError("build_residual_system: one target per operator required");
  const std::size_t dim = Rs.front().dim();
  std::vector<AveragedOp> Ts;
  for (std::size_t i = 0; i < Rs.size(); ++i) {
    certify_firm(Rs[i], certify_samples, certify_seed);
    if (static_cast<std::size_t>(rs[i].size()) != dim || Rs[i].dim() != dim)
      throw DimensionError("build_residual_system: dimension mismatch");
    if (!all_finite(rs[i])) throw DomainError("build_residual_system: target is not finite");
    Ts.emplace_back(
        dim, [R = Rs[i], r = rs[i]](const Point& x) { return Point(r + x - R(x)); }, 0.5, 1.0,
        "residual_" + std::to_string(i + 1));
  }
  SolverInputs in;
  in.variant = "residual_system";
  in.weights = weights_or_uniform(std::move(weights), Rs.size());
  in.families = OperatorFamilies::constant(identity(dim), std::move(Ts));
  return in;
}

SolverInputs build_forward_backward(std::size_t dim, ResolventFamily resolvent0,
                                    std::vector<CocoerciveMap> As, std::optional<double> gamma,
                                    std::vector<double> weights) {
  if (As.empty()) throw DomainError("build_forward_backward: no cocoercive operators");
  if (!resolvent0) throw DomainError("build_forward_backward: missing resolvent of A_0");
  double min_beta = std::numeric_limits<double>::infinity();
  for (const auto& A : As) {
    if (!(A.beta > 0.0)) throw DomainError("build_forward_backward: beta must be > 0");
    if (!A.map) throw DomainError("build_forward_backward: missing operator");
    min_beta = std::min(min_beta, A.beta);
  }
  const double g = gamma.value_or(1.8 * min_beta);
  if (!(g > 0.0 && g < 2.0 * min_beta)) {
    std::ostringstream msg;
    msg << "build_forward_backward: gamma=" << g << " outside (0, " << 2.0 * min_beta << ")";
    throw DomainError(msg.str());
  }
  std::vector<AveragedOp> Ts;
  for (const auto& A : As) {
    // A beta-cocoercive => (1/beta)-Lipschitz, the constant gradient_step expects
    const double lip = std::isfinite(1.0 / A.beta) ? 1.0 / A.beta : 0.0;
    if (lip == 0.0) throw DomainError("build_forward_backward: beta too large");
    Ts.push_back(gradient_step(dim, A.map, lip, g, A.strong_monotonicity, "Id-gamma*" + A.name));
  }
  SolverInputs in;
  in.variant = "forward_backward";
  in.gamma = g;
  in.weights = weights_or_uniform(std::move(weights), As.size());
  in.families =
      OperatorFamilies::constant(resolvent_op(dim, std::move(resolvent0), g, "J_gamma_A0"), std::move(Ts));
  return in;
}

SolverInputs build_prox_grad(std::size_t dim, ResolventFamily prox0, std::vector<CocoerciveMap> grads,
                             std::optional<double> gamma, std::vector<double> weights) {
  SolverInputs in =
      build_forward_backward(dim, std::move(prox0), std::move(grads), gamma, std::move(weights));
  in.variant = "prox_grad";
  return in;
}

SmoothScalar SparseGlm::phi(std::size_t i) const {
  const double e = eta[static_cast<Eigen::Index>(i)];
  return loss == Loss::squared ? SmoothScalar::shifted_square(e) : SmoothScalar::logistic(e);
}

double SparseGlm::objective(const Point& x) const {
  double smooth = 0.0;
  const Point Ax = A * x;
  for (std::size_t i = 0; i < m(); ++i) smooth += weights[i] * phi(i).value(Ax[static_cast<Eigen::Index>(i)]);
  return alpha * x.lpNorm<1>() + smooth;
}

Point SparseGlm::smooth_gradient(const Point& x) const {
  const Point Ax = A * x;
  Point coef(static_cast<Eigen::Index>(m()));
  for (std::size_t i = 0; i < m(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    coef[k] = weights[i] * phi(i).derivative(Ax[k]);
  }
  return A.transpose() * coef;
}

double SparseGlm::optimality_residual(const Point& x) const {
  const Point g = smooth_gradient(x);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    double r;
    if (x[k] > 0.0)
      r = std::abs(g[k] + alpha);
    else if (x[k] < 0.0)
      r = std::abs(g[k] - alpha);
    else
      r = std::max(0.0, std::abs(g[k]) - alpha);
    worst = std::max(worst, r);
  }
  return worst;
}

double SparseGlm::step_bound() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < m(); ++i)
    worst = std::max(worst, phi(i).lipschitz_of_derivative *
                                A.row(static_cast<Eigen::Index>(i)).squaredNorm());
  return 2.0 / worst;
}

SparseGlm make_sparse_glm(Matrix A, Point eta, double alpha, SparseGlm::Loss loss,
                          std::vector<double> weights) {
  if (A.rows() == 0 || A.cols() == 0) throw DimensionError("make_sparse_glm: empty data matrix");
  if (eta.size() != A.rows()) throw DimensionError("make_sparse_glm: one target per row required");
  if (!A.allFinite() || !eta.allFinite()) throw DomainError("make_sparse_glm: data must be finite");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("make_sparse_glm: alpha must be >= 0");
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    if (A.row(i).squaredNorm() == 0.0) throw DomainError("make_sparse_glm: zero data row");
  if (loss == SparseGlm::Loss::logistic)
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      if (eta[i] != 0.0 && eta[i] != 1.0)
        throw DomainError("make_sparse_glm: logistic labels must be 0 or 1");
  SparseGlm glm;
  glm.weights = weights_or_uniform(std::move(weights), static_cast<std::size_t>(A.rows()));
  glm.A = std::move(A);
  glm.eta = std::move(eta);
  glm.alpha = alpha;
  glm.loss = loss;
  return glm;
}

SolverInputs build_sparse_glm(const SparseGlm& glm, std::optional<double> gamma) {
  std::vector<CocoerciveMap> grads;
  for (std::size_t i = 0; i < glm.m(); ++i) {
    const Point a = glm.A.row(static_cast<Eigen::Index>(i)).transpose();
    const SmoothScalar phi = glm.phi(i);
    CocoerciveMap g;
    g.beta = 1.0 / (phi.lipschitz_of_derivative * a.squaredNorm());
    g.map = [a, d = phi.derivative](const Point& x) { return Point(d(a.dot(x)) * a); };
    g.name = "grad_f" + std::to_string(i + 1);
    grads.push_back(std::move(g));
  }
  const double alpha = glm.alpha;
  ResolventFamily prox = [alpha](double gamma, const Point& x) { return prox_l1(x, gamma * alpha); };
  SolverInputs in = build_prox_grad(glm.dim(), prox, std::move(grads),
                                    gamma.value_or(0.9 * glm.step_bound()), glm.weights);
  in.variant = glm.loss == SparseGlm::Loss::squared ? "lasso" : "logistic";
  return in;
}

SparseGlm random_lasso(std::size_t N, std::size_t m, std::uint64_t seed, double alpha) {
  if (N == 0 || m == 0) throw DomainError("random_lasso: N and m must be >= 1");
  std::mt19937_64 rng(seed);
  Matrix A = gaussian_matrix(m, N, 1.0 / std::sqrt(static_cast<double>(N)), rng);
  const Point x_true = sparse_truth(N, rng);
  std::normal_distribution<double> noise(0.0, 0.01);
  Point eta = A * x_true;
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] += noise(rng);
  return make_sparse_glm(std::move(A), std::move(eta), alpha, SparseGlm::Loss::squared);
}

SparseGlm random_logistic(std::size_t N, std::size_t m, std::uint64_t seed, double alpha) {
  if (N == 0 || m == 0) throw DomainError("random_logistic: N and m must be >= 1");
  std::mt19937_64 rng(seed);
  Matrix A = gaussian_matrix(m, N, 1.0, rng);
  const Point x_true = sparse_truth(N, rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Point eta(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-A.row(i).dot(x_true)));
    eta[i] = unif(rng) < p ? 1.0 : 0.0;
  }
  return make_sparse_glm(std::move(A), std::move(eta), alpha, SparseGlm::Loss::logistic);
}

double feasibility_beta(std::span<const PenaltyTerm> terms) {
  double worst = 0.0;
  for (const auto& t : terms)
    worst = std::max(worst, t.phi.lipschitz_of_derivative * t.L.norm() * t.L.norm());
  if (!(worst > 0.0)) throw DomainError("feasibility_beta: degenerate penalty terms");
  return 1.0 / worst;
}

SolverInputs build_feasibility_relaxation(const ConvexSet& C0, std::vector<PenaltyTerm> terms,
                                          std::optional<double> gamma, std::vector<double> weights) {
  if (terms.empty()) throw DomainError("build_feasibility_relaxation: no penalty terms");
  const std::size_t dim = C0.dim();
  for (const auto& t : terms) {
    if (!t.phi.even_vanishing)
      throw DomainError("build_feasibility_relaxation: phi '" + t.phi.name +
                        "' is not flagged even and vanishing only at 0");
    if (!(t.phi.lipschitz_of_derivative > 0.0))
      throw DomainError("build_feasibility_relaxation: phi' must have a positive Lipschitz constant");
    if (t.L.domain_dim() != dim || t.L.codomain_dim() != t.D.dim())
      throw DimensionError("build_feasibility_relaxation: L_i, D_i and C_0 dimensions disagree");
  }
  const double beta = feasibility_beta(terms);
  const double g = gamma.value_or(1.8 * beta);
  if (!(g > 0.0 && g < 2.0 * beta)) {
    std::ostringstream msg;
    msg << "build_feasibility_relaxation: gamma=" << g << " outside (0, " << 2.0 * beta << ")";
    throw DomainError(msg.str());
  }
  std::vector<AveragedOp> Ts;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    auto grad = [term = terms[i]](const Point& x) {
      return grad_distance_penalty(term.phi, term.L, term.D, x);
    };
    Ts.push_back(gradient_step(dim, grad, 1.0 / beta, g, std::nullopt,
                               "Id-gamma*grad_penalty_" + std::to_string(i + 1)));
  }
  SolverInputs in;
  in.variant = "feasibility_relaxation";
  in.gamma = g;
  in.weights = weights_or_uniform(std::move(weights), terms.size());
  in.families = OperatorFamilies::constant(projector(C0), std::move(Ts));
  return in;
}

double feasibility_objective(std::span<const PenaltyTerm> terms, std::span<const double> weights,
                             const Point& x) {
  if (terms.size() != weights.size())
    throw DimensionError("feasibility_objective: term and weight counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i)
    total += weights[i] * distance_penalty(terms[i].phi, terms[i].L, terms[i].D, x);
  return total;
}

SolverInputs alternating_projections(const ConvexSet& C, const ConvexSet& D) {
  if (C.dim() != D.dim()) throw DimensionError("alternating_projections: dimensions differ");
  std::vector<PenaltyTerm> terms{{LinearMap::identity(C.dim()), D, SmoothScalar::half_square()}};
  SolverInputs in = build_feasibility_relaxation(C, std::move(terms), 1.0);
  in.variant = "alternating_projections";
  return in;
}

LegendreInstance random_legendre(std::size_t N, std::size_t m, std::uint64_t seed) {
  if (N == 0 || m == 0) throw DomainError("random_legendre: N and m must be >= 1");
  std::mt19937_64 rng(seed);
  LegendreInstance inst;
  inst.A = gaussian_matrix(m, N, 1.0, rng);
  for (Eigen::Index i = 0; i < inst.A.rows(); ++i) inst.A.row(i).normalize();
  std::normal_distribution<double> normal;
  inst.targets.resize(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < inst.targets.size(); ++i) inst.targets[i] = normal(rng);
  return inst;
}

std::vector<PenaltyTerm> legendre_terms(const LegendreInstance& inst) {
  std::vector<PenaltyTerm> terms;
  for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
    const Point a = inst.A.row(i).transpose();
    Point target(1);
    target[0] = inst.targets[i];
    terms.push_back({LinearMap::functional(a), ConvexSet::singleton(target), SmoothScalar::square()});
  }
  return terms;
}

} // namespace blocksplit
