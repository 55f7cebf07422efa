#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blocksplit/calculus.hpp"
#include "blocksplit/operators.hpp"
#include "blocksplit/solver.hpp"

namespace blocksplit {

/// Operator families plus the weights and step size they were built with.
struct SolverInputs {
  std::string variant;
  OperatorFamilies families;
  std::vector<double> weights;
  std::optional<double> gamma;
};

/// Uniform weights 1/m.
std::vector<double> uniform_weights(std::size_t m);

/// x -> J_{gamma A} x for a step size gamma > 0.
using ResolventFamily = std::function<Point(double gamma, const Point& x)>;

/// T_0 = Id and T_i = Ts[i]. Each T_i must pass certify_averaged_at(., 1/2)
/// on `certify_samples` seeded pairs; DomainError otherwise.
SolverInputs build_common_fixed_point(std::vector<AveragedOp> Ts, std::vector<double> weights = {},
                                      std::size_t certify_samples = 200,
                                      std::uint64_t certify_seed = 7);

/// T_{i,n} = Id + (1 - rho_i / gamma_{i,n}) (J_{gamma_{i,n} A_i} - Id), T_0 = Id,
/// for rho_i-cohypomonotone A_i (maximality is the caller's responsibility).
/// gammas[i] is cycled: gamma_{i,n} = gammas[i][n mod gammas[i].size()].
/// Every gamma_{i,n} must be >= rho_i + epsilon.
SolverInputs build_cohypomonotone(std::size_t dim, std::vector<ResolventFamily> resolvents,
                                  std::vector<double> rhos, std::vector<std::vector<double>> gammas,
                                  std::vector<double> weights = {}, double epsilon = 1e-3);

/// T_i = r_i + Id - R_i with R_i firmly nonexpansive, T_0 = Id.
SolverInputs build_residual_system(std::vector<AveragedOp> Rs, std::vector<Point> rs,
                                   std::vector<double> weights = {},
                                   std::size_t certify_samples = 200,
                                   std::uint64_t certify_seed = 11);

/// A beta-cocoercive single-valued operator; `strong_monotonicity` is optional.
struct CocoerciveMap {
  std::function<Point(const Point&)> map;
  double beta = 0.0;
  std::optional<double> strong_monotonicity;
  std::string name = "A";
};

/// T_0 = J_{gamma A_0}, T_i = Id - gamma A_i with 0 < gamma < 2 min beta_i
/// (default 1.8 min beta_i).
SolverInputs build_forward_backward(std::size_t dim, ResolventFamily resolvent0,
                                    std::vector<CocoerciveMap> As,
                                    std::optional<double> gamma = std::nullopt,
                                    std::vector<double> weights = {});

/// T_0 = prox_{gamma f_0}, T_i = Id - gamma grad f_i. `prox0(gamma, x)` must
/// evaluate prox_{gamma f_0}; each gradient is 1/beta_i-Lipschitz.
SolverInputs build_prox_grad(std::size_t dim, ResolventFamily prox0,
                             std::vector<CocoerciveMap> grads,
                             std::optional<double> gamma = std::nullopt,
                             std::vector<double> weights = {});

/// alpha |x|_1 + sum_i w_i phi_i(<x, a_i>) with rows a_i of `A` and
/// phi_i = loss(eta_i). Covers the Lasso (squared loss) and penalized
/// logistic regression.
struct SparseGlm {
  enum class Loss { squared, logistic };

  Matrix A;
  Point eta;
  double alpha = 0.0;
  Loss loss = Loss::squared;
  std::vector<double> weights;

  std::size_t dim() const { return static_cast<std::size_t>(A.cols()); }
  std::size_t m() const { return static_cast<std::size_t>(A.rows()); }
  SmoothScalar phi(std::size_t i) const;
  double objective(const Point& x) const;
  /// Gradient of the smooth part sum_i w_i phi_i(<x, a_i>).
  Point smooth_gradient(const Point& x) const;
  /// max_k of the distance from -grad_k to the subdifferential of alpha|.| at x_k.
  double optimality_residual(const Point& x) const;
  /// Upper end 2 / max_i (mu_i |a_i|^2) of the admissible step interval.
  double step_bound() const;
};

/// Validates dimensions, alpha >= 0, weights (uniform when empty), and eta in
/// {0, 1} for the logistic loss.
SparseGlm make_sparse_glm(Matrix A, Point eta, double alpha, SparseGlm::Loss loss,
                          std::vector<double> weights = {});

/// Proximal-gradient inputs for a SparseGlm: T_0 = prox_l1 at gamma alpha,
/// T_i = Id - gamma phi_i'(<., a_i>) a_i. gamma defaults to 0.9 step_bound().
SolverInputs build_sparse_glm(const SparseGlm& glm, std::optional<double> gamma = std::nullopt);

/// Seeded Lasso instance: rows a_i ~ N(0, I/N), a sparse ground truth with
/// max(1, N/4) nonzeros, eta = A x_true + 0.01 noise, alpha = 0.01.
SparseGlm random_lasso(std::size_t N, std::size_t m, std::uint64_t seed, double alpha = 0.01);

/// Seeded logistic instance with labels drawn from the logistic model.
SparseGlm random_logistic(std::size_t N, std::size_t m, std::uint64_t seed, double alpha = 0.01);

/// One penalty phi(d_D(L x)) of the feasibility relaxation.
struct PenaltyTerm {
  LinearMap L;
  ConvexSet D;
  SmoothScalar phi;
};

/// beta = 1 / max_i (mu_i |L_i|^2).
double feasibility_beta(std::span<const PenaltyTerm> terms);

/// T_0 = proj_{C0}, T_i = Id - gamma grad(phi_i o d_{D_i} o L_i), with
/// gamma in (0, 2 beta) (default 1.8 beta). Each phi_i must be flagged
/// even_vanishing.
SolverInputs build_feasibility_relaxation(const ConvexSet& C0, std::vector<PenaltyTerm> terms,
                                          std::optional<double> gamma = std::nullopt,
                                          std::vector<double> weights = {});

/// sum_i w_i phi_i(d_{D_i}(L_i x)).
double feasibility_objective(std::span<const PenaltyTerm> terms, std::span<const double> weights,
                             const Point& x);

/// m = 1, T_0 = proj_C, T_1 = Id - grad(d_D^2 / 2) = proj_D.
SolverInputs alternating_projections(const ConvexSet& C, const ConvexSet& D);

/// Least-squares feasibility instance: m unit-norm rows a_i in R^N drawn from
/// a seeded Gaussian, targets beta_i ~ N(0, 1).
struct LegendreInstance {
  Matrix A;
  Point targets;
};
LegendreInstance random_legendre(std::size_t N, std::size_t m, std::uint64_t seed);

/// Terms phi = |.|^2 of d_{{beta_i}}(<x, a_i>).
std::vector<PenaltyTerm> legendre_terms(const LegendreInstance& inst);

} // namespace blocksplit
