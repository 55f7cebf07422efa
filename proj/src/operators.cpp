#include "blocksplit/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "blocksplit/errors.hpp"

namespace blocksplit {

bool all_finite(const Point& x) { return x.allFinite(); }

void require_same_dim(const Point& a, const Point& b, const char* what) {
  if (a.size() != b.size()) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch (" << a.size() << " vs " << b.size() << ")";
    throw DimensionError(msg.str());
  }
}

void validate_weights(std::span<const double> weights, double tol) {
  if (weights.empty()) throw DomainError("weights: empty list");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("weights: entries must be strictly positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "weights: sum is " << sum << ", expected 1";
    throw DomainError(msg.str());
  }
}

Point weighted_sum(std::span<const Point> terms, std::span<const double> weights) {
  if (terms.empty()) throw DomainError("weighted_sum: no terms");
  if (terms.size() != weights.size()) throw DimensionError("weighted_sum: term/weight count mismatch");
  const Eigen::Index d = terms.front().size();
  Point sum = Point::Zero(d);
  Point comp = Point::Zero(d);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].size() != d) throw DimensionError("weighted_sum: dimension mismatch");
    for (Eigen::Index k = 0; k < d; ++k) {
      const double v = weights[i] * terms[i][k];
      const double t = sum[k] + v;
      if (std::abs(sum[k]) >= std::abs(v))
        comp[k] += (sum[k] - t) + v;
      else
        comp[k] += (v - t) + sum[k];
      sum[k] = t;
    }
  }
  return sum + comp;
}

AveragedOp::AveragedOp(std::size_t dim, Map eval, double alpha,
                       std::optional<double> lipschitz, std::string name)
    : dim_(dim), eval_(std::make_shared<const Map>(std::move(eval))), alpha_(alpha),
      lipschitz_(lipschitz), name_(std::move(name)) {
  if (dim_ == 0) throw DomainError("AveragedOp: dimension must be positive");
  if (!*eval_) throw DomainError("AveragedOp: empty evaluation function");
  if (!(alpha_ > 0.0 && alpha_ <= 1.0)) throw DomainError("AveragedOp: alpha must lie in (0, 1]");
  if (lipschitz_ && !(*lipschitz_ >= 0.0 && *lipschitz_ <= 1.0))
    throw DomainError("AveragedOp: Lipschitz constant must lie in [0, 1]");
}

Point AveragedOp::operator()(const Point& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) {
    std::ostringstream msg;
    msg << "apply(" << (name_.empty() ? "operator" : name_) << "): expected dimension " << dim_
        << ", got " << x.size();
    throw DimensionError(msg.str());
  }
  Point y = (*eval_)(x);
  if (static_cast<std::size_t>(y.size()) != dim_)
    throw NonFiniteError("apply(" + name_ + "): operator changed the dimension");
  if (!all_finite(y)) throw NonFiniteError("apply(" + name_ + "): non-finite output");
  return y;
}

Point apply(const AveragedOp& op, const Point& x) { return op(x); }

AveragedOp identity(std::size_t dim) {
  return AveragedOp(dim, [](const Point& x) { return x; }, 0.5, 1.0, "identity");
}

AveragedOp scaling(std::size_t dim, double c) {
  if (!(c >= -1.0 && c <= 1.0)) throw DomainError("scaling: factor must lie in [-1, 1]");
  const double alpha = c == 1.0 ? 0.5 : (1.0 - c) / 2.0;
  return AveragedOp(dim, [c](const Point& x) { return Point(c * x); }, alpha, std::abs(c),
                    "scaling");
}

AveragedOp convex_combination(std::span<const AveragedOp> ops, std::span<const double> weights) {
  if (ops.empty()) throw DomainError("convex_combination: empty operator list");
  if (ops.size() != weights.size())
    throw DomainError("convex_combination: operator/weight count mismatch");
  validate_weights(weights);
  const std::size_t dim = ops.front().dim();
  double alpha = 0.0;
  bool all_lipschitz = true;
  double lipschitz = 0.0;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (ops[i].dim() != dim) throw DimensionError("convex_combination: dimension mismatch");
    alpha = std::max(alpha, ops[i].alpha());
    if (ops[i].lipschitz())
      lipschitz += weights[i] * *ops[i].lipschitz();
    else
      all_lipschitz = false;
  }
  std::vector<AveragedOp> members(ops.begin(), ops.end());
  std::vector<double> w(weights.begin(), weights.end());
  auto eval = [members = std::move(members), w = std::move(w)](const Point& x) {
    std::vector<Point> terms;
    terms.reserve(members.size());
    for (const auto& op : members) terms.push_back(op(x));
    return weighted_sum(terms, w);
  };
  std::optional<double> lip;
  if (all_lipschitz) lip = std::min(1.0, lipschitz);
  return AveragedOp(dim, std::move(eval), alpha, lip, "convex_combination");
}

AveragedOp compose(const AveragedOp& outer, const AveragedOp& inner) {
  if (outer.dim() != inner.dim()) throw DimensionError("compose: dimension mismatch");
  std::optional<double> lip;
  if (outer.lipschitz() && inner.lipschitz()) lip = *outer.lipschitz() * *inner.lipschitz();
  return AveragedOp(
      outer.dim(), [outer, inner](const Point& x) { return outer(inner(x)); }, 1.0, lip,
      outer.name() + "∘" + inner.name());
}

AveragedOp relax(const AveragedOp& op, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw DomainError("relax: lambda must be strictly positive");
  const double alpha = lambda * op.alpha();
  if (alpha > 1.0 + 1e-15) throw DomainError("relax: lambda * alpha exceeds 1");
  std::optional<double> lip;
  if (op.lipschitz()) lip = std::min(1.0, std::abs(1.0 - lambda) + lambda * *op.lipschitz());
  return AveragedOp(
      op.dim(), [op, lambda](const Point& x) { return Point(x + lambda * (op(x) - x)); },
      std::min(alpha, 1.0), lip, "relax(" + op.name() + ")");
}

CertificateReport certify_averaged(const AveragedOp& op, std::size_t sample_count,
                                   std::uint64_t seed, double tolerance) {
  return certify_averaged_at(op, op.alpha(), sample_count, seed, tolerance);
}

CertificateReport certify_averaged_at(const AveragedOp& op, double alpha,
                                      std::size_t sample_count, std::uint64_t seed,
                                      double tolerance) {
  if (sample_count == 0) throw DomainError("certify_averaged: sample_count must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("certify_averaged: alpha must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(op.dim());
  auto gaussian = [&] {
    Point v(d);
    for (Eigen::Index k = 0; k < d; ++k) v[k] = normal(rng);
    return v;
  };
  const double shrink = (1.0 - alpha) / alpha;

  CertificateReport report;
  report.samples = sample_count;
  if (op.lipschitz()) report.max_lipschitz_violation = 0.0;
  for (std::size_t s = 0; s < sample_count; ++s) {
    // Pairs at mixed scales, with the offset sometimes much smaller than the
    // base point so that local behaviour is probed too.
    const double scale = std::pow(10.0, -2.0 + 4.0 * unit(rng));
    const double offset = scale * std::pow(10.0, -3.0 + 3.0 * unit(rng));
    const Point x = scale * gaussian();
    const Point y = x + offset * gaussian();
    const Point tx = op(x);
    const Point ty = op(y);
    const double dxy2 = (x - y).squaredNorm();
    const double dt2 = (tx - ty).squaredNorm();
    const double dr2 = ((x - tx) - (y - ty)).squaredNorm();
    const double excess = dt2 - (dxy2 - shrink * dr2);
    const double scaled = excess / (1.0 + dxy2);
    report.max_violation = std::max(report.max_violation, excess);
    report.max_scaled_violation = std::max(report.max_scaled_violation, scaled);
    if (scaled > tolerance) ++report.failures;
    if (op.lipschitz()) {
      const double lexcess = std::sqrt(dt2) - *op.lipschitz() * std::sqrt(dxy2);
      const double lscaled = lexcess / (1.0 + std::sqrt(dxy2));
      report.max_lipschitz_violation = std::max(*report.max_lipschitz_violation, lexcess);
      if (lscaled > tolerance) ++report.lipschitz_failures;
    }
  }
  report.passed = report.failures == 0 && report.lipschitz_failures == 0;
  return report;
}

} // namespace blocksplit
