#include "blocksplit/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "blocksplit/calculus.hpp"
#include "blocksplit/errors.hpp"
#include "blocksplit/trace_io.hpp"

namespace blocksplit {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& key, const std::string& what) {
  throw ConfigError("config: '" + key + "' " + what);
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) config_fail(where.empty() ? key : where + "." + key, "is not a recognised key");
}

const json& require_object(const json& j, const std::string& key) {
  if (!j.is_object()) config_fail(key, "must be an object");
  return j;
}

double get_number(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) config_fail(path, "is required");
  const json& v = obj.at(key);
  if (!v.is_number()) config_fail(path, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) config_fail(path, "must be finite");
  return d;
}

std::size_t get_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0) config_fail(path, "must be a nonnegative integer");
  return v.get<std::size_t>();
}

std::uint64_t get_seed(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0) config_fail(path, "must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) config_fail(path, "must be true or false");
  return v.get<bool>();
}

std::vector<double> get_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) config_fail(path, "must be a nonempty array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) config_fail(path, "must contain only numbers");
    out.push_back(e.get<double>());
    if (!std::isfinite(out.back())) config_fail(path, "must contain finite numbers");
  }
  return out;
}

Point to_point(const std::vector<double>& v) {
  return Eigen::Map<const Point>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Point get_point(const json& v, const std::string& path) { return to_point(get_vector(v, path)); }

Matrix get_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) config_fail(path, "must be a nonempty array of rows");
  const std::size_t cols = get_vector(v.front(), path).size();
  Matrix M(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    const auto row = get_vector(v[r], path);
    if (row.size() != cols) config_fail(path, "has rows of different lengths");
    for (std::size_t c = 0; c < cols; ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return M;
}

ConvexSet parse_set(const json& j, const std::string& path) {
  require_object(j, path);
  if (!j.contains("kind") || !j.at("kind").is_string()) config_fail(path + ".kind", "must be a string");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "space") {
    reject_unknown(j, path, {"kind", "dim"});
    if (!j.contains("dim")) config_fail(path + ".dim", "is required");
    const std::size_t d = get_count(j.at("dim"), path + ".dim");
    if (d == 0) config_fail(path + ".dim", "must be >= 1");
    return ConvexSet::space(d);
  }
  if (kind == "ball") {
    reject_unknown(j, path, {"kind", "center", "radius"});
    if (!j.contains("center")) config_fail(path + ".center", "is required");
    return ConvexSet::ball(get_point(j.at("center"), path + ".center"),
                           get_number(j, "radius", path + ".radius"));
  }
  if (kind == "box") {
    reject_unknown(j, path, {"kind", "lower", "upper"});
    if (!j.contains("lower") || !j.contains("upper")) config_fail(path, "needs lower and upper");
    auto bound = [&](const char* key, double inf) {
      const json& v = j.at(key);
      if (!v.is_array() || v.empty()) config_fail(path + "." + key, "must be a nonempty array");
      Point p(static_cast<Eigen::Index>(v.size()));
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k].is_null())
          p[static_cast<Eigen::Index>(k)] = inf;
        else if (v[k].is_number())
          p[static_cast<Eigen::Index>(k)] = v[k].get<double>();
        else
          config_fail(path + "." + key, "entries must be numbers or null");
      }
      return p;
    };
    const double inf = std::numeric_limits<double>::infinity();
    return ConvexSet::box(bound("lower", -inf), bound("upper", inf));
  }
  if (kind == "halfspace" || kind == "hyperplane") {
    reject_unknown(j, path, {"kind", "normal", "offset"});
    if (!j.contains("normal")) config_fail(path + ".normal", "is required");
    const Point a = get_point(j.at("normal"), path + ".normal");
    const double b = get_number(j, "offset", path + ".offset");
    return kind == "halfspace" ? ConvexSet::halfspace(a, b) : ConvexSet::hyperplane(a, b);
  }
  if (kind == "affine") {
    reject_unknown(j, path, {"kind", "matrix", "rhs"});
    if (!j.contains("matrix") || !j.contains("rhs")) config_fail(path, "needs matrix and rhs");
    return ConvexSet::affine(get_matrix(j.at("matrix"), path + ".matrix"),
                             get_point(j.at("rhs"), path + ".rhs"));
  }
  if (kind == "singleton") {
    reject_unknown(j, path, {"kind", "point"});
    if (!j.contains("point")) config_fail(path + ".point", "is required");
    return ConvexSet::singleton(get_point(j.at("point"), path + ".point"));
  }
  config_fail(path + ".kind", "must be one of space, ball, box, halfspace, hyperplane, affine, singleton");
}

SmoothScalar parse_phi(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "square") return SmoothScalar::square();
    if (name == "half_square") return SmoothScalar::half_square();
    config_fail(path, "must be square, half_square or an object");
  }
  require_object(j, path);
  if (!j.contains("kind") || !j.at("kind").is_string()) config_fail(path + ".kind", "must be a string");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "huber") {
    reject_unknown(j, path, {"kind", "delta"});
    return SmoothScalar::huber(get_number(j, "delta", path + ".delta"));
  }
  if (kind == "scaled_half_square") {
    reject_unknown(j, path, {"kind", "mu"});
    return SmoothScalar::scaled_half_square(get_number(j, "mu", path + ".mu"));
  }
  if (kind == "square") return SmoothScalar::square();
  if (kind == "half_square") return SmoothScalar::half_square();
  config_fail(path + ".kind", "must be square, half_square, scaled_half_square or huber");
}

// A x - b with A symmetric positive semidefinite, as a cocoercive map.
struct AffineMonotone {
  Matrix M;
  Point b;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
};

AffineMonotone parse_affine_monotone(const json& j, const std::string& path) {
  require_object(j, path);
  if (!j.contains("matrix")) config_fail(path + ".matrix", "is required");
  AffineMonotone a;
  a.M = get_matrix(j.at("matrix"), path + ".matrix");
  if (a.M.rows() != a.M.cols()) config_fail(path + ".matrix", "must be square");
  if ((a.M - a.M.transpose()).norm() > 1e-12 * (1.0 + a.M.norm()))
    config_fail(path + ".matrix", "must be symmetric");
  a.b = j.contains("shift") ? get_point(j.at("shift"), path + ".shift") : Point::Zero(a.M.rows());
  if (a.b.size() != a.M.rows()) config_fail(path + ".shift", "has the wrong length");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a.M, Eigen::EigenvaluesOnly);
  a.lambda_min = eig.eigenvalues().minCoeff();
  a.lambda_max = eig.eigenvalues().maxCoeff();
  if (a.lambda_min < -1e-12) config_fail(path + ".matrix", "must be positive semidefinite");
  if (!(a.lambda_max > 0.0)) config_fail(path + ".matrix", "must be nonzero");
  return a;
}

DataSet load_glm_data(const json& p, const std::filesystem::path& base, std::uint64_t default_seed,
                      bool logistic) {
  if (p.contains("data")) {
    if (!p.at("data").is_string()) config_fail("problem.data", "must be a path");
    std::filesystem::path path = p.at("data").get<std::string>();
    if (path.is_relative()) path = base / path;
    return read_data_csv(path);
  }
  if (!p.contains("random")) config_fail("problem", "needs either data or random");
  const json& r = require_object(p.at("random"), "problem.random");
  reject_unknown(r, "problem.random", {"N", "m", "seed"});
  if (!r.contains("N") || !r.contains("m")) config_fail("problem.random", "needs N and m");
  const std::size_t N = get_count(r.at("N"), "problem.random.N");
  const std::size_t m = get_count(r.at("m"), "problem.random.m");
  if (N == 0 || m == 0) config_fail("problem.random", "N and m must be >= 1");
  const std::uint64_t seed = r.contains("seed") ? get_seed(r.at("seed"), "problem.random.seed") : default_seed;
  if (p.value("variant", "") == "legendre") {
    LegendreInstance inst = random_legendre(N, m, seed);
    return {std::move(inst.A), std::move(inst.targets)};
  }
  SparseGlm g = logistic ? random_logistic(N, m, seed) : random_lasso(N, m, seed);
  return {std::move(g.A), std::move(g.eta)};
}

std::vector<double> weights_for(const ExperimentConfig& cfg, std::size_t m) {
  if (!cfg.weights) return {};
  if (cfg.weights->size() != m) config_fail("weights", "must have one entry per operator");
  return *cfg.weights;
}

void validate_problem(const json& p) {
  require_object(p, "problem");
  if (!p.contains("variant") || !p.at("variant").is_string()) config_fail("problem.variant", "must be a string");
  const std::string v = p.at("variant").get<std::string>();
  if (v == "lasso" || v == "logistic" || v == "prox_grad") {
    reject_unknown(p, "problem", {"variant", "data", "random", "alpha", "loss"});
    if (!p.contains("data") && !p.contains("random")) config_fail("problem", "needs either data or random");
    if (p.contains("alpha") && !(get_number(p, "alpha", "problem.alpha") >= 0.0))
      config_fail("problem.alpha", "must be >= 0");
    if (v == "prox_grad" && p.contains("loss")) {
      const json& l = p.at("loss");
      if (!l.is_string() || (l != "squared" && l != "logistic"))
        config_fail("problem.loss", "must be squared or logistic");
    }
  } else if (v == "legendre") {
    reject_unknown(p, "problem", {"variant", "data", "random"});
    if (!p.contains("data") && !p.contains("random")) config_fail("problem", "needs either data or random");
  } else if (v == "feasibility_relaxation") {
    reject_unknown(p, "problem", {"variant", "C0", "terms"});
    if (!p.contains("C0") || !p.contains("terms")) config_fail("problem", "needs C0 and terms");
    if (!p.at("terms").is_array() || p.at("terms").empty()) config_fail("problem.terms", "must be a nonempty array");
  } else if (v == "alternating_projections") {
    reject_unknown(p, "problem", {"variant", "C", "D"});
    if (!p.contains("C") || !p.contains("D")) config_fail("problem", "needs C and D");
  } else if (v == "common_fixed_point") {
    reject_unknown(p, "problem", {"variant", "sets"});
    if (!p.contains("sets") || !p.at("sets").is_array() || p.at("sets").empty())
      config_fail("problem.sets", "must be a nonempty array");
  } else if (v == "residual_system") {
    reject_unknown(p, "problem", {"variant", "sets", "targets"});
    if (!p.contains("sets") || !p.contains("targets") || !p.at("sets").is_array() ||
        !p.at("targets").is_array() || p.at("sets").size() != p.at("targets").size() || p.at("sets").empty())
      config_fail("problem", "needs equally long nonempty sets and targets arrays");
  } else if (v == "forward_backward") {
    reject_unknown(p, "problem", {"variant", "A0", "As"});
    if (!p.contains("A0") || !p.contains("As") || !p.at("As").is_array() || p.at("As").empty())
      config_fail("problem", "needs A0 and a nonempty As array");
  } else if (v == "cohypomonotone") {
    reject_unknown(p, "problem", {"variant", "operators"});
    if (!p.contains("operators") || !p.at("operators").is_array() || p.at("operators").empty())
      config_fail("problem.operators", "must be a nonempty array");
  } else {
    config_fail("problem.variant",
                "must be one of lasso, logistic, prox_grad, legendre, feasibility_relaxation, "
                "alternating_projections, common_fixed_point, residual_system, forward_backward, "
                "cohypomonotone");
  }
}

std::string describe_exception(const std::exception& e) { return e.what(); }

} // namespace

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  require_object(j, "<root>");
  reject_unknown(j, "", {"problem", "schedule", "solver", "weights", "gamma", "x0", "errors",
                         "reference", "audit", "output"});
  if (!j.contains("problem")) config_fail("problem", "is required");
  validate_problem(j.at("problem"));
  cfg.problem = j.at("problem");

  if (j.contains("solver")) {
    const json& s = require_object(j.at("solver"), "solver");
    reject_unknown(s, "solver", {"epsilon", "tol", "max_iters", "check_every", "seed", "economical", "threads"});
    if (s.contains("epsilon")) cfg.epsilon = get_number(s, "epsilon", "solver.epsilon");
    if (s.contains("tol")) cfg.tol = get_number(s, "tol", "solver.tol");
    if (s.contains("max_iters")) cfg.max_iters = get_count(s.at("max_iters"), "solver.max_iters");
    if (s.contains("check_every")) cfg.check_every = get_count(s.at("check_every"), "solver.check_every");
    if (s.contains("seed")) cfg.seed = get_seed(s.at("seed"), "solver.seed");
    if (s.contains("economical")) cfg.economical = get_bool(s.at("economical"), "solver.economical");
    if (s.contains("threads")) cfg.threads = get_count(s.at("threads"), "solver.threads");
  }
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) config_fail("solver.epsilon", "must lie in (0, 1)");
  if (!(cfg.tol >= 0.0)) config_fail("solver.tol", "must be >= 0");
  if (cfg.check_every == 0) config_fail("solver.check_every", "must be >= 1");
  if (cfg.threads == 0) config_fail("solver.threads", "must be >= 1");

  if (j.contains("schedule")) {
    const json& s = require_object(j.at("schedule"), "schedule");
    reject_unknown(s, "schedule", {"kind", "block_size", "K", "seed", "blocks"});
    if (!s.contains("kind") || !s.at("kind").is_string()) config_fail("schedule.kind", "must be a string");
    cfg.schedule.kind = s.at("kind").get<std::string>();
    const auto& k = cfg.schedule.kind;
    if (k != "full" && k != "cyclic" && k != "quasicyclic" && k != "explicit")
      config_fail("schedule.kind", "must be full, cyclic, quasicyclic or explicit");
    if (s.contains("block_size")) {
      cfg.schedule.block_size = get_count(s.at("block_size"), "schedule.block_size");
      if (cfg.schedule.block_size == 0) config_fail("schedule.block_size", "must be >= 1");
    }
    if (s.contains("K")) {
      cfg.schedule.K = get_count(s.at("K"), "schedule.K");
      if (*cfg.schedule.K == 0) config_fail("schedule.K", "must be >= 1");
    }
    if (s.contains("seed")) cfg.schedule.seed = get_seed(s.at("seed"), "schedule.seed");
    if (k == "quasicyclic" && !cfg.schedule.K) config_fail("schedule.K", "is required for quasicyclic schedules");
    if (k == "explicit") {
      if (!cfg.schedule.K) config_fail("schedule.K", "is required for explicit schedules");
      if (!s.contains("blocks") || !s.at("blocks").is_array() || s.at("blocks").empty())
        config_fail("schedule.blocks", "must be a nonempty array of blocks");
      for (const auto& b : s.at("blocks")) {
        if (!b.is_array() || b.empty()) config_fail("schedule.blocks", "entries must be nonempty arrays");
        Block blk;
        for (const auto& i : b) {
          const std::size_t idx = get_count(i, "schedule.blocks");
          if (idx == 0) config_fail("schedule.blocks", "indices are 1-based");
          blk.push_back(idx - 1);
        }
        cfg.schedule.blocks.push_back(std::move(blk));
      }
    }
  }

  if (j.contains("weights")) cfg.weights = get_vector(j.at("weights"), "weights");
  if (cfg.weights) {
    try {
      validate_weights(*cfg.weights);
    } catch (const DomainError& e) {
      config_fail("weights", std::string("are invalid: ") + e.what());
    }
  }
  if (j.contains("gamma")) {
    cfg.gamma = get_number(j, "gamma", "gamma");
    if (!(*cfg.gamma > 0.0)) config_fail("gamma", "must be > 0");
  }
  if (j.contains("x0")) cfg.x0 = get_vector(j.at("x0"), "x0");

  if (j.contains("errors")) {
    const json& e = require_object(j.at("errors"), "errors");
    reject_unknown(e, "errors", {"scale", "power", "seed", "outer", "inner"});
    ErrorSpec spec;
    spec.scale = get_number(e, "scale", "errors.scale");
    if (!(spec.scale >= 0.0)) config_fail("errors.scale", "must be >= 0");
    if (e.contains("power")) spec.power = get_number(e, "power", "errors.power");
    if (!(spec.power > 1.0)) config_fail("errors.power", "must exceed 1");
    if (e.contains("seed")) spec.seed = get_seed(e.at("seed"), "errors.seed");
    if (e.contains("outer")) spec.outer = get_bool(e.at("outer"), "errors.outer");
    if (e.contains("inner")) spec.inner = get_bool(e.at("inner"), "errors.inner");
    cfg.errors = spec;
  }

  if (j.contains("reference")) {
    if (!j.at("reference").is_string()) config_fail("reference", "must be none or auto");
    cfg.reference = j.at("reference").get<std::string>();
    if (cfg.reference != "none" && cfg.reference != "auto") config_fail("reference", "must be none or auto");
  }
  if (j.contains("audit")) {
    const json& a = require_object(j.at("audit"), "audit");
    reject_unknown(a, "audit", {"fejer", "linear_rate"});
    if (a.contains("fejer")) cfg.fejer_audit = get_bool(a.at("fejer"), "audit.fejer");
    if (a.contains("linear_rate")) cfg.linear_rate_audit = get_bool(a.at("linear_rate"), "audit.linear_rate");
  }
  if ((cfg.fejer_audit || cfg.linear_rate_audit) && cfg.reference == "none")
    config_fail("audit", "requires reference = auto");

  if (j.contains("output")) {
    const json& o = require_object(j.at("output"), "output");
    reject_unknown(o, "output", {"trace", "iterates", "summary"});
    auto path_of = [&](const char* key) -> std::optional<std::filesystem::path> {
      if (!o.contains(key)) return std::nullopt;
      if (!o.at(key).is_string()) config_fail(std::string("output.") + key, "must be a path");
      std::filesystem::path p = o.at(key).get<std::string>();
      return p.is_relative() ? base_dir / p : p;
    };
    cfg.trace_out = path_of("trace");
    cfg.iterates_out = path_of("iterates");
    cfg.summary_out = path_of("summary");
  }

  // Data files must exist before anything is built.
  if (cfg.problem.contains("data")) {
    if (!cfg.problem.at("data").is_string()) config_fail("problem.data", "must be a path");
    std::filesystem::path p = cfg.problem.at("data").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::is_regular_file(p)) config_fail("problem.data", "names a missing file: " + p.string());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

DataSet read_data_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> row;
    try {
      for (const auto& c : cells) row.push_back(parse_double(c));
    } catch (const ConfigError&) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell");
    }
    if (row.size() < 2) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": need a_i and eta_i");
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    for (double v : row)
      if (!std::isfinite(v)) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": non-finite value");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("data file " + path.string() + " has no rows");
  const std::size_t N = rows.front().size() - 1;
  DataSet d;
  d.A.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(N));
  d.eta.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < N; ++k) d.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    d.eta[static_cast<Eigen::Index>(i)] = rows[i][N];
  }
  return d;
}

BlockSchedule build_schedule(const ScheduleSpec& spec, std::size_t m, std::uint64_t default_seed) {
  if (spec.kind == "full") {
    if (spec.K) {
      // the declared K only matters for audits; full blocks cover every window
      BlockSchedule full = make_full(m);
      return BlockSchedule(m, *spec.K, [full](std::size_t n) { return full.block(n); }, "full");
    }
    return make_full(m);
  }
  if (spec.kind == "cyclic") {
    if (spec.block_size > m) config_fail("schedule.block_size", "exceeds the operator count");
    BlockSchedule s = make_cyclic(m, spec.block_size);
    if (spec.K && *spec.K != s.covering_constant())
      return BlockSchedule(m, *spec.K, [s](std::size_t n) { return s.block(n); }, "cyclic");
    return s;
  }
  if (spec.kind == "quasicyclic") return make_quasicyclic_random(m, *spec.K, spec.seed.value_or(default_seed));
  for (const auto& b : spec.blocks)
    for (std::size_t i : b)
      if (i >= m) config_fail("schedule.blocks", "index exceeds the operator count");
  return make_explicit(m, *spec.K, spec.blocks);
}

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  const json& p = cfg.problem;
  const std::string variant = p.at("variant").get<std::string>();
  BuiltProblem bp;

  if (variant == "lasso" || variant == "logistic" || variant == "prox_grad") {
    const bool logistic = variant == "logistic" || (variant == "prox_grad" && p.value("loss", "squared") == "logistic");
    DataSet data = load_glm_data(p, cfg.base_dir, cfg.seed, logistic);
    const double alpha = p.contains("alpha") ? p.at("alpha").get<double>() : 0.01;
    const std::size_t m = static_cast<std::size_t>(data.A.rows());
    SparseGlm glm = make_sparse_glm(std::move(data.A), std::move(data.eta), alpha,
                                    logistic ? SparseGlm::Loss::logistic : SparseGlm::Loss::squared,
                                    weights_for(cfg, m));
    bp.inputs = build_sparse_glm(glm, cfg.gamma);
    bp.objective = [glm](const Point& x) { return glm.objective(x); };
    bp.glm = std::move(glm);
  } else if (variant == "legendre") {
    DataSet data = load_glm_data(p, cfg.base_dir, cfg.seed, false);
    LegendreInstance inst{data.A, data.eta};
    auto terms = legendre_terms(inst);
    const std::size_t m = terms.size();
    bp.inputs = build_feasibility_relaxation(ConvexSet::space(static_cast<std::size_t>(data.A.cols())), terms,
                                             cfg.gamma.value_or(0.9 * 2.0 * feasibility_beta(terms)),
                                             weights_for(cfg, m));
    bp.inputs.variant = "legendre";
    auto w = bp.inputs.weights;
    bp.objective = [terms, w](const Point& x) { return feasibility_objective(terms, w, x); };
    if (!cfg.weights) bp.least_squares = std::move(data);
  } else if (variant == "feasibility_relaxation") {
    const ConvexSet C0 = parse_set(p.at("C0"), "problem.C0");
    std::vector<PenaltyTerm> terms;
    for (std::size_t i = 0; i < p.at("terms").size(); ++i) {
      const std::string path = "problem.terms[" + std::to_string(i) + "]";
      const json& t = require_object(p.at("terms")[i], path);
      reject_unknown(t, path, {"L", "D", "phi"});
      if (!t.contains("D")) config_fail(path + ".D", "is required");
      ConvexSet D = parse_set(t.at("D"), path + ".D");
      LinearMap L = (!t.contains("L") || (t.at("L").is_string() && t.at("L") == "identity"))
                        ? LinearMap::identity(C0.dim())
                        : LinearMap(get_matrix(t.at("L"), path + ".L"));
      SmoothScalar phi = t.contains("phi") ? parse_phi(t.at("phi"), path + ".phi") : SmoothScalar::square();
      terms.push_back({std::move(L), std::move(D), std::move(phi)});
    }
    const std::size_t m = terms.size();
    bp.inputs = build_feasibility_relaxation(C0, terms, cfg.gamma, weights_for(cfg, m));
    auto w = bp.inputs.weights;
    bp.objective = [terms, w](const Point& x) { return feasibility_objective(terms, w, x); };
  } else if (variant == "alternating_projections") {
    bp.inputs = alternating_projections(parse_set(p.at("C"), "problem.C"), parse_set(p.at("D"), "problem.D"));
  } else if (variant == "common_fixed_point") {
    std::vector<AveragedOp> Ts;
    for (std::size_t i = 0; i < p.at("sets").size(); ++i)
      Ts.push_back(projector(parse_set(p.at("sets")[i], "problem.sets[" + std::to_string(i) + "]")));
    const std::size_t m = Ts.size();
    bp.inputs = build_common_fixed_point(std::move(Ts), weights_for(cfg, m));
  } else if (variant == "residual_system") {
    std::vector<AveragedOp> Rs;
    std::vector<Point> rs;
    for (std::size_t i = 0; i < p.at("sets").size(); ++i) {
      const std::string idx = "[" + std::to_string(i) + "]";
      Rs.push_back(projector(parse_set(p.at("sets")[i], "problem.sets" + idx)));
      rs.push_back(get_point(p.at("targets")[i], "problem.targets" + idx));
    }
    const std::size_t m = Rs.size();
    bp.inputs = build_residual_system(std::move(Rs), std::move(rs), weights_for(cfg, m));
  } else if (variant == "forward_backward") {
    std::vector<CocoerciveMap> As;
    std::optional<std::size_t> dim;
    for (std::size_t i = 0; i < p.at("As").size(); ++i) {
      const std::string path = "problem.As[" + std::to_string(i) + "]";
      reject_unknown(p.at("As")[i], path, {"matrix", "shift"});
      const AffineMonotone a = parse_affine_monotone(p.at("As")[i], path);
      if (dim && *dim != static_cast<std::size_t>(a.M.rows())) config_fail(path, "has the wrong dimension");
      dim = static_cast<std::size_t>(a.M.rows());
      CocoerciveMap c;
      c.map = [M = a.M, b = a.b](const Point& x) { return Point(M * x - b); };
      c.beta = 1.0 / a.lambda_max;
      if (a.lambda_min > 1e-12) c.strong_monotonicity = a.lambda_min;
      c.name = "A" + std::to_string(i + 1);
      As.push_back(std::move(c));
    }
    const json& a0 = require_object(p.at("A0"), "problem.A0");
    ResolventFamily J0;
    if (a0.contains("normal_cone")) {
      reject_unknown(a0, "problem.A0", {"normal_cone"});
      const ConvexSet C = parse_set(a0.at("normal_cone"), "problem.A0.normal_cone");
      if (C.dim() != *dim) config_fail("problem.A0", "has the wrong dimension");
      J0 = [C](double, const Point& x) { return C.project(x); };
    } else if (a0.contains("matrix")) {
      reject_unknown(a0, "problem.A0", {"matrix", "shift"});
      const AffineMonotone a = parse_affine_monotone(a0, "problem.A0");
      if (static_cast<std::size_t>(a.M.rows()) != *dim) config_fail("problem.A0", "has the wrong dimension");
      J0 = [M = a.M, b = a.b](double g, const Point& x) { return LinearResolvent(M, g, b)(x); };
    } else if (a0.empty()) {
      J0 = [](double, const Point& x) { return x; };
    } else {
      config_fail("problem.A0", "must be {}, {normal_cone: set} or {matrix, shift}");
    }
    const std::size_t m = As.size();
    bp.inputs = build_forward_backward(*dim, std::move(J0), std::move(As), cfg.gamma, weights_for(cfg, m));
  } else if (variant == "cohypomonotone") {
    std::vector<ResolventFamily> Js;
    std::vector<double> rhos;
    std::vector<std::vector<double>> gammas;
    std::optional<std::size_t> dim;
    for (std::size_t i = 0; i < p.at("operators").size(); ++i) {
      const std::string path = "problem.operators[" + std::to_string(i) + "]";
      const json& o = require_object(p.at("operators")[i], path);
      reject_unknown(o, path, {"matrix", "shift", "rho", "gammas"});
      const AffineMonotone a = parse_affine_monotone(o, path);
      if (dim && *dim != static_cast<std::size_t>(a.M.rows())) config_fail(path, "has the wrong dimension");
      dim = static_cast<std::size_t>(a.M.rows());
      Js.push_back([M = a.M, b = a.b](double g, const Point& x) { return LinearResolvent(M, g, b)(x); });
      rhos.push_back(o.contains("rho") ? get_number(o, "rho", path + ".rho") : 0.0);
      if (!o.contains("gammas")) config_fail(path + ".gammas", "is required");
      gammas.push_back(get_vector(o.at("gammas"), path + ".gammas"));
    }
    const std::size_t m = Js.size();
    bp.inputs = build_cohypomonotone(*dim, std::move(Js), std::move(rhos), std::move(gammas),
                                     weights_for(cfg, m), cfg.epsilon);
  }

  const std::size_t dim = bp.inputs.families.dim;
  if (cfg.x0) {
    if (cfg.x0->size() != dim) config_fail("x0", "has length " + std::to_string(cfg.x0->size()) +
                                                     " but the problem dimension is " + std::to_string(dim));
    bp.x0 = to_point(*cfg.x0);
  } else {
    bp.x0 = Point::Zero(static_cast<Eigen::Index>(dim));
  }
  return bp;
}

OracleResult oracle_least_squares(const Matrix& A, const Point& eta) {
  if (A.rows() == 0 || A.cols() == 0 || eta.size() != A.rows())
    throw DimensionError("oracle_least_squares: inconsistent data");
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  if (qr.rank() < A.cols()) throw DomainError("oracle_least_squares: normal matrix is rank deficient");
  Point x = qr.solve(eta);
  const Matrix G = A.transpose() * A;
  const Point rhs = A.transpose() * eta;
  // one step of refinement on the normal equations
  x += G.ldlt().solve(rhs - G * x);
  OracleResult r;
  r.solution = x;
  r.method = "least_squares_qr";
  r.accuracy = (G * x - rhs).norm();
  return r;
}

OracleResult oracle_prox_grad_reference(const SparseGlm& glm, std::size_t max_iters) {
  Matrix scaled = glm.A;
  double mu = 0.0;
  for (std::size_t i = 0; i < glm.m(); ++i) {
    scaled.row(static_cast<Eigen::Index>(i)) *= std::sqrt(glm.weights[i]);
    mu = std::max(mu, glm.phi(i).lipschitz_of_derivative);
  }
  const double norm = operator_norm(scaled);
  const double L = mu * norm * norm;
  const double step = 1.0 / L;
  Point x = Point::Zero(static_cast<Eigen::Index>(glm.dim()));
  for (std::size_t k = 0; k < max_iters; ++k) {
    const Point next = prox_l1(x - step * glm.smooth_gradient(x), step * glm.alpha);
    const double move = (next - x).norm();
    x = next;
    if (move <= 1e-13 * (1.0 + x.norm())) {
      const double opt = glm.optimality_residual(x);
      if (opt <= 1e-8) return {x, "full_gradient_prox_loop", opt};
    }
  }
  throw Error("oracle_prox_grad_reference: iteration cap reached before tolerance");
}

Point reference_run(const SolverInputs& inputs, const Point& x0, std::size_t max_iters, double tol) {
  SolverConfig c{.weights = inputs.weights, .schedule = make_full(inputs.families.m)};
  c.max_iters = max_iters;
  c.tol_residual = tol;
  c.store_iterates = false;
  return run(inputs.families, c, x0).solution;
}

std::size_t threads_from_env(std::size_t fallback) {
  const char* v = std::getenv("BLOCKSPLIT_THREADS");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const long long n = std::strtoll(v, &end, 10);
  if (end == v || *end != '\0' || n <= 0) return fallback;
  return static_cast<std::size_t>(n);
}

namespace {

json point_json(const Point& x) {
  json a = json::array();
  for (Eigen::Index k = 0; k < x.size(); ++k) a.push_back(x[k]);
  return a;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  body(out);
  if (!out) throw ConfigError("failed writing " + path.string());
}

} // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  ExperimentOutcome outcome;
  const auto started = std::chrono::steady_clock::now();
  try {
    BuiltProblem bp = build_problem(cfg);
    const std::size_t m = bp.inputs.families.m;
    const BlockSchedule schedule = build_schedule(cfg.schedule, m, cfg.seed);

    SolverConfig sc{.weights = bp.inputs.weights, .schedule = schedule};
    sc.epsilon = cfg.epsilon;
    sc.max_iters = cfg.max_iters;
    sc.tol_residual = cfg.tol;
    sc.check_every = cfg.check_every;
    sc.threads = threads_from_env(cfg.threads);
    sc.store_iterates = cfg.iterates_out.has_value() || cfg.fejer_audit || cfg.linear_rate_audit;
    std::shared_ptr<const SummableErrors> errors;
    if (cfg.errors) {
      errors = std::make_shared<SummableErrors>(cfg.errors->seed.value_or(cfg.seed), cfg.errors->scale,
                                                cfg.errors->power, cfg.errors->outer, cfg.errors->inner);
      sc.error_model = errors;
    }
    // fail on covering before spending time on a reference
    require_covering(schedule, std::max<std::size_t>(cfg.max_iters, 1));

    std::optional<Point> reference;
    std::string reference_method;
    if (cfg.reference == "auto") {
      if (bp.glm) {
        const OracleResult o = oracle_prox_grad_reference(*bp.glm);
        reference = o.solution;
        reference_method = o.method;
      } else if (bp.least_squares) {
        const OracleResult o = oracle_least_squares(bp.least_squares->A, bp.least_squares->eta);
        reference = o.solution;
        reference_method = o.method;
      } else {
        reference = reference_run(bp.inputs, bp.x0);
        reference_method = "full_activation_run";
      }
      sc.reference = reference;
    }

    RunResult result = cfg.economical ? run_economical(bp.inputs.families, sc, bp.x0)
                                      : run(bp.inputs.families, sc, bp.x0);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    json summary;
    summary["variant"] = bp.inputs.variant;
    summary["converged"] = result.converged;
    summary["iterations"] = result.iterations;
    summary["final_residual"] = result.final_residual;
    summary["tol"] = cfg.tol;
    summary["wall_time_s"] = wall;
    summary["schedule"] = {{"kind", schedule.kind()}, {"K", schedule.covering_constant()}};
    summary["weights"] = bp.inputs.weights;
    if (bp.inputs.gamma) summary["gamma"] = *bp.inputs.gamma;
    summary["economical"] = cfg.economical;
    summary["solution"] = point_json(result.solution);
    if (bp.objective) summary["objective"] = bp.objective(result.solution);
    if (bp.glm) summary["optimality_residual"] = bp.glm->optimality_residual(result.solution);
    summary["error_totals"] = {{"outer", result.outer_error_total}, {"inner_lagged", result.inner_error_total}};
    if (errors) summary["error_totals"]["per_sequence_bound"] = errors->per_sequence_bound();
    if (reference) {
      summary["reference"] = point_json(*reference);
      summary["reference_method"] = reference_method;
      summary["distance_to_reference"] = (result.solution - *reference).norm();
    }
    if (declared_contraction(bp.inputs.families, bp.inputs.weights)) {
      std::vector<double> rhos;
      for (const auto& op : bp.inputs.families.inner_limit) rhos.push_back(*op.lipschitz());
      summary["declared_lipschitz"] = {{"rho0", *bp.inputs.families.outer_limit->lipschitz()},
                                       {"rhos", rhos}};
    }
    json audits = json::object();
    if (cfg.fejer_audit && reference) {
      const FejerReport f = fejer_audit(result.trace, result.iterates, *reference, bp.inputs.weights,
                                        schedule.covering_constant());
      audits["fejer"] = {{"passed", f.passed}, {"checked", f.checked}, {"max_violation", f.max_violation},
                         {"tolerance", f.tolerance}};
      if (f.first_violation) audits["fejer"]["first_violation"] = *f.first_violation;
    }
    if (cfg.linear_rate_audit && reference) {
      const auto rho = declared_contraction(bp.inputs.families, bp.inputs.weights);
      if (!rho || !(*rho < 1.0)) {
        audits["linear_rate"] = {{"passed", nullptr}, {"refused", "no contraction factor declared"}};
      } else {
        std::vector<double> rhos;
        for (const auto& op : bp.inputs.families.inner_limit) rhos.push_back(*op.lipschitz());
        const LinearRateReport lr =
            linear_rate_audit(result.iterates, *reference, *bp.inputs.families.outer_limit->lipschitz(), rhos,
                              bp.inputs.weights, schedule.covering_constant());
        audits["linear_rate"] = {{"passed", lr.passed}, {"rho", lr.rho}, {"xi_hat", lr.xi_hat},
                                 {"max_excess", lr.max_excess}};
      }
    }
    summary["audits"] = audits;
    outcome.exit_code = result.converged ? kConverged : kNotConverged;
    summary["exit_code"] = outcome.exit_code;

    if (cfg.trace_out) write_file(*cfg.trace_out, [&](std::ostream& o) { write_trace_csv(o, result.trace); });
    if (cfg.iterates_out)
      write_file(*cfg.iterates_out, [&](std::ostream& o) { write_iterates_csv(o, result.iterates); });
    if (cfg.summary_out) write_file(*cfg.summary_out, [&](std::ostream& o) { o << summary.dump(2) << '\n'; });

    outcome.message = result.converged ? "converged" : "iteration cap reached";
    outcome.summary = std::move(summary);
    outcome.result = std::move(result);
  } catch (const CoveringError& e) {
    outcome.exit_code = kCoveringFailure;
    outcome.message = describe_exception(e);
  } catch (const NonFiniteError& e) {
    outcome.exit_code = kDivergence;
    outcome.message = describe_exception(e);
  } catch (const Error& e) {
    outcome.exit_code = kConfigFailure;
    outcome.message = describe_exception(e);
  } catch (const json::exception& e) {
    outcome.exit_code = kConfigFailure;
    outcome.message = describe_exception(e);
  }
  return outcome;
}

} // namespace blocksplit
