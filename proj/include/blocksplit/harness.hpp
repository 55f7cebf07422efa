#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "blocksplit/problems.hpp"
#include "blocksplit/schedules.hpp"
#include "blocksplit/solver.hpp"

namespace blocksplit {

/// Process exit codes of run_experiment / the CLI.
enum ExitCode : int {
  kConverged = 0,
  kNotConverged = 1,
  kConfigFailure = 2,
  kCoveringFailure = 3,
  kDivergence = 4,
};

struct ScheduleSpec {
  /// "full", "cyclic", "quasicyclic" or "explicit"
  std::string kind = "full";
  std::size_t block_size = 1;
  /// Declared covering constant; derived from the kind when absent.
  std::optional<std::size_t> K;
  std::optional<std::uint64_t> seed;
  /// 0-based blocks of an explicit schedule.
  std::vector<Block> blocks;
};

struct ErrorSpec {
  double scale = 0.0;
  double power = 2.0;
  std::optional<std::uint64_t> seed;
  bool outer = true;
  bool inner = true;
};

struct ExperimentConfig {
  /// Problem payload, validated by parse_config.
  nlohmann::json problem;
  ScheduleSpec schedule;
  double epsilon = 1e-3;
  double tol = 1e-10;
  std::size_t max_iters = 10000;
  std::size_t check_every = 10;
  std::uint64_t seed = 1;
  bool economical = false;
  std::size_t threads = 1;
  std::optional<std::vector<double>> weights;
  std::optional<double> gamma;
  std::optional<std::vector<double>> x0;
  std::optional<ErrorSpec> errors;
  /// "none", "auto" (oracle when available, otherwise a long full-activation run)
  std::string reference = "none";
  bool fejer_audit = false;
  bool linear_rate_audit = false;
  std::optional<std::filesystem::path> trace_out;
  std::optional<std::filesystem::path> iterates_out;
  std::optional<std::filesystem::path> summary_out;
  /// Directory that relative data paths are resolved against.
  std::filesystem::path base_dir = ".";
};

/// Validates every field and range; throws ConfigError with the offending key.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");

/// Reads and parses a JSON config file; relative paths resolve against its
/// directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Reads rows "a_1,...,a_N,eta" (optional non-numeric header line).
struct DataSet {
  Matrix A;
  Point eta;
};
DataSet read_data_csv(const std::filesystem::path& path);

/// A constructed problem plus whatever the harness needs to evaluate it.
struct BuiltProblem {
  SolverInputs inputs;
  Point x0;
  std::optional<SparseGlm> glm;
  std::optional<DataSet> least_squares;
  std::function<double(const Point&)> objective;
};

BuiltProblem build_problem(const ExperimentConfig& cfg);
BlockSchedule build_schedule(const ScheduleSpec& spec, std::size_t m, std::uint64_t default_seed);

struct OracleResult {
  Point solution;
  std::string method;
  /// Method-specific residual of the returned point.
  double accuracy = 0.0;
};

/// Least-squares solution of A x ~ eta by a rank-revealing QR; accuracy is
/// |A^T A x - A^T eta|. Throws DomainError when A has deficient column rank.
OracleResult oracle_least_squares(const Matrix& A, const Point& eta);

/// Reference minimizer of a SparseGlm from a plain full-gradient proximal
/// loop (step 1/L with L = mu |diag(sqrt w) A|^2), run until successive
/// iterates differ by at most 1e-13 (1 + |x|) and the optimality residual is
/// <= 1e-8. Throws Error if `max_iters` is reached first.
OracleResult oracle_prox_grad_reference(const SparseGlm& glm, std::size_t max_iters = 5'000'000);

/// Long full-activation error-free solver run to residual 1e-13.
Point reference_run(const SolverInputs& inputs, const Point& x0, std::size_t max_iters = 1'000'000,
                    double tol = 1e-13);

/// BLOCKSPLIT_THREADS when set to a positive integer, else `fallback`.
std::size_t threads_from_env(std::size_t fallback);

struct ExperimentOutcome {
  int exit_code = kConfigFailure;
  std::string message;
  std::optional<RunResult> result;
  nlohmann::json summary;
};

/// Builds the problem and schedule, runs the solver, audits and writes the
/// configured artifacts. Errors are mapped to exit codes instead of thrown.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

} // namespace blocksplit
