// blocksplit command line: solve, schedule-check, audit.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "blocksplit/errors.hpp"
#include "blocksplit/harness.hpp"
#include "blocksplit/schedules.hpp"
#include "blocksplit/solver.hpp"
#include "blocksplit/trace_io.hpp"

using namespace blocksplit;
using nlohmann::json;

namespace {

struct SolveArgs {
  std::string config;
  std::string trace_out;
  std::string iterates_out;
  std::string summary_out;
  std::optional<std::size_t> max_iters;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  bool economical = false;
  std::optional<std::size_t> threads;
};

int do_solve(const SolveArgs& a) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(a.config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  }
  if (!a.trace_out.empty()) cfg.trace_out = a.trace_out;
  if (!a.iterates_out.empty()) cfg.iterates_out = a.iterates_out;
  if (!a.summary_out.empty()) cfg.summary_out = a.summary_out;
  if (a.max_iters) cfg.max_iters = *a.max_iters;
  if (a.tol) {
    if (!(*a.tol >= 0.0)) {
      std::cerr << "error: --tol must be >= 0\n";
      return kConfigFailure;
    }
    cfg.tol = *a.tol;
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.economical) cfg.economical = true;
  if (a.threads) cfg.threads = *a.threads;

  const ExperimentOutcome out = run_experiment(cfg);
  if (!out.result) {
    std::cerr << "error: " << out.message << '\n';
    return out.exit_code;
  }
  const auto& s = out.summary;
  std::cout << s.at("variant").get<std::string>() << ": " << out.message << " after "
            << s.at("iterations").get<std::size_t>() << " iterations, residual "
            << format_double(s.at("final_residual").get<double>());
  if (s.contains("objective")) std::cout << ", objective " << format_double(s.at("objective").get<double>());
  if (s.contains("distance_to_reference"))
    std::cout << ", distance to reference " << format_double(s.at("distance_to_reference").get<double>());
  std::cout << '\n';
  for (const auto& [name, report] : s.at("audits").items()) {
    std::cout << "audit " << name << ": ";
    if (report.at("passed").is_null())
      std::cout << "refused (" << report.value("refused", "") << ")\n";
    else
      std::cout << (report.at("passed").get<bool>() ? "pass" : "FAIL") << '\n';
  }
  return out.exit_code;
}

struct ScheduleArgs {
  std::string kind = "cyclic";
  std::size_t m = 0;
  std::size_t block_size = 1;
  std::optional<std::size_t> K;
  std::uint64_t seed = 1;
  std::string blocks;
  std::size_t horizon = 200;
  std::vector<double> weights;
};

std::vector<Block> parse_blocks(const std::string& text) {
  // "1,2;3" -> {{0,1},{2}}
  std::vector<Block> out;
  std::istringstream groups(text);
  std::string group;
  while (std::getline(groups, group, ';')) {
    Block b;
    std::istringstream items(group);
    std::string item;
    while (std::getline(items, item, ',')) {
      const long v = std::stol(item);
      if (v < 1) throw ConfigError("--blocks uses 1-based indices");
      b.push_back(static_cast<std::size_t>(v - 1));
    }
    out.push_back(std::move(b));
  }
  return out;
}

int do_schedule_check(const ScheduleArgs& a) {
  try {
    ScheduleSpec spec;
    spec.kind = a.kind;
    spec.block_size = a.block_size;
    spec.K = a.K;
    spec.seed = a.seed;
    if (a.kind == "explicit") spec.blocks = parse_blocks(a.blocks);
    if ((a.kind == "explicit" || a.kind == "quasicyclic") && !a.K)
      throw ConfigError("--K is required for " + a.kind + " schedules");
    const BlockSchedule s = build_schedule(spec, a.m, a.seed);
    const std::size_t K = s.covering_constant();
    std::vector<double> w = a.weights.empty() ? uniform_weights(a.m) : a.weights;
    if (w.size() != a.m) throw ConfigError("--weights needs one entry per operator");
    validate_weights(w);
    if (a.horizon < K) throw ConfigError("--horizon must be >= K");

    json report;
    report["kind"] = s.kind();
    report["m"] = a.m;
    report["K"] = K;
    report["horizon"] = a.horizon;
    const CoveringReport cov = validate_covering(s, a.horizon);
    report["covering"] = {{"ok", cov.ok}};
    if (!cov.ok) {
      report["covering"]["window_start"] = *cov.window_start;
      report["covering"]["missing_index"] = *cov.missing_index + 1;
      std::cout << report.dump(2) << '\n';
      return kCoveringFailure;
    }
    std::vector<ConcentratingRow> rows;
    for (std::size_t n = 0; n + 1 < a.horizon; ++n) rows.push_back(mu_row(s, w, n));
    const ConcentratingReport c = check_concentrating(rows, K);
    report["concentrating"] = {{"passed", c.passed},
                               {"row_stochastic", c.row_stochastic},
                               {"banded", c.banded},
                               {"diagonal_infimum", c.diagonal_infimum},
                               {"max_sum_error", c.max_sum_error}};
    std::mt19937_64 rng(a.seed);
    std::normal_distribution<double> normal;
    std::vector<double> xs(a.horizon);
    for (auto& v : xs) v = normal(rng);
    double worst = 0.0;
    for (std::size_t n = K - 1; n + 1 < a.horizon; ++n) {
      const auto sides = lag_identity_sides(s, w, n, std::span<const double>(xs.data(), n + 1));
      worst = std::max(worst, std::abs(sides.weighted_rows - sides.lagged_gather));
    }
    const bool lag_ok = worst <= 1e-12;
    report["lag_identity"] = {{"passed", lag_ok}, {"max_discrepancy", worst}};
    std::cout << report.dump(2) << '\n';
    return c.passed && lag_ok ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  }
}

struct AuditArgs {
  std::string trace;
  std::string iterates;
  std::string summary;
};

int do_audit(const AuditArgs& a) {
  try {
    std::ifstream ts(a.trace), is(a.iterates), ss(a.summary);
    if (!ts) throw ConfigError("cannot open " + a.trace);
    if (!is) throw ConfigError("cannot open " + a.iterates);
    if (!ss) throw ConfigError("cannot open " + a.summary);
    const auto trace = read_trace_csv(ts);
    const auto iterates = read_iterates_csv(is);
    const json summary = json::parse(ss);
    if (!summary.contains("reference")) throw ConfigError("summary has no reference solution");
    const auto ref_v = summary.at("reference").get<std::vector<double>>();
    const Point ref = Eigen::Map<const Point>(ref_v.data(), static_cast<Eigen::Index>(ref_v.size()));
    const auto weights = summary.at("weights").get<std::vector<double>>();
    const std::size_t K = summary.at("schedule").at("K").get<std::size_t>();

    json report;
    bool ok = true;
    const FejerReport f = fejer_audit(trace, iterates, ref, weights, K);
    report["fejer"] = {{"passed", f.passed}, {"checked", f.checked}, {"max_violation", f.max_violation},
                       {"tolerance", f.tolerance}};
    if (f.first_violation) report["fejer"]["first_violation"] = *f.first_violation;
    ok = ok && f.passed;
    if (summary.contains("declared_lipschitz")) {
      const double rho0 = summary.at("declared_lipschitz").at("rho0").get<double>();
      const auto rhos = summary.at("declared_lipschitz").at("rhos").get<std::vector<double>>();
      try {
        const LinearRateReport lr = linear_rate_audit(iterates, ref, rho0, rhos, weights, K);
        report["linear_rate"] = {{"passed", lr.passed}, {"rho", lr.rho}, {"xi_hat", lr.xi_hat},
                                 {"max_excess", lr.max_excess}};
        ok = ok && lr.passed;
      } catch (const DomainError& e) {
        report["linear_rate"] = {{"passed", nullptr}, {"refused", e.what()}};
      }
    }
    std::cout << report.dump(2) << '\n';
    return ok ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-update solver for composite fixed-point problems"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Run an experiment described by a JSON config");
  s->add_option("--config", solve.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--trace-out", solve.trace_out, "Trace CSV output path");
  s->add_option("--iterates-out", solve.iterates_out, "Iterates CSV output path");
  s->add_option("--summary-out", solve.summary_out, "Summary JSON output path");
  s->add_option("--max-iters", solve.max_iters, "Override solver.max_iters");
  s->add_option("--tol", solve.tol, "Override solver.tol");
  s->add_option("--seed", solve.seed, "Override solver.seed");
  s->add_flag("--economical", solve.economical, "Use the running-sum update");
  s->add_option("--threads", solve.threads, "Worker threads per block (BLOCKSPLIT_THREADS wins)")
      ->check(CLI::PositiveNumber);

  ScheduleArgs sched;
  auto* c = app.add_subcommand("schedule-check", "Validate covering and the concentrating array of a schedule");
  c->add_option("--kind", sched.kind, "full, cyclic, quasicyclic or explicit")
      ->check(CLI::IsMember({"full", "cyclic", "quasicyclic", "explicit"}));
  c->add_option("--m", sched.m, "Number of operators")->required()->check(CLI::PositiveNumber);
  c->add_option("--block-size", sched.block_size, "Cyclic block width")->check(CLI::PositiveNumber);
  c->add_option("--K", sched.K, "Declared covering constant")->check(CLI::PositiveNumber);
  c->add_option("--seed", sched.seed, "Seed for quasicyclic schedules and test sequences");
  c->add_option("--blocks", sched.blocks, "Explicit blocks, 1-based, e.g. \"1,2;3\"");
  c->add_option("--horizon", sched.horizon, "Number of iterations to check");
  c->add_option("--weights", sched.weights, "Weights (default uniform)");

  AuditArgs audit;
  auto* a = app.add_subcommand("audit", "Replay a persisted trace through the Fejer and linear-rate audits");
  a->add_option("--trace", audit.trace, "Trace CSV")->required()->check(CLI::ExistingFile);
  a->add_option("--iterates", audit.iterates, "Iterates CSV")->required()->check(CLI::ExistingFile);
  a->add_option("--summary", audit.summary, "Summary JSON with the reference solution")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigFailure;
  }
  if (*s) return do_solve(solve);
  if (*c) return do_schedule_check(sched);
  return do_audit(audit);
}
