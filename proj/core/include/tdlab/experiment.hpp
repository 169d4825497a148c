#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdlab/config.hpp"
#include "tdlab/environments.hpp"
#include "tdlab/oracle.hpp"

namespace tdlab {

/// Process exit codes shared by the CLI and presets.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitDiverged = 2, kExitCheckFailed = 3 };

/// Tabular policy from a description: optimal | uniform | constant:<action> |
/// actions:<a,a,...> (one action name per state). Throws ConfigError.
Policy resolve_policy(const TabularSystem& sys, std::string_view spec);

/// Analytic limits for the policy a run observed (tabular, lambda = 1 for
/// the limits to apply).
struct OracleComparison {
  std::string policy;
  Eigen::VectorXd td_limit;
  std::optional<Eigen::VectorXd> std_limit;  // empty when rank deficient
  std::optional<Eigen::VectorXd> dt_limit;
  std::optional<Eigen::VectorXd> target;     // limit matching the learner variant
  double delta = 0.0;                        // ||w_final - target||
  ErrorReport errors;
  std::optional<BoundCheck> bound;           // sibling learners only
};

struct RunRecord {
  ExperimentConfig config;
  std::string status;  // completed | diverged
  int exit_code = kExitOk;
  Eigen::VectorXd final_w;
  std::string final_region;
  std::int64_t steps_done = 0;
  std::vector<LogPoint> log;
  std::optional<OracleComparison> oracle;
  std::filesystem::path csv_path;
  std::filesystem::path manifest_path;
};

/// Runs one configured experiment and writes `<output_dir>/<csv_name>` and
/// `<output_dir>/manifest.json` (written last). Any stale CSV or manifest in
/// the directory is replaced. Throws ConfigError for unresolvable configs.
///
/// CSV columns: step, w0..w{d-1}, J~ per tracked state (Jt_<name>), region,
/// then E, E1, E2 when diagnostics are on.
RunRecord run_experiment(const ExperimentConfig& config);

/// Same run without touching the file system.
RunRecord simulate_experiment(const ExperimentConfig& config);

struct CompareRow {
  std::string label;
  std::uint64_t seed = 0;
  RunRecord record;
  std::string error;  // non-empty when the run failed
};

/// Runs every config on every seed. Each run writes into
/// `<out_dir>/<label>-seed<k>/`; a table and a manifest go to `out_dir`.
std::vector<CompareRow> run_compare(const std::vector<std::pair<std::string, ExperimentConfig>>& configs,
                                    const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir);

/// Fixed-width text table of compare rows.
std::string format_compare_table(const std::vector<CompareRow>& rows);

struct OracleRequest {
  std::string environment = "two-state";
  EnvironmentOverrides overrides;
  std::string policy = "optimal";
  double lambda = 1.0;
  std::optional<std::vector<double>> w;
  std::int64_t rollouts = 200;
  double epsilon = 1e-4;
  std::uint64_t seed = 1;
};

/// JSON document with exact values, stationary and pair distributions, eta,
/// TD/STD/DT limits, error functionals at w and the bound check. For the
/// acrobot only rollout-based fields are filled.
std::string oracle_report_json(const OracleRequest& request);

std::string tool_version();

}  // namespace tdlab
