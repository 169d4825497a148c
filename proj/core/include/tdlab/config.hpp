#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tdlab/approx.hpp"
#include "tdlab/learners.hpp"

namespace tdlab {

/// Invalid or unresolvable configuration. `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field(std::move(field)) {}
  std::string field;
};

/// One learner run. Stored as flat `key = value` text; see emit_config.
struct ExperimentConfig {
  std::string environment = "two-state";
  std::optional<double> alpha;  // overrides the environment's default discount
  std::optional<double> damping;
  std::optional<double> substep;
  std::optional<double> reward_scale;

  LearnerVariant variant = LearnerVariant::std;
  double lambda = 1.0;
  StepSchedule schedule = StepSchedule::harmonic(1.0, 1.0);

  // optimal | uniform | constant:<action> | actions:<a,a,...> |
  // greedy-frozen | greedy-online | handcoded | converse
  std::string behavior = "optimal";
  GreedyMode greedy_mode = GreedyMode::successor_preference;
  std::vector<double> initial_weights;  // empty: zeros
  std::vector<double> frozen_weights;   // empty: initial_weights
  std::string start;                    // state name; empty: environment default
  std::string shadow_start;             // DT only; empty: same as start

  std::int64_t steps = 10000;
  std::uint64_t seed = 1;
  std::int64_t log_every = 0;  // 0: initial and final rows only
  double divergence_bound = 1e6;
  std::int64_t desync_interval = 0;
  bool diagnostics = false;
  std::vector<std::string> track;  // J~ columns; empty: every tabular state

  std::string output_dir = "runs/default";
  std::string csv_name = "trajectory.csv";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Keys in emission order.
const std::vector<std::string>& config_keys();

/// Flat text, one `key = value` per line. Unset optionals and empty lists
/// are omitted; doubles use the shortest round-tripping form.
std::string emit_config(const ExperimentConfig& cfg);

/// Parses emit_config output or hand-written files. `#` starts a comment.
/// Unknown keys, duplicates and malformed values throw ConfigError.
ExperimentConfig parse_config(std::string_view text);

ExperimentConfig load_config(const std::string& path);

// Shared text helpers (also used by the CLI).
std::string format_double(double v);
double parse_double_field(std::string_view text, std::string_view field);
std::vector<double> parse_double_list(std::string_view text, std::string_view field);
std::vector<std::string> split_list(std::string_view text);

}  // namespace tdlab
