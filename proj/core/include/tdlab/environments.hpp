#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tdlab/acrobot.hpp"
#include "tdlab/approx.hpp"
#include "tdlab/bmdp.hpp"

namespace tdlab {

/// A tabular BMDP bundled with its feature map and canonical parameters.
struct TabularSystem {
  TabularBmdp bmdp;
  TableFeatures features;
  double alpha;
  Policy optimal_policy;
  StateId start;

  TabularBranches branches() const { return TabularBranches(bmdp); }

  /// "optimal" when the greedy policy of w equals the optimal policy, else
  /// "suboptimal".
  std::string region_label(const Eigen::VectorXd& w, GreedyMode mode = GreedyMode::successor_preference) const;
};

/// Two states A, B; a1 moves to A w.p. 0.8, a2 to B w.p. 0.8 from either
/// state; r(B, B) = 1; phi(A) = 2, phi(B) = 1.
TabularSystem two_state_system(double alpha = 0.5);

/// Three states with two features (Table-3 fractions over 18); r(C, C) = 1.
TabularSystem three_state_system(double alpha = 0.95);

/// Chain where DT(lambda) picks the wrong sign and STD(lambda) the right one:
/// A -> B and C -> B surely, B chooses between C and A; r(C, B) = 1;
/// phi = (1, 3, 2).
TabularSystem dt_counterexample_system(double alpha = 0.5);

/// Two-state system with reward scaled by `reward_scale` (0 gives the
/// zero-reward variant used in tests and the oracle CLI).
TabularSystem two_state_system_scaled(double alpha, double reward_scale);

struct AcrobotSystem {
  AcrobotParams params;
  double alpha = 0.95;
  AcrobotState start{};

  AcrobotEnvironment environment() const { return AcrobotEnvironment(params); }

  /// "hand-coded" for w < 0 (feature order reversed), "converse" for w > 0.
  std::string region_label(const Eigen::VectorXd& w) const;
};

using System = std::variant<TabularSystem, AcrobotSystem>;

struct EnvironmentOverrides {
  std::optional<double> alpha;
  std::optional<double> damping;
  std::optional<double> substep;
  /// Multiplies every tabular reward. Used for zero-reward variants.
  std::optional<double> reward_scale;
};

struct EnvironmentInfo {
  std::string name;
  std::string kind;  // "tabular" or "continuous"
  double default_alpha;
  std::string description;
};

std::vector<EnvironmentInfo> environment_catalog();

/// Builds an environment by registry name: two-state, three-state,
/// dt-counterexample, acrobot. Throws std::invalid_argument for unknown
/// names or overrides that do not apply.
System make_environment(std::string_view name, const EnvironmentOverrides& overrides = {});

}  // namespace tdlab
