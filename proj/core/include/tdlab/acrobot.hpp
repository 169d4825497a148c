#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <utility>

#include "tdlab/bmdp.hpp"

namespace tdlab {

/// theta1 is measured from the downward vertical, theta2 relative to link 1.
/// Hanging at rest is the all-zero state.
struct AcrobotState {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double dtheta1 = 0.0;
  double dtheta2 = 0.0;

  friend bool operator==(const AcrobotState&, const AcrobotState&) = default;
};

struct AcrobotParams {
  double m1 = 1.0;
  double m2 = 1.0;
  double l1 = 1.0;
  double l2 = 1.0;
  double lc1 = 0.5;
  double lc2 = 0.5;
  double i1 = 1.0;
  double i2 = 1.0;
  double gravity = 9.8;
  double damping = 0.05;
  double action_interval = 0.1;
  double substep = 0.01;
  double max_velocity = 4.0 * std::numbers::pi;

  /// Throws std::invalid_argument on non-positive constants or a substep that
  /// does not divide the action interval.
  void validate() const;
  int substeps_per_action() const;
};

struct Accelerations {
  double ddtheta1 = 0.0;
  double ddtheta2 = 0.0;
};

/// Two-link dynamics with torque at the elbow, plus the velocity-squared
/// damping -sign(w) k w^2 on each joint (sign(0) = 0).
Accelerations acrobot_derivs(const AcrobotState& s, double torque, const AcrobotParams& params);

/// Integrates one action interval with fixed-step RK4. Velocities are clamped
/// after every substep, angles wrapped to [-pi, pi) at the end. Throws
/// std::runtime_error if the state becomes non-finite.
AcrobotState acrobot_step(const AcrobotState& s, double torque, const AcrobotParams& params);

/// Tip height above its lowest position: l1 + l2 - l1 cos t1 - l2 cos(t1 + t2).
double acrobot_reward(const AcrobotState& s, const AcrobotParams& params = {});

/// Hand-coded evaluation |dtheta1 + dtheta2|.
double acrobot_handcoded_eval(const AcrobotState& s);

/// Single feature 1 - |dtheta1 + dtheta2| / (8 pi), in [0, 1].
double acrobot_feature(const AcrobotState& s);

/// Mechanical energy with zero potential at the hanging position.
double acrobot_energy(const AcrobotState& s, const AcrobotParams& params);

/// Successors under torque +1 and torque -1, in that order.
std::pair<AcrobotState, AcrobotState> acrobot_siblings(const AcrobotState& s, const AcrobotParams& params);

/// Continual acrobot task as a sibling environment: action 0 applies +1,
/// action 1 applies -1, the reward is the tip height after the action.
class AcrobotEnvironment {
 public:
  using State = AcrobotState;

  explicit AcrobotEnvironment(AcrobotParams params = {});

  Branch<AcrobotState> branch(const AcrobotState& s) const;
  double reward_bound() const { return 2.0 * (params_.l1 + params_.l2); }
  const AcrobotParams& params() const { return params_; }

 private:
  static constexpr std::array<double, 2> kProbFirst{1.0, 0.0};
  AcrobotParams params_;
};

/// Feature map wrapper for the learners (dimension 1).
struct AcrobotFeatures {
  std::size_t dim() const { return 1; }
  std::array<double, 1> operator()(const AcrobotState& s) const { return {acrobot_feature(s)}; }
};

/// Acts to reach the successor with the larger |dtheta1 + dtheta2|.
Behavior<AcrobotState> acrobot_handcoded_behavior();
/// The converse: prefers the successor with the smaller value.
Behavior<AcrobotState> acrobot_converse_behavior();

}  // namespace tdlab
