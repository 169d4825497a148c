#include "tdlab/acrobot.hpp"

#include "tdlab/approx.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tdlab {

namespace {

constexpr double kPi = std::numbers::pi;

double sign(double v) { return (v > 0.0) - (v < 0.0); }

double wrap_angle(double x) { return x - 2.0 * kPi * std::floor((x + kPi) / (2.0 * kPi)); }

struct Deriv {
  double dtheta1, dtheta2, ddtheta1, ddtheta2;
};

Deriv deriv(const AcrobotState& s, double torque, const AcrobotParams& p) {
  const Accelerations acc = acrobot_derivs(s, torque, p);
  return {s.dtheta1, s.dtheta2, acc.ddtheta1, acc.ddtheta2};
}

AcrobotState advance(const AcrobotState& s, const Deriv& d, double h) {
  return {s.theta1 + h * d.dtheta1, s.theta2 + h * d.dtheta2, s.dtheta1 + h * d.ddtheta1, s.dtheta2 + h * d.ddtheta2};
}

}  // namespace

void AcrobotParams::validate() const {
  for (double v : {m1, m2, l1, l2, lc1, lc2, i1, i2, gravity, action_interval, substep, max_velocity}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("acrobot: physical constants must be positive");
  }
  if (!(damping >= 0.0) || !std::isfinite(damping)) throw std::invalid_argument("acrobot: damping must be >= 0");
  (void)substeps_per_action();
}

int AcrobotParams::substeps_per_action() const {
  const double ratio = action_interval / substep;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw std::invalid_argument("acrobot: substep must divide the action interval");
  }
  return static_cast<int>(rounded);
}

Accelerations acrobot_derivs(const AcrobotState& s, double torque, const AcrobotParams& p) {
  const double s2 = std::sin(s.theta2);
  const double c2 = std::cos(s.theta2);
  const double d1 = p.m1 * p.lc1 * p.lc1 + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * c2) + p.i1 + p.i2;
  const double d2 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * c2) + p.i2;
  const double phi2 = p.m2 * p.lc2 * p.gravity * std::sin(s.theta1 + s.theta2);
  const double phi1 = -p.m2 * p.l1 * p.lc2 * s.dtheta2 * s.dtheta2 * s2 -
                      2.0 * p.m2 * p.l1 * p.lc2 * s.dtheta2 * s.dtheta1 * s2 +
                      (p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity * std::sin(s.theta1) + phi2;
  const double dd2 = (torque + d2 / d1 * phi1 - p.m2 * p.l1 * p.lc2 * s.dtheta1 * s.dtheta1 * s2 - phi2) /
                     (p.m2 * p.lc2 * p.lc2 + p.i2 - d2 * d2 / d1);
  const double dd1 = -(d2 * dd2 + phi1) / d1;
  return {dd1 - sign(s.dtheta1) * p.damping * s.dtheta1 * s.dtheta1,
          dd2 - sign(s.dtheta2) * p.damping * s.dtheta2 * s.dtheta2};
}

AcrobotState acrobot_step(const AcrobotState& s0, double torque, const AcrobotParams& p) {
  const int n = p.substeps_per_action();
  const double h = p.substep;
  AcrobotState s = s0;
  for (int k = 0; k < n; ++k) {
    const Deriv k1 = deriv(s, torque, p);
    const Deriv k2 = deriv(advance(s, k1, 0.5 * h), torque, p);
    const Deriv k3 = deriv(advance(s, k2, 0.5 * h), torque, p);
    const Deriv k4 = deriv(advance(s, k3, h), torque, p);
    s.theta1 += h / 6.0 * (k1.dtheta1 + 2.0 * k2.dtheta1 + 2.0 * k3.dtheta1 + k4.dtheta1);
    s.theta2 += h / 6.0 * (k1.dtheta2 + 2.0 * k2.dtheta2 + 2.0 * k3.dtheta2 + k4.dtheta2);
    s.dtheta1 += h / 6.0 * (k1.ddtheta1 + 2.0 * k2.ddtheta1 + 2.0 * k3.ddtheta1 + k4.ddtheta1);
    s.dtheta2 += h / 6.0 * (k1.ddtheta2 + 2.0 * k2.ddtheta2 + 2.0 * k3.ddtheta2 + k4.ddtheta2);
    s.dtheta1 = std::clamp(s.dtheta1, -p.max_velocity, p.max_velocity);
    s.dtheta2 = std::clamp(s.dtheta2, -p.max_velocity, p.max_velocity);
  }
  if (!std::isfinite(s.theta1) || !std::isfinite(s.theta2) || !std::isfinite(s.dtheta1) ||
      !std::isfinite(s.dtheta2)) {
    throw std::runtime_error("acrobot_step: integration produced a non-finite state");
  }
  s.theta1 = wrap_angle(s.theta1);
  s.theta2 = wrap_angle(s.theta2);
  return s;
}

double acrobot_reward(const AcrobotState& s, const AcrobotParams& p) {
  return p.l1 + p.l2 - p.l1 * std::cos(s.theta1) - p.l2 * std::cos(s.theta1 + s.theta2);
}

double acrobot_handcoded_eval(const AcrobotState& s) { return std::abs(s.dtheta1 + s.dtheta2); }

double acrobot_feature(const AcrobotState& s) { return 1.0 - acrobot_handcoded_eval(s) / (8.0 * kPi); }

double acrobot_energy(const AcrobotState& s, const AcrobotParams& p) {
  const double c2 = std::cos(s.theta2);
  const double d1 = p.m1 * p.lc1 * p.lc1 + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * c2) + p.i1 + p.i2;
  const double d2 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * c2) + p.i2;
  const double d3 = p.m2 * p.lc2 * p.lc2 + p.i2;
  const double kinetic =
      0.5 * (d1 * s.dtheta1 * s.dtheta1 + 2.0 * d2 * s.dtheta1 * s.dtheta2 + d3 * s.dtheta2 * s.dtheta2);
  const double potential = (p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity * (1.0 - std::cos(s.theta1)) +
                           p.m2 * p.lc2 * p.gravity * (1.0 - std::cos(s.theta1 + s.theta2));
  return kinetic + potential;
}

std::pair<AcrobotState, AcrobotState> acrobot_siblings(const AcrobotState& s, const AcrobotParams& p) {
  return {acrobot_step(s, 1.0, p), acrobot_step(s, -1.0, p)};
}

AcrobotEnvironment::AcrobotEnvironment(AcrobotParams params) : params_(params) { params_.validate(); }

Branch<AcrobotState> AcrobotEnvironment::branch(const AcrobotState& s) const {
  auto [plus, minus] = acrobot_siblings(s, params_);
  return {plus, minus, acrobot_reward(plus, params_), acrobot_reward(minus, params_), kProbFirst};
}

Behavior<AcrobotState> acrobot_handcoded_behavior() {
  return preference_behavior<AcrobotState>(acrobot_handcoded_eval);
}

Behavior<AcrobotState> acrobot_converse_behavior() {
  return preference_behavior<AcrobotState>([](const AcrobotState& s) { return -acrobot_handcoded_eval(s); });
}

}  // namespace tdlab
