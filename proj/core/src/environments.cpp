#include "tdlab/environments.hpp"

#include <stdexcept>

namespace tdlab {

namespace {

Eigen::VectorXd dist(std::initializer_list<double> p) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(p.size()));
  Eigen::Index k = 0;
  for (double x : p) v(k++) = x;
  return v;
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
}

}  // namespace

std::string TabularSystem::region_label(const Eigen::VectorXd& w, GreedyMode mode) const {
  return greedy_policy(bmdp, w, features, mode, alpha) == optimal_policy ? "optimal" : "suboptimal";
}

std::string AcrobotSystem::region_label(const Eigen::VectorXd& w) const {
  if (w.size() != 1) throw std::invalid_argument("acrobot uses a single weight");
  if (w[0] < 0.0) return "hand-coded";
  if (w[0] > 0.0) return "converse";
  return "tie";
}

TabularSystem two_state_system_scaled(double alpha, double reward_scale) {
  check_alpha(alpha);
  // Both states share the same action rows.
  const Eigen::VectorXd a1 = dist({0.8, 0.2});
  const Eigen::VectorXd a2 = dist({0.2, 0.8});
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  g(1, 1) = 1.0 * reward_scale;
  TabularBmdp bmdp("two-state", {{a1, a2}, {a1, a2}}, g, {"A", "B"}, {"a1", "a2"});
  Eigen::MatrixXd phi(2, 1);
  phi << 2.0, 1.0;
  Policy optimal = Policy::constant_action(bmdp, 1);
  return {std::move(bmdp), TableFeatures(phi), alpha, std::move(optimal), 0};
}

TabularSystem two_state_system(double alpha) { return two_state_system_scaled(alpha, 1.0); }

TabularSystem three_state_system(double alpha) {
  check_alpha(alpha);
  TabularBmdp bmdp("three-state",
                   {{dist({0.0, 0.8, 0.2}), dist({0.0, 0.2, 0.8})},
                    {dist({0.8, 0.0, 0.2}), dist({0.2, 0.0, 0.8})},
                    {dist({0.0, 0.8, 0.2}), dist({0.0, 0.2, 0.8})}},
                   [] {
                     Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
                     g(2, 2) = 1.0;
                     return g;
                   }(),
                   {"A", "B", "C"}, {"a1", "a2"});
  Eigen::MatrixXd phi(3, 2);
  phi << 12.0 / 18.0, 6.0 / 18.0,
         6.0 / 18.0, 12.0 / 18.0,
         1.0 / 18.0, 1.0 / 18.0;
  Policy optimal = Policy::constant_action(bmdp, 1);
  return {std::move(bmdp), TableFeatures(phi), alpha, std::move(optimal), 0};
}

TabularSystem dt_counterexample_system(double alpha) {
  check_alpha(alpha);
  TabularBmdp bmdp("dt-counterexample",
                   {{dist({0.0, 1.0, 0.0})},
                    {dist({0.1, 0.0, 0.9}), dist({0.9, 0.0, 0.1})},
                    {dist({0.0, 1.0, 0.0})}},
                   [] {
                     Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
                     g(2, 1) = 1.0;
                     return g;
                   }(),
                   {"A", "B", "C"}, {"a1", "a2"});
  Eigen::MatrixXd phi(3, 1);
  phi << 1.0, 3.0, 2.0;
  Policy optimal = Policy::constant_action(bmdp, 0);
  return {std::move(bmdp), TableFeatures(phi), alpha, std::move(optimal), 1};
}

std::vector<EnvironmentInfo> environment_catalog() {
  return {
      {"two-state", "tabular", 0.5, "two states A/B, one feature; TD(1) limit has the wrong sign"},
      {"three-state", "tabular", 0.95, "three states, two features; TD(1) leaves the optimal region"},
      {"dt-counterexample", "tabular", 0.5, "period-2 chain where DT(1) and STD(1) limits have opposite signs"},
      {"acrobot", "continuous", 0.95, "damped two-link acrobot, torques +1/-1 every 0.1 s, tip-height reward"},
  };
}

System make_environment(std::string_view name, const EnvironmentOverrides& ov) {
  if (name == "acrobot") {
    if (ov.reward_scale) throw std::invalid_argument("reward_scale override applies to tabular environments only");
    AcrobotSystem sys;
    if (ov.alpha) {
      check_alpha(*ov.alpha);
      sys.alpha = *ov.alpha;
    }
    if (ov.damping) sys.params.damping = *ov.damping;
    if (ov.substep) sys.params.substep = *ov.substep;
    sys.params.validate();
    return sys;
  }
  if (ov.damping || ov.substep) {
    throw std::invalid_argument("damping/substep overrides apply to the acrobot only, not '" + std::string(name) + "'");
  }
  const double scale = ov.reward_scale.value_or(1.0);
  if (name == "two-state") return two_state_system_scaled(ov.alpha.value_or(0.5), scale);
  TabularSystem sys = [&] {
    if (name == "three-state") return three_state_system(ov.alpha.value_or(0.95));
    if (name == "dt-counterexample") return dt_counterexample_system(ov.alpha.value_or(0.5));
    throw std::invalid_argument("unknown environment '" + std::string(name) +
                                "' (two-state, three-state, dt-counterexample, acrobot)");
  }();
  if (scale != 1.0) {
    std::vector<std::vector<Eigen::VectorXd>> rows;
    for (StateId i = 0; i < sys.bmdp.n_states(); ++i) {
      rows.emplace_back();
      for (ActionId a = 0; a < sys.bmdp.num_actions(i); ++a) rows.back().push_back(sys.bmdp.transition_row(i, a));
    }
    std::vector<std::string> names;
    for (StateId i = 0; i < sys.bmdp.n_states(); ++i) names.push_back(sys.bmdp.state_name(i));
    sys.bmdp = TabularBmdp(sys.bmdp.name(), std::move(rows), sys.bmdp.rewards() * scale, std::move(names), {"a1", "a2"});
  }
  return sys;
}

}  // namespace tdlab
