#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tdlab/approx.hpp"
#include "tdlab/bmdp.hpp"
#include "tdlab/rng.hpp"

namespace tdlab {

/// gamma_t: constant, or harmonic a / (b + t).
class StepSchedule {
 public:
  enum class Kind { constant, harmonic };

  static StepSchedule constant(double gamma);
  static StepSchedule harmonic(double a, double b);

  double operator()(std::int64_t t) const {
    return kind_ == Kind::constant ? a_ : a_ / (b_ + static_cast<double>(t));
  }

  Kind kind() const { return kind_; }
  double a() const { return a_; }
  double b() const { return b_; }

  /// "constant:0.003" or "harmonic:1,100".
  std::string to_string() const;
  static StepSchedule parse(std::string_view text);

  friend bool operator==(const StepSchedule&, const StepSchedule&) = default;

 private:
  StepSchedule(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
  Kind kind_;
  double a_;
  double b_;
};

enum class LearnerVariant { td, std, std_nonlinear, std_scaled, dt };

std::string to_string(LearnerVariant v);
LearnerVariant parse_learner_variant(std::string_view text);

struct LearnerConfig {
  double lambda = 1.0;
  double alpha = 0.5;
  StepSchedule schedule = StepSchedule::harmonic(1.0, 1.0);
  LearnerVariant variant = LearnerVariant::std;

  /// Throws std::invalid_argument when lambda or alpha is out of range.
  void validate() const;
};

struct LearnerState {
  Eigen::VectorXd w;
  Eigen::VectorXd z;
  std::int64_t t = 0;

  /// Weights w0 with a zero trace.
  static LearnerState initial(const Eigen::VectorXd& w0) { return {w0, Eigen::VectorXd::Zero(w0.size()), 0}; }
};

/// Two independent transitions sampled in lock-step (differential training).
template <class State>
struct PairStep {
  State state{};
  State next_state{};
  double reward = 0.0;
  State shadow{};
  State next_shadow{};
  double shadow_reward = 0.0;
};

namespace detail {

inline void check_dims(const LearnerState& s, std::size_t dim) {
  if (static_cast<std::size_t>(s.w.size()) != dim || static_cast<std::size_t>(s.z.size()) != dim) {
    throw std::invalid_argument("learner: weight/trace length does not match feature dim " + std::to_string(dim));
  }
}

// w <- w + gamma_t d z_t, then z <- alpha lambda z + increment.
template <class Inc>
void apply_update(LearnerState& s, const LearnerConfig& cfg, double d, const Inc& increment) {
  const double gain = cfg.schedule(s.t) * d;
  for (Eigen::Index k = 0; k < s.w.size(); ++k) s.w[k] += gain * s.z[k];
  const double decay = cfg.alpha * cfg.lambda;
  for (Eigen::Index k = 0; k < s.z.size(); ++k) s.z[k] = decay * s.z[k] + increment(k);
  ++s.t;
}

template <class State, class F>
double sibling_update(LearnerState& s, const SiblingStep<State>& step, const LearnerConfig& cfg, const F& phi,
                      double reward_scale) {
  check_dims(s, phi.dim());
  const auto& f_now = phi(step.state);
  const auto& f_now_sib = phi(step.sibling);
  const auto& f_next = phi(step.next_state);
  const auto& f_next_sib = phi(step.next_sibling);
  const double d = reward_scale * step.reward + cfg.alpha * dot_diff(s.w, f_next, f_next_sib) -
                   dot_diff(s.w, f_now, f_now_sib);
  apply_update(s, cfg, d, [&](Eigen::Index k) { return f_next[k] - f_next_sib[k]; });
  return d;
}

}  // namespace detail

/// Classic TD(lambda) on the realized states; siblings in `step` are ignored.
/// The trace convention is z_0 = phi(x_0) (see td_initial_state).
/// Returns the temporal difference d_t.
template <class State, FeatureMapFor<State> F>
double td_step(LearnerState& s, const SiblingStep<State>& step, const LearnerConfig& cfg, const F& phi) {
  detail::check_dims(s, phi.dim());
  const auto& f_now = phi(step.state);
  const auto& f_next = phi(step.next_state);
  const double d = step.reward + cfg.alpha * detail::dot(s.w, f_next) - detail::dot(s.w, f_now);
  detail::apply_update(s, cfg, d, [&](Eigen::Index k) { return f_next[k]; });
  return d;
}

/// STD(lambda): TD on sibling feature differences. Starts from z_0 = 0.
template <class State, FeatureMapFor<State> F>
double std_step(LearnerState& s, const SiblingStep<State>& step, const LearnerConfig& cfg, const F& phi) {
  return detail::sibling_update(s, step, cfg, phi, 1.0);
}

/// STD with the reward term doubled, which removes the factor 1/2 on the
/// weighted sibling-difference target.
template <class State, FeatureMapFor<State> F>
double std_step_scaled(LearnerState& s, const SiblingStep<State>& step, const LearnerConfig& cfg, const F& phi) {
  return detail::sibling_update(s, step, cfg, phi, 2.0);
}

/// A parameterised value function J~(x, w) with its weight gradient.
template <class V, class State>
concept DifferentiableValue = requires(const V& v, const State& s, const Eigen::VectorXd& w) {
  { v.dim() } -> std::convertible_to<std::size_t>;
  { v.value(s, w) } -> std::convertible_to<double>;
  { v.gradient(s, w) } -> std::convertible_to<Eigen::VectorXd>;
};

/// J~(a, w) - J~(b, w). Uses the value function's own difference when it
/// provides one.
template <class State, DifferentiableValue<State> V>
double value_difference(const V& v, const State& a, const State& b, const Eigen::VectorXd& w) {
  if constexpr (requires { v.difference(a, b, w); }) {
    return v.difference(a, b, w);
  } else {
    return v.value(a, w) - v.value(b, w);
  }
}

/// STD with the trace fed by gradients:
/// z <- alpha lambda z + grad J~(x_{t+1}, w) - grad J~(x'_{t+1}, w),
/// gradients taken at the updated weights.
template <class State, DifferentiableValue<State> V>
double std_step_nonlinear(LearnerState& s, const SiblingStep<State>& step, const LearnerConfig& cfg, const V& fn) {
  detail::check_dims(s, fn.dim());
  const double d = step.reward + cfg.alpha * value_difference(fn, step.next_state, step.next_sibling, s.w) -
                   value_difference(fn, step.state, step.sibling, s.w);
  const double gain = cfg.schedule(s.t) * d;
  for (Eigen::Index k = 0; k < s.w.size(); ++k) s.w[k] += gain * s.z[k];
  const Eigen::VectorXd g_next = fn.gradient(step.next_state, s.w);
  const Eigen::VectorXd g_next_sib = fn.gradient(step.next_sibling, s.w);
  if (static_cast<std::size_t>(g_next.size()) != fn.dim() || static_cast<std::size_t>(g_next_sib.size()) != fn.dim()) {
    throw std::invalid_argument("std_step_nonlinear: gradient length does not match weight length");
  }
  const double decay = cfg.alpha * cfg.lambda;
  for (Eigen::Index k = 0; k < s.z.size(); ++k) s.z[k] = decay * s.z[k] + (g_next[k] - g_next_sib[k]);
  ++s.t;
  return d;
}

/// Linear J~ = w . phi exposed through the gradient interface.
template <class State, FeatureMapFor<State> F>
class LinearValue {
 public:
  explicit LinearValue(F phi) : phi_(std::move(phi)) {}

  std::size_t dim() const { return phi_.dim(); }
  double value(const State& s, const Eigen::VectorXd& w) const { return detail::dot(w, phi_(s)); }
  double difference(const State& a, const State& b, const Eigen::VectorXd& w) const {
    return detail::dot_diff(w, phi_(a), phi_(b));
  }
  Eigen::VectorXd gradient(const State& s, const Eigen::VectorXd&) const {
    const auto& f = phi_(s);
    Eigen::VectorXd g(static_cast<Eigen::Index>(phi_.dim()));
    for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = f[k];
    return g;
  }

 private:
  F phi_;
};

/// Differential training DT(lambda): TD on G~(x, xh) = J~(x) - J~(xh) over
/// two lock-step copies, with stage cost g(x, x+) - g(xh, xh+).
template <class State, FeatureMapFor<State> F>
double dt_step(LearnerState& s, const PairStep<State>& step, const LearnerConfig& cfg, const F& phi) {
  detail::check_dims(s, phi.dim());
  const auto& f_now = phi(step.state);
  const auto& f_now_sh = phi(step.shadow);
  const auto& f_next = phi(step.next_state);
  const auto& f_next_sh = phi(step.next_shadow);
  const double d = (step.reward - step.shadow_reward) + cfg.alpha * detail::dot_diff(s.w, f_next, f_next_sh) -
                   detail::dot_diff(s.w, f_now, f_now_sh);
  detail::apply_update(s, cfg, d, [&](Eigen::Index k) { return f_next[k] - f_next_sh[k]; });
  return d;
}

/// TD trace initialisation z_0 = phi(x_0).
template <class State, FeatureMapFor<State> F>
LearnerState td_initial_state(const Eigen::VectorXd& w0, const State& start, const F& phi) {
  LearnerState s = LearnerState::initial(w0);
  const auto& f = phi(start);
  for (Eigen::Index k = 0; k < s.z.size(); ++k) s.z[k] = f[k];
  return s;
}

// ---------------------------------------------------------------------------
// Run driver

/// Behavior that re-greedifies on the learner's live weights every step.
struct GreedyOnline {
  GreedyMode mode = GreedyMode::successor_preference;
};

template <class State>
using BehaviorSpec = std::variant<Behavior<State>, GreedyOnline>;

struct RunOptions {
  std::int64_t steps = 0;
  std::uint64_t seed = 1;
  std::int64_t log_every = 0;  // 0: log only the initial and final points
  double divergence_bound = 1e6;
  /// DT only: every this many steps the shadow copy takes one extra
  /// transition and the trace restarts. Mixes the parity classes of a
  /// periodic compound chain. 0 disables.
  std::int64_t desync_interval = 0;
  /// Return the partial result (diverged = true) instead of throwing.
  bool stop_on_divergence = false;
};

struct LogPoint {
  std::int64_t t = 0;
  Eigen::VectorXd w;
  double td_error = 0.0;
  double trace_norm = 0.0;
};

struct RunResult {
  LearnerState final_state;
  std::vector<LogPoint> log;
  bool diverged = false;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::int64_t step, double norm, double bound);
  std::int64_t step;
  double norm;
};

namespace detail {

// True when the run must stop.
inline bool guard(const LearnerState& s, const RunOptions& opts) {
  const double norm = s.w.norm();
  if (norm <= opts.divergence_bound) return false;
  if (!opts.stop_on_divergence) throw DivergenceError(s.t, norm, opts.divergence_bound);
  return true;
}

inline bool should_log(std::int64_t t, std::int64_t every, std::int64_t steps) {
  return t == steps || (every > 0 && t % every == 0);
}

}  // namespace detail

/// Runs one learner over a single simulated trajectory (two lock-step
/// trajectories for DT). Deterministic given the seed. Throws
/// DivergenceError when ||w|| exceeds the bound.
template <SiblingEnvironment Env, FeatureMapFor<typename Env::State> F>
RunResult run_learner(const Env& env, const BehaviorSpec<typename Env::State>& behavior_spec,
                      const LearnerConfig& cfg, const F& phi, const Eigen::VectorXd& w0,
                      const typename Env::State& start, const RunOptions& opts,
                      std::optional<typename Env::State> shadow_start = std::nullopt) {
  using State = typename Env::State;
  cfg.validate();
  if (static_cast<std::size_t>(w0.size()) != phi.dim()) {
    throw std::invalid_argument("run_learner: initial weights have length " + std::to_string(w0.size()) +
                                ", feature dim is " + std::to_string(phi.dim()));
  }
  if (opts.steps < 0) throw std::invalid_argument("run_learner: negative step count");

  Rng rng(opts.seed);
  RunResult result;
  LearnerState& s = result.final_state;
  s = cfg.variant == LearnerVariant::td ? td_initial_state(w0, start, phi) : LearnerState::initial(w0);

  const Behavior<State> behavior =
      std::holds_alternative<Behavior<State>>(behavior_spec)
          ? std::get<Behavior<State>>(behavior_spec)
          : greedy_behavior<State>(&s.w, phi, std::get<GreedyOnline>(behavior_spec).mode, cfg.alpha);

  double last_d = 0.0;
  auto log_point = [&] { result.log.push_back({s.t, s.w, last_d, s.z.norm()}); };
  log_point();

  if (cfg.variant == LearnerVariant::dt) {
    State x = start;
    State xh = shadow_start.value_or(start);
    for (Eigen::Index k = 0; k < s.z.size(); ++k) s.z[k] = phi(x)[k] - phi(xh)[k];
    while (s.t < opts.steps) {
      if (opts.desync_interval > 0 && s.t > 0 && s.t % opts.desync_interval == 0) {
        const Branch<State> bh = env.branch(xh);
        const ActionId ah = behavior(xh, bh, rng);
        xh = resolve(bh, ah, rng.uniform()).next;
        for (Eigen::Index k = 0; k < s.z.size(); ++k) s.z[k] = phi(x)[k] - phi(xh)[k];
      }
      const Branch<State> b = env.branch(x);
      const ActionId a = behavior(x, b, rng);
      const Outcome<State> o = resolve(b, a, rng.uniform());
      const Branch<State> bh = env.branch(xh);
      const ActionId ah = behavior(xh, bh, rng);
      const Outcome<State> oh = resolve(bh, ah, rng.uniform());
      last_d = dt_step(s, PairStep<State>{x, o.next, o.reward, xh, oh.next, oh.reward}, cfg, phi);
      if (detail::guard(s, opts)) {
        result.diverged = true;
        log_point();
        return result;
      }
      x = o.next;
      xh = oh.next;
      if (detail::should_log(s.t, opts.log_every, opts.steps)) log_point();
    }
    return result;
  }

  const LinearValue<State, F> linear(phi);
  State x = start;
  State sib = start;
  while (s.t < opts.steps) {
    const Branch<State> b = env.branch(x);
    const ActionId a = behavior(x, b, rng);
    const Outcome<State> o = resolve(b, a, rng.uniform());
    const SiblingStep<State> step{s.t, x, sib, a, o.reward, o.next, o.sibling};
    switch (cfg.variant) {
      case LearnerVariant::td: last_d = td_step(s, step, cfg, phi); break;
      case LearnerVariant::std: last_d = std_step(s, step, cfg, phi); break;
      case LearnerVariant::std_scaled: last_d = std_step_scaled(s, step, cfg, phi); break;
      case LearnerVariant::std_nonlinear: last_d = std_step_nonlinear(s, step, cfg, linear); break;
      case LearnerVariant::dt: break;
    }
    if (detail::guard(s, opts)) {
      result.diverged = true;
      log_point();
      return result;
    }
    x = o.next;
    sib = o.sibling;
    if (detail::should_log(s.t, opts.log_every, opts.steps)) log_point();
  }
  return result;
}

}  // namespace tdlab
