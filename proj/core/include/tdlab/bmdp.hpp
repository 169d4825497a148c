#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tdlab/rng.hpp"

namespace tdlab {

using StateId = int;
using ActionId = int;

/// A finite MDP in which every state has at most two possible successors
/// (taken over the union of its actions). p(i, a, j) is stored per state as
/// one distribution per available action; g(i, j) is the transition reward.
class TabularBmdp {
 public:
  TabularBmdp(std::string name, std::vector<std::vector<Eigen::VectorXd>> transitions,
              Eigen::MatrixXd rewards, std::vector<std::string> state_names = {},
              std::vector<std::string> action_names = {});

  const std::string& name() const { return name_; }
  int n_states() const { return static_cast<int>(transitions_.size()); }
  int num_actions(StateId i) const;
  int max_actions() const;

  double p(StateId i, ActionId a, StateId j) const;
  const Eigen::VectorXd& transition_row(StateId i, ActionId a) const;
  double reward(StateId i, StateId j) const { return rewards_(i, j); }
  const Eigen::MatrixXd& rewards() const { return rewards_; }

  std::string state_name(StateId i) const;
  std::string action_name(ActionId a) const;
  std::optional<StateId> find_state(std::string_view name) const;
  std::optional<ActionId> find_action(std::string_view name) const;

  void check_state(StateId i) const;

 private:
  std::string name_;
  std::vector<std::vector<Eigen::VectorXd>> transitions_;
  Eigen::MatrixXd rewards_;
  std::vector<std::string> state_names_;
  std::vector<std::string> action_names_;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks row sums, probability ranges and the two-successor property.
/// Never throws; every violated invariant is listed.
ValidationReport validate(const TabularBmdp& bmdp);

/// The candidate successors of a state in ascending index order. A state with
/// a single successor reports it in both slots.
struct SuccessorSupport {
  StateId first;
  StateId second;
  bool singleton() const { return first == second; }
  StateId other(StateId j) const { return j == first ? second : first; }
};

SuccessorSupport successor_support(const TabularBmdp& bmdp, StateId state);

/// Stationary per-state action distribution.
class Policy {
 public:
  static Policy fixed(const TabularBmdp& bmdp, std::vector<ActionId> actions);
  /// Same action id everywhere; states offering a single action use it instead.
  static Policy constant_action(const TabularBmdp& bmdp, ActionId action);
  static Policy stochastic(const TabularBmdp& bmdp, std::vector<std::vector<double>> dists);
  static Policy uniform(const TabularBmdp& bmdp);

  int n_states() const { return static_cast<int>(dists_.size()); }
  std::span<const double> action_probs(StateId i) const { return dists_.at(i); }
  /// The chosen action when the state's distribution is a point mass.
  std::optional<ActionId> deterministic_action(StateId i) const;
  bool is_deterministic() const;
  std::string describe(const TabularBmdp& bmdp) const;

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  explicit Policy(std::vector<std::vector<double>> dists) : dists_(std::move(dists)) {}
  std::vector<std::vector<double>> dists_;
};

/// Markov chain with transition rewards, e.g. a BMDP under a fixed policy.
struct MarkovChain {
  Eigen::MatrixXd transition;  // P(i, j)
  Eigen::MatrixXd reward;      // g(i, j)

  int size() const { return static_cast<int>(transition.rows()); }
};

MarkovChain induced_chain(const TabularBmdp& bmdp, const Policy& policy);

class ReducibleChainError : public std::runtime_error {
 public:
  ReducibleChainError(const std::string& what, std::vector<std::vector<int>> classes)
      : std::runtime_error(what), recurrent_classes(std::move(classes)) {}
  std::vector<std::vector<int>> recurrent_classes;
};

struct StationaryDistribution {
  Eigen::VectorXd pi;
  /// pair_pi(i, i'): long-run probability of occupying i with sibling i'.
  /// Empty for chains that are not built from a BMDP.
  Eigen::MatrixXd pair_pi;
};

/// Unique invariant distribution of a chain with a single recurrent class.
/// Transient states get zero mass. For periodic chains this is the time
/// average (Cesaro) distribution. Throws ReducibleChainError otherwise.
StationaryDistribution stationary_distribution(const MarkovChain& chain);
StationaryDistribution stationary_distribution(const TabularBmdp& bmdp, const Policy& policy);

/// Solves (I - alpha P) J = rbar with rbar(i) = sum_j P(i,j) g(i,j).
Eigen::VectorXd exact_value(const MarkovChain& chain, double alpha);
Eigen::VectorXd exact_value(const TabularBmdp& bmdp, const Policy& policy, double alpha);

/// Markov chain over (state, sibling) pairs. Derived state s = (i, i')
/// moves to (j, j') with probability p(i, j) when {j, j'} is the successor
/// support of i; the reward of that move is g(i, j).
struct DerivedChain {
  TabularBmdp chain;
  std::vector<std::pair<StateId, StateId>> pairs;

  std::optional<StateId> index_of(StateId state, StateId sibling) const;
};

/// States are the pairs with positive pair_pi, the optional entry pairs, and
/// everything reachable from them.
DerivedChain derived_sibling_chain(const TabularBmdp& bmdp, const Policy& policy,
                                   std::span<const std::pair<StateId, StateId>> entry_pairs = {});

/// Two independent copies of the policy chain run in lock-step. Compound
/// state (x, xh) has index x * n + xh; its stage cost is g(x,y) - g(xh,yh).
struct CompoundChain {
  MarkovChain chain;
  int base_states = 0;

  int index(StateId x, StateId xh) const { return x * base_states + xh; }
};

CompoundChain compound_chain(const TabularBmdp& bmdp, const Policy& policy);

// ---------------------------------------------------------------------------
// Simulation contract shared by tabular and continuous environments.

/// The decision offered in a state: two candidate successors, their rewards,
/// and for each action the probability of landing on `first`.
template <class State>
struct Branch {
  State first{};
  State second{};
  double reward_first = 0.0;
  double reward_second = 0.0;
  std::span<const double> prob_first;

  int num_actions() const { return static_cast<int>(prob_first.size()); }
};

template <class E>
concept SiblingEnvironment = requires(const E& env, const typename E::State& s) {
  typename E::State;
  { env.branch(s) } -> std::convertible_to<Branch<typename E::State>>;
  { env.reward_bound() } -> std::convertible_to<double>;
};

template <class State>
struct Outcome {
  State next{};
  State sibling{};
  double reward = 0.0;
};

/// Inverse-CDF resolution of one transition: `first` is taken when
/// u < P(first | action).
template <class State>
Outcome<State> resolve(const Branch<State>& branch, ActionId action, double u) {
  if (action < 0 || action >= branch.num_actions()) {
    throw std::out_of_range("action " + std::to_string(action) + " not available");
  }
  if (u < branch.prob_first[static_cast<std::size_t>(action)]) {
    return {branch.first, branch.second, branch.reward_first};
  }
  return {branch.second, branch.first, branch.reward_second};
}

/// Chooses an action given the current state and its branch.
template <class State>
using Behavior = std::function<ActionId(const State&, const Branch<State>&, Rng&)>;

/// Precomputed branches of a tabular BMDP.
class TabularBranches {
 public:
  using State = StateId;

  explicit TabularBranches(const TabularBmdp& bmdp);

  Branch<StateId> branch(StateId i) const {
    const Entry& e = entries_[static_cast<std::size_t>(i)];
    return {e.support.first, e.support.second, e.reward_first, e.reward_second, e.prob_first};
  }
  double reward_bound() const { return reward_bound_; }
  int n_states() const { return static_cast<int>(entries_.size()); }
  SuccessorSupport support(StateId i) const { return entries_.at(i).support; }

 private:
  struct Entry {
    SuccessorSupport support;
    double reward_first;
    double reward_second;
    std::vector<double> prob_first;
  };
  std::vector<Entry> entries_;
  double reward_bound_ = 0.0;
};

/// Samples actions from a tabular policy. Point-mass states consume no draw.
Behavior<StateId> policy_behavior(const Policy& policy);

/// One realized transition; `u` is the uniform draw used for the successor.
Outcome<StateId> step_with_draw(const TabularBmdp& bmdp, StateId state, ActionId action, double u);
Outcome<StateId> step(const TabularBmdp& bmdp, StateId state, ActionId action, Rng& rng);

template <class State>
struct SiblingStep {
  std::int64_t t = 0;
  State state{};
  State sibling{};
  ActionId action = 0;
  double reward = 0.0;
  State next_state{};
  State next_sibling{};
};

/// Lazily generated trajectory exposing sibling states. Step 0 starts with
/// sibling = start. Per step the behavior draws first (if stochastic), then
/// one uniform resolves the successor.
template <SiblingEnvironment Env>
class TrajectoryStream {
 public:
  using State = typename Env::State;

  TrajectoryStream(Env env, Behavior<State> behavior, State start, std::int64_t length, Rng rng)
      : env_(std::move(env)),
        behavior_(std::move(behavior)),
        state_(start),
        sibling_(start),
        length_(length),
        rng_(std::move(rng)) {}

  std::optional<SiblingStep<State>> next() {
    if (t_ >= length_) return std::nullopt;
    const Branch<State> br = env_.branch(state_);
    const ActionId a = behavior_(state_, br, rng_);
    const Outcome<State> out = resolve(br, a, rng_.uniform());
    SiblingStep<State> s{t_, state_, sibling_, a, out.reward, out.next, out.sibling};
    state_ = out.next;
    sibling_ = out.sibling;
    ++t_;
    return s;
  }

  std::int64_t position() const { return t_; }

 private:
  Env env_;
  Behavior<State> behavior_;
  State state_;
  State sibling_;
  std::int64_t length_;
  std::int64_t t_ = 0;
  Rng rng_;
};

TrajectoryStream<TabularBranches> trajectory(const TabularBmdp& bmdp, const Policy& policy,
                                             StateId start, std::int64_t length, Rng rng);

}  // namespace tdlab
