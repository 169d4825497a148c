#include "tdlab/bmdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace tdlab {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kSolveResidualTol = 1e-10;

std::vector<StateId> successors_of(const TabularBmdp& bmdp, StateId i) {
  std::set<StateId> out;
  for (ActionId a = 0; a < bmdp.num_actions(i); ++a) {
    const Eigen::VectorXd& row = bmdp.transition_row(i, a);
    for (StateId j = 0; j < bmdp.n_states(); ++j) {
      if (row(j) > 0.0) out.insert(j);
    }
  }
  return {out.begin(), out.end()};
}

std::string join_states(const TabularBmdp* bmdp, const std::vector<int>& states) {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (k) os << ", ";
    if (bmdp) {
      os << bmdp->state_name(states[k]);
    } else {
      os << states[k];
    }
  }
  os << '}';
  return os.str();
}

std::vector<std::vector<bool>> reachability(const Eigen::MatrixXd& p) {
  const int n = static_cast<int>(p.rows());
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int s = 0; s < n; ++s) {
    std::deque<int> queue{s};
    reach[s][s] = true;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v = 0; v < n; ++v) {
        if (p(u, v) > 0.0 && !reach[s][v]) {
          reach[s][v] = true;
          queue.push_back(v);
        }
      }
    }
  }
  return reach;
}

std::vector<std::vector<int>> recurrent_classes(const Eigen::MatrixXd& p) {
  const int n = static_cast<int>(p.rows());
  const auto reach = reachability(p);
  std::vector<bool> assigned(n, false);
  std::vector<std::vector<int>> classes;
  for (int i = 0; i < n; ++i) {
    if (assigned[i]) continue;
    bool closed = true;
    for (int j = 0; j < n && closed; ++j) {
      if (reach[i][j] && !reach[j][i]) closed = false;
    }
    if (!closed) continue;
    std::vector<int> cls;
    for (int j = 0; j < n; ++j) {
      if (reach[i][j]) {
        cls.push_back(j);
        assigned[j] = true;
      }
    }
    classes.push_back(std::move(cls));
  }
  return classes;
}

StationaryDistribution stationary_impl(const MarkovChain& chain, const TabularBmdp* names) {
  const int n = chain.size();
  if (n == 0) throw std::invalid_argument("stationary_distribution: empty chain");
  const auto classes = recurrent_classes(chain.transition);
  if (classes.size() != 1) {
    std::ostringstream os;
    os << "chain has " << classes.size() << " recurrent classes:";
    for (const auto& c : classes) os << ' ' << join_states(names, c);
    throw ReducibleChainError(os.str(), classes);
  }
  const std::vector<int>& cls = classes.front();
  const int m = static_cast<int>(cls.size());

  // pi^T (P_C - I) = 0 with the last balance equation replaced by sum(pi) = 1.
  Eigen::MatrixXd a(m, m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      a(r, c) = chain.transition(cls[c], cls[r]) - (r == c ? 1.0 : 0.0);
    }
  }
  a.row(m - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  b(m - 1) = 1.0;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  Eigen::VectorXd sub = lu.solve(b);
  sub += lu.solve(b - a * sub);  // one refinement pass

  StationaryDistribution out;
  out.pi = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < m; ++k) out.pi(cls[k]) = std::max(0.0, sub(k));
  out.pi /= out.pi.sum();

  const double residual = (out.pi.transpose() * chain.transition - out.pi.transpose()).cwiseAbs().maxCoeff();
  if (!(residual < kSolveResidualTol)) {
    throw std::runtime_error("stationary_distribution: balance residual " + std::to_string(residual));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

TabularBmdp::TabularBmdp(std::string name, std::vector<std::vector<Eigen::VectorXd>> transitions,
                         Eigen::MatrixXd rewards, std::vector<std::string> state_names,
                         std::vector<std::string> action_names)
    : name_(std::move(name)),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      state_names_(std::move(state_names)),
      action_names_(std::move(action_names)) {
  const int n = n_states();
  if (n == 0) throw std::invalid_argument("TabularBmdp: no states");
  if (rewards_.rows() != n || rewards_.cols() != n) {
    throw std::invalid_argument("TabularBmdp: reward table must be n x n");
  }
  if (!state_names_.empty() && static_cast<int>(state_names_.size()) != n) {
    throw std::invalid_argument("TabularBmdp: state name count mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (transitions_[i].empty()) {
      throw std::invalid_argument("TabularBmdp: state " + std::to_string(i) + " has no actions");
    }
    for (const auto& row : transitions_[i]) {
      if (row.size() != n) throw std::invalid_argument("TabularBmdp: transition row length mismatch");
    }
  }
}

int TabularBmdp::num_actions(StateId i) const {
  check_state(i);
  return static_cast<int>(transitions_[i].size());
}

int TabularBmdp::max_actions() const {
  std::size_t m = 0;
  for (const auto& rows : transitions_) m = std::max(m, rows.size());
  return static_cast<int>(m);
}

double TabularBmdp::p(StateId i, ActionId a, StateId j) const {
  check_state(j);
  return transition_row(i, a)(j);
}

const Eigen::VectorXd& TabularBmdp::transition_row(StateId i, ActionId a) const {
  check_state(i);
  if (a < 0 || a >= static_cast<int>(transitions_[i].size())) {
    throw std::out_of_range("action " + std::to_string(a) + " not available in state " + state_name(i));
  }
  return transitions_[i][a];
}

std::string TabularBmdp::state_name(StateId i) const {
  if (i >= 0 && i < static_cast<int>(state_names_.size())) return state_names_[i];
  return std::to_string(i);
}

std::string TabularBmdp::action_name(ActionId a) const {
  if (a >= 0 && a < static_cast<int>(action_names_.size())) return action_names_[a];
  return "a" + std::to_string(a);
}

std::optional<StateId> TabularBmdp::find_state(std::string_view name) const {
  for (int i = 0; i < n_states(); ++i) {
    if (state_name(i) == name) return i;
  }
  return std::nullopt;
}

std::optional<ActionId> TabularBmdp::find_action(std::string_view name) const {
  for (int a = 0; a < max_actions(); ++a) {
    if (action_name(a) == name) return a;
  }
  return std::nullopt;
}

void TabularBmdp::check_state(StateId i) const {
  if (i < 0 || i >= n_states()) {
    throw std::out_of_range("state " + std::to_string(i) + " out of range [0, " + std::to_string(n_states()) + ")");
  }
}

ValidationReport validate(const TabularBmdp& bmdp) {
  ValidationReport report;
  for (StateId i = 0; i < bmdp.n_states(); ++i) {
    for (ActionId a = 0; a < bmdp.num_actions(i); ++a) {
      const Eigen::VectorXd& row = bmdp.transition_row(i, a);
      if ((row.array() < 0.0).any() || (row.array() > 1.0).any() || !row.allFinite()) {
        report.violations.push_back("probability out of [0,1] at state " + bmdp.state_name(i) + ", action " +
                                    bmdp.action_name(a));
      }
      const double sum = row.sum();
      if (std::abs(sum - 1.0) > kRowSumTol) {
        std::ostringstream os;
        os << "row-sum: state " << bmdp.state_name(i) << ", action " << bmdp.action_name(a) << " sums to "
           << sum;
        report.violations.push_back(os.str());
      }
    }
    const auto succ = successors_of(bmdp, i);
    if (succ.size() > 2) {
      report.violations.push_back("bmdp-property: state " + bmdp.state_name(i) + " has " +
                                  std::to_string(succ.size()) + " possible successors " +
                                  join_states(&bmdp, succ));
    }
  }
  if (!bmdp.rewards().allFinite()) report.violations.push_back("reward table has non-finite entries");
  return report;
}

SuccessorSupport successor_support(const TabularBmdp& bmdp, StateId state) {
  bmdp.check_state(state);
  const auto succ = successors_of(bmdp, state);
  if (succ.empty()) throw std::invalid_argument("state " + bmdp.state_name(state) + " has no successor");
  if (succ.size() > 2) {
    throw std::invalid_argument("state " + bmdp.state_name(state) + " violates the two-successor property");
  }
  return {succ.front(), succ.back()};
}

// ---------------------------------------------------------------------------

Policy Policy::fixed(const TabularBmdp& bmdp, std::vector<ActionId> actions) {
  if (static_cast<int>(actions.size()) != bmdp.n_states()) {
    throw std::invalid_argument("Policy::fixed: need one action per state");
  }
  std::vector<std::vector<double>> d(actions.size());
  for (StateId i = 0; i < bmdp.n_states(); ++i) {
    const int k = bmdp.num_actions(i);
    if (actions[i] < 0 || actions[i] >= k) {
      throw std::out_of_range("Policy::fixed: action " + std::to_string(actions[i]) + " unavailable in state " +
                              bmdp.state_name(i));
    }
    d[i].assign(static_cast<std::size_t>(k), 0.0);
    d[i][static_cast<std::size_t>(actions[i])] = 1.0;
  }
  return Policy(std::move(d));
}

Policy Policy::constant_action(const TabularBmdp& bmdp, ActionId action) {
  std::vector<ActionId> actions(static_cast<std::size_t>(bmdp.n_states()));
  for (StateId i = 0; i < bmdp.n_states(); ++i) {
    const int k = bmdp.num_actions(i);
    if (k == 1) {
      actions[i] = 0;
    } else if (action < k) {
      actions[i] = action;
    } else {
      throw std::out_of_range("action " + bmdp.action_name(action) + " unavailable in state " + bmdp.state_name(i));
    }
  }
  return fixed(bmdp, std::move(actions));
}

Policy Policy::stochastic(const TabularBmdp& bmdp, std::vector<std::vector<double>> dists) {
  if (static_cast<int>(dists.size()) != bmdp.n_states()) {
    throw std::invalid_argument("Policy::stochastic: need one distribution per state");
  }
  for (StateId i = 0; i < bmdp.n_states(); ++i) {
    if (static_cast<int>(dists[i].size()) != bmdp.num_actions(i)) {
      throw std::invalid_argument("Policy::stochastic: distribution length mismatch at state " + bmdp.state_name(i));
    }
    const double sum = std::accumulate(dists[i].begin(), dists[i].end(), 0.0);
    const bool in_range = std::all_of(dists[i].begin(), dists[i].end(), [](double p) { return p >= 0.0 && p <= 1.0; });
    if (!in_range || std::abs(sum - 1.0) > kRowSumTol) {
      throw std::invalid_argument("Policy::stochastic: distribution at state " + bmdp.state_name(i) +
                                  " is not a probability vector");
    }
  }
  return Policy(std::move(dists));
}

Policy Policy::uniform(const TabularBmdp& bmdp) {
  std::vector<std::vector<double>> d(static_cast<std::size_t>(bmdp.n_states()));
  for (StateId i = 0; i < bmdp.n_states(); ++i) {
    const int k = bmdp.num_actions(i);
    d[i].assign(static_cast<std::size_t>(k), 1.0 / k);
  }
  return Policy(std::move(d));
}

std::optional<ActionId> Policy::deterministic_action(StateId i) const {
  const auto& d = dists_.at(static_cast<std::size_t>(i));
  for (std::size_t a = 0; a < d.size(); ++a) {
    if (d[a] == 1.0) return static_cast<ActionId>(a);
  }
  return std::nullopt;
}

bool Policy::is_deterministic() const {
  for (int i = 0; i < n_states(); ++i) {
    if (!deterministic_action(i)) return false;
  }
  return true;
}

std::string Policy::describe(const TabularBmdp& bmdp) const {
  std::ostringstream os;
  for (int i = 0; i < n_states(); ++i) {
    if (i) os << ' ';
    os << bmdp.state_name(i) << ':';
    if (auto a = deterministic_action(i)) {
      os << bmdp.action_name(*a);
    } else {
      os << '[';
      for (std::size_t a = 0; a < dists_[i].size(); ++a) os << (a ? "," : "") << dists_[i][a];
      os << ']';
    }
  }
  return os.str();
}

MarkovChain induced_chain(const TabularBmdp& bmdp, const Policy& policy) {
  const int n = bmdp.n_states();
  if (policy.n_states() != n) throw std::invalid_argument("induced_chain: policy size mismatch");
  MarkovChain chain{Eigen::MatrixXd::Zero(n, n), bmdp.rewards()};
  for (StateId i = 0; i < n; ++i) {
    const auto probs = policy.action_probs(i);
    if (static_cast<int>(probs.size()) != bmdp.num_actions(i)) {
      throw std::invalid_argument("induced_chain: policy does not match actions of state " + bmdp.state_name(i));
    }
    for (ActionId a = 0; a < bmdp.num_actions(i); ++a) {
      if (probs[a] > 0.0) chain.transition.row(i) += probs[a] * bmdp.transition_row(i, a).transpose();
    }
  }
  return chain;
}

StationaryDistribution stationary_distribution(const MarkovChain& chain) { return stationary_impl(chain, nullptr); }

StationaryDistribution stationary_distribution(const TabularBmdp& bmdp, const Policy& policy) {
  const MarkovChain chain = induced_chain(bmdp, policy);
  StationaryDistribution out = stationary_impl(chain, &bmdp);
  const int n = bmdp.n_states();
  out.pair_pi = Eigen::MatrixXd::Zero(n, n);
  for (StateId j = 0; j < n; ++j) {
    if (out.pi(j) == 0.0) continue;
    const SuccessorSupport sup = successor_support(bmdp, j);
    if (sup.singleton()) {
      out.pair_pi(sup.first, sup.first) += out.pi(j) * chain.transition(j, sup.first);
    } else {
      out.pair_pi(sup.first, sup.second) += out.pi(j) * chain.transition(j, sup.first);
      out.pair_pi(sup.second, sup.first) += out.pi(j) * chain.transition(j, sup.second);
    }
  }
  return out;
}

Eigen::VectorXd exact_value(const MarkovChain& chain, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("exact_value: alpha must lie in [0, 1)");
  const int n = chain.size();
  const Eigen::VectorXd rbar = chain.transition.cwiseProduct(chain.reward).rowwise().sum();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - alpha * chain.transition;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  Eigen::VectorXd j = lu.solve(rbar);
  j += lu.solve(rbar - a * j);
  const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
  const double residual = (a * j - rbar).cwiseAbs().maxCoeff();
  if (!(residual < kSolveResidualTol * scale)) {
    throw std::runtime_error("exact_value: Bellman residual " + std::to_string(residual));
  }
  return j;
}

Eigen::VectorXd exact_value(const TabularBmdp& bmdp, const Policy& policy, double alpha) {
  return exact_value(induced_chain(bmdp, policy), alpha);
}

// ---------------------------------------------------------------------------

std::optional<StateId> DerivedChain::index_of(StateId state, StateId sibling) const {
  const auto it = std::find(pairs.begin(), pairs.end(), std::make_pair(state, sibling));
  if (it == pairs.end()) return std::nullopt;
  return static_cast<StateId>(it - pairs.begin());
}

DerivedChain derived_sibling_chain(const TabularBmdp& bmdp, const Policy& policy,
                                   std::span<const std::pair<StateId, StateId>> entry_pairs) {
  const StationaryDistribution dist = stationary_distribution(bmdp, policy);
  const MarkovChain base = induced_chain(bmdp, policy);
  const int n = bmdp.n_states();

  std::vector<SuccessorSupport> support;
  support.reserve(static_cast<std::size_t>(n));
  for (StateId i = 0; i < n; ++i) support.push_back(successor_support(bmdp, i));

  std::set<std::pair<StateId, StateId>> members;
  std::deque<std::pair<StateId, StateId>> frontier;
  auto add = [&](std::pair<StateId, StateId> p) {
    if (members.insert(p).second) frontier.push_back(p);
  };
  for (StateId i = 0; i < n; ++i) {
    for (StateId k = 0; k < n; ++k) {
      if (dist.pair_pi(i, k) > 0.0) add({i, k});
    }
  }
  for (const auto& p : entry_pairs) {
    bmdp.check_state(p.first);
    bmdp.check_state(p.second);
    add(p);
  }
  while (!frontier.empty()) {
    const auto [i, sib] = frontier.front();
    frontier.pop_front();
    const SuccessorSupport sup = support[static_cast<std::size_t>(i)];
    for (StateId j : {sup.first, sup.second}) {
      if (base.transition(i, j) > 0.0) add({j, sup.other(j)});
    }
  }

  std::vector<std::pair<StateId, StateId>> pairs(members.begin(), members.end());
  const int m = static_cast<int>(pairs.size());
  std::map<std::pair<StateId, StateId>, int> index;
  for (int s = 0; s < m; ++s) index[pairs[s]] = s;

  std::vector<std::vector<Eigen::VectorXd>> transitions(static_cast<std::size_t>(m));
  Eigen::MatrixXd rewards(m, m);
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(m));
  for (int s = 0; s < m; ++s) {
    const auto [i, sib] = pairs[s];
    Eigen::VectorXd row = Eigen::VectorXd::Zero(m);
    const SuccessorSupport sup = support[static_cast<std::size_t>(i)];
    if (sup.singleton()) {
      row(index.at({sup.first, sup.first})) = 1.0;
    } else {
      for (StateId j : {sup.first, sup.second}) {
        const double pj = base.transition(i, j);
        if (pj > 0.0) row(index.at({j, sup.other(j)})) += pj;
      }
    }
    transitions[s].push_back(std::move(row));
    for (int t = 0; t < m; ++t) rewards(s, t) = bmdp.reward(i, pairs[t].first);
    names.push_back("(" + bmdp.state_name(i) + "," + bmdp.state_name(sib) + ")");
  }
  return {TabularBmdp(bmdp.name() + "/siblings", std::move(transitions), std::move(rewards), std::move(names)),
          std::move(pairs)};
}

CompoundChain compound_chain(const TabularBmdp& bmdp, const Policy& policy) {
  const MarkovChain base = induced_chain(bmdp, policy);
  const int n = base.size();
  CompoundChain out;
  out.base_states = n;
  out.chain.transition = Eigen::MatrixXd::Zero(n * n, n * n);
  out.chain.reward = Eigen::MatrixXd::Zero(n * n, n * n);
  for (int x = 0; x < n; ++x) {
    for (int xh = 0; xh < n; ++xh) {
      const int from = out.index(x, xh);
      for (int y = 0; y < n; ++y) {
        for (int yh = 0; yh < n; ++yh) {
          const int to = out.index(y, yh);
          out.chain.transition(from, to) = base.transition(x, y) * base.transition(xh, yh);
          out.chain.reward(from, to) = base.reward(x, y) - base.reward(xh, yh);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

TabularBranches::TabularBranches(const TabularBmdp& bmdp) {
  const int n = bmdp.n_states();
  entries_.reserve(static_cast<std::size_t>(n));
  reward_bound_ = bmdp.rewards().cwiseAbs().maxCoeff();
  for (StateId i = 0; i < n; ++i) {
    Entry e{successor_support(bmdp, i), 0.0, 0.0, {}};
    e.reward_first = bmdp.reward(i, e.support.first);
    e.reward_second = bmdp.reward(i, e.support.second);
    for (ActionId a = 0; a < bmdp.num_actions(i); ++a) {
      e.prob_first.push_back(e.support.singleton() ? 1.0 : bmdp.p(i, a, e.support.first));
    }
    entries_.push_back(std::move(e));
  }
}

Behavior<StateId> policy_behavior(const Policy& policy) {
  return [policy](const StateId& s, const Branch<StateId>&, Rng& rng) -> ActionId {
    if (auto a = policy.deterministic_action(s)) return *a;
    const auto probs = policy.action_probs(s);
    const double u = rng.uniform();
    double cdf = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
      cdf += probs[a];
      if (u < cdf) return static_cast<ActionId>(a);
    }
    // Rounding left the CDF just below 1; take the last action with mass.
    for (std::size_t a = probs.size(); a-- > 0;) {
      if (probs[a] > 0.0) return static_cast<ActionId>(a);
    }
    return 0;
  };
}

Outcome<StateId> step_with_draw(const TabularBmdp& bmdp, StateId state, ActionId action, double u) {
  const SuccessorSupport sup = successor_support(bmdp, state);
  const Eigen::VectorXd& row = bmdp.transition_row(state, action);
  const double p_first = sup.singleton() ? 1.0 : row(sup.first);
  const StateId next = u < p_first ? sup.first : sup.second;
  return {next, sup.other(next), bmdp.reward(state, next)};
}

Outcome<StateId> step(const TabularBmdp& bmdp, StateId state, ActionId action, Rng& rng) {
  return step_with_draw(bmdp, state, action, rng.uniform());
}

TrajectoryStream<TabularBranches> trajectory(const TabularBmdp& bmdp, const Policy& policy, StateId start,
                                             std::int64_t length, Rng rng) {
  bmdp.check_state(start);
  return TrajectoryStream<TabularBranches>(TabularBranches(bmdp), policy_behavior(policy), start, length,
                                           std::move(rng));
}

}  // namespace tdlab
