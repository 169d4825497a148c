#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tdlab/approx.hpp"
#include "tdlab/bmdp.hpp"
#include "tdlab/rng.hpp"

namespace tdlab {

class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimises sum_r c_r (w . F_r - y_r)^2 over rows r. Throws
/// RankDeficientError when the weighted rows do not span the weight space.
Eigen::VectorXd weighted_rows_ls(const Eigen::MatrixXd& rows, const Eigen::VectorXd& targets,
                                 const Eigen::VectorXd& weights);

/// argmin_w sum_i D(i) (w . phi(i) - J(i))^2.
Eigen::VectorXd weighted_ls_weight(const Eigen::MatrixXd& phi, const Eigen::VectorXd& target,
                                   const Eigen::VectorXd& state_weights);

/// pi(i, j) / (pi(i, j) + pi(j, i)). Throws std::domain_error when both
/// masses are zero.
double eta(const Eigen::MatrixXd& pair_pi, StateId i, StateId j);

/// Everything the analytic oracles need about a policy chain.
struct ChainAnalysis {
  MarkovChain chain;
  StationaryDistribution dist;
  Eigen::VectorXd values;
  double alpha = 0.0;
};

ChainAnalysis analyze(const TabularBmdp& bmdp, const Policy& policy, double alpha);

struct ErrorReport {
  double E = 0.0;
  double E1 = 0.0;
  double E2 = 0.0;
  double E_DT = 0.0;
  Eigen::VectorXd w;
  std::string environment;
  std::string policy;
};

/// Sibling-pair error E(w) = sum pi(i,j) [J~i - J~j - J(i)]^2, the weighted
/// form E1 against eta(i,j) J(i) - eta(j,i) J(j), the true-difference form
/// E2, and the product-distribution error minimised by DT.
ErrorReport error_functionals(const TabularBmdp& bmdp, const TableFeatures& phi, const Policy& policy,
                              double alpha, const Eigen::VectorXd& w);
ErrorReport error_functionals(const ChainAnalysis& a, const TableFeatures& phi, const Eigen::VectorXd& w);

/// E(w) alone.
double sibling_error(const ChainAnalysis& a, const TableFeatures& phi, const Eigen::VectorXd& w);

/// Contribution of the unordered pair {i, j}:
/// pi(i,j)[J~i - J~j - J(i)]^2 + pi(j,i)[J~j - J~i - J(j)]^2.
double pair_error(const ChainAnalysis& a, const TableFeatures& phi, const Eigen::VectorXd& w, StateId i, StateId j);

/// TD(1) limit: weighted least squares against J under pi.
Eigen::VectorXd td_limit_ls(const ChainAnalysis& a, const TableFeatures& phi);
/// STD(1) limit: argmin E(w) over sibling-difference features.
Eigen::VectorXd std_limit_ls(const ChainAnalysis& a, const TableFeatures& phi);
/// DT(1) limit: argmin of the product-distribution error.
Eigen::VectorXd dt_limit_ls(const ChainAnalysis& a, const TableFeatures& phi);

struct BoundCheck {
  double observed = 0.0;  // E(w_observed)
  double infimum = 0.0;   // E at the STD(1) limit
  double factor = 1.0;    // (1 - alpha lambda) / (1 - alpha)
  double bound = 0.0;     // factor * infimum + tolerance
  bool pass = false;
  double margin() const { return bound - observed; }
};

BoundCheck sibling_bound_check(const ChainAnalysis& a, const TableFeatures& phi, double lambda,
                                const Eigen::VectorXd& w_observed, double tolerance = 1e-6);

struct SignConditionEntry {
  StateId i = 0;
  StateId j = 0;
  double eta_ij = 0.0;
  double eta_ji = 0.0;
  double value_i = 0.0;
  double value_j = 0.0;
  /// The state the policy is more likely to reach, if any.
  std::optional<StateId> preferred;
  double target = 0.0;           // eta_ij J(i) - eta_ji J(j)
  double true_difference = 0.0;  // J(i) - J(j)
  /// Ratio condition for the preferred state; true when there is no preference.
  bool condition_holds = true;
  bool sign_correct = true;
  bool flagged() const { return !sign_correct; }
};

/// One entry per unordered sibling pair i < j with positive pair mass.
std::vector<SignConditionEntry> sign_condition_check(const ChainAnalysis& a);

struct RolloutEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::int64_t horizon = 0;
  std::int64_t rollouts = 0;
};

/// Smallest T with alpha^T g_max / (1 - alpha) < epsilon (0 when g_max = 0).
std::int64_t rollout_horizon(double alpha, double reward_bound, double epsilon);

/// Mean of truncated discounted returns from `state` under `behavior`.
template <SiblingEnvironment Env>
RolloutEstimate rollout_estimate(const Env& env, const Behavior<typename Env::State>& behavior,
                                 const typename Env::State& state, std::int64_t n_rollouts, double alpha,
                                 double epsilon, Rng& rng) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("rollout_estimate: epsilon must be positive");
  if (n_rollouts < 1) throw std::invalid_argument("rollout_estimate: need at least one rollout");
  const std::int64_t horizon = rollout_horizon(alpha, env.reward_bound(), epsilon);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::int64_t r = 0; r < n_rollouts; ++r) {
    typename Env::State x = state;
    double ret = 0.0;
    double discount = 1.0;
    for (std::int64_t t = 0; t < horizon; ++t) {
      const Branch<typename Env::State> br = env.branch(x);
      const Outcome<typename Env::State> o = resolve(br, behavior(x, br, rng), rng.uniform());
      ret += discount * o.reward;
      discount *= alpha;
      x = o.next;
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double n = static_cast<double>(n_rollouts);
  RolloutEstimate est{sum / n, 0.0, horizon, n_rollouts};
  if (n_rollouts > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
    est.standard_error = std::sqrt(var / n);
  }
  return est;
}

/// Rollout estimates averaged over states the behavior itself visits:
/// `samples` states taken every `spacing` steps after `burn_in` steps from
/// `start`. The standard error is across sampled states.
template <SiblingEnvironment Env>
RolloutEstimate on_policy_rollout_average(const Env& env, const Behavior<typename Env::State>& behavior,
                                          typename Env::State start, std::int64_t burn_in, std::int64_t samples,
                                          std::int64_t spacing, std::int64_t rollouts_per_state, double alpha,
                                          double epsilon, Rng& rng) {
  if (samples < 1 || spacing < 1 || burn_in < 0) throw std::invalid_argument("on_policy_rollout_average: bad sampling");
  auto advance = [&](std::int64_t k) {
    for (std::int64_t t = 0; t < k; ++t) {
      const Branch<typename Env::State> br = env.branch(start);
      start = resolve(br, behavior(start, br, rng), rng.uniform()).next;
    }
  };
  advance(burn_in);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t horizon = 0;
  for (std::int64_t k = 0; k < samples; ++k) {
    const RolloutEstimate e = rollout_estimate(env, behavior, start, rollouts_per_state, alpha, epsilon, rng);
    horizon = e.horizon;
    sum += e.mean;
    sum_sq += e.mean * e.mean;
    advance(spacing);
  }
  const double n = static_cast<double>(samples);
  RolloutEstimate out{sum / n, 0.0, horizon, samples * rollouts_per_state};
  if (samples > 1) out.standard_error = std::sqrt(std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1.0)) / n);
  return out;
}

/// (1/n) sum_x (J~(x) - J^(x))^2 over a sample of states.
double rollout_error_metric(const Eigen::VectorXd& approx, const Eigen::VectorXd& estimates);

/// Values of the two-state system under the optimal policy, (J(A), J(B)).
std::pair<double, double> two_state_closed_form(double alpha);

}  // namespace tdlab
