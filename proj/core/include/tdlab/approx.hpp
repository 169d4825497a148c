#pragma once

#include <concepts>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tdlab/bmdp.hpp"

namespace tdlab {

/// Anything that maps a state to an indexable feature vector of fixed length.
template <class F, class State>
concept FeatureMapFor = requires(const F& f, const State& s) {
  { f.dim() } -> std::convertible_to<std::size_t>;
  { f(s)[0] } -> std::convertible_to<double>;
};

/// Feature table Phi for tabular states: row i is phi(i).
class TableFeatures {
 public:
  explicit TableFeatures(const Eigen::MatrixXd& phi);

  std::size_t dim() const { return dim_; }
  const Eigen::VectorXd& operator()(StateId i) const { return rows_.at(static_cast<std::size_t>(i)); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  int n_states() const { return static_cast<int>(rows_.size()); }

 private:
  std::size_t dim_;
  Eigen::MatrixXd matrix_;
  std::vector<Eigen::VectorXd> rows_;
};

/// Type-erased feature map for arbitrary state types.
template <class State>
class FeatureMap {
 public:
  FeatureMap(std::size_t dim, std::function<Eigen::VectorXd(const State&)> phi)
      : dim_(dim), phi_(std::move(phi)) {}

  std::size_t dim() const { return dim_; }
  Eigen::VectorXd operator()(const State& s) const {
    Eigen::VectorXd v = phi_(s);
    if (static_cast<std::size_t>(v.size()) != dim_) {
      throw std::length_error("feature map returned length " + std::to_string(v.size()) + ", expected " +
                              std::to_string(dim_));
    }
    return v;
  }

 private:
  std::size_t dim_;
  std::function<Eigen::VectorXd(const State&)> phi_;
};

namespace detail {

// Plain index-order loops. The learners rely on these exact summation orders
// so that sibling-difference updates replay bit-for-bit as TD on the derived
// pair chain.
template <class A>
double dot(const Eigen::VectorXd& w, const A& a) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) acc += w[k] * a[k];
  return acc;
}

template <class A, class B>
double dot_diff(const Eigen::VectorXd& w, const A& a, const B& b) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) acc += w[k] * (a[k] - b[k]);
  return acc;
}

}  // namespace detail

/// Linear approximate value w . phi(state).
template <class State, FeatureMapFor<State> F>
double value(const Eigen::VectorXd& w, const State& state, const F& phi) {
  if (static_cast<std::size_t>(w.size()) != phi.dim()) {
    throw std::invalid_argument("value: weight length " + std::to_string(w.size()) + " != feature dim " +
                                std::to_string(phi.dim()));
  }
  return detail::dot(w, phi(state));
}

/// True iff Phi has full column rank (pivoted elimination, threshold 1e-10).
bool full_rank_check(const Eigen::MatrixXd& phi);

enum class GreedyMode { successor_preference, expected_backup };

std::string to_string(GreedyMode mode);
GreedyMode parse_greedy_mode(std::string_view text);

/// One-step lookahead over a branch given successor values.
/// successor_preference: maximise the probability of reaching the higher
/// valued successor. expected_backup: maximise p[r + alpha v]. Ties go to
/// the lowest action index.
template <class State>
ActionId lookahead_action(const Branch<State>& br, double v_first, double v_second, GreedyMode mode,
                          double alpha) {
  const int k = br.num_actions();
  if (mode == GreedyMode::successor_preference) {
    if (v_first == v_second) return 0;
    const bool want_first = v_first > v_second;
    ActionId best = 0;
    double best_p = want_first ? br.prob_first[0] : 1.0 - br.prob_first[0];
    for (ActionId a = 1; a < k; ++a) {
      const double p = want_first ? br.prob_first[a] : 1.0 - br.prob_first[a];
      if (p > best_p) {
        best = a;
        best_p = p;
      }
    }
    return best;
  }
  const double q_first = br.reward_first + alpha * v_first;
  const double q_second = br.reward_second + alpha * v_second;
  ActionId best = 0;
  double best_q = br.prob_first[0] * q_first + (1.0 - br.prob_first[0]) * q_second;
  for (ActionId a = 1; a < k; ++a) {
    const double q = br.prob_first[a] * q_first + (1.0 - br.prob_first[a]) * q_second;
    if (q > best_q) {
      best = a;
      best_q = q;
    }
  }
  return best;
}

/// Lookahead behavior driven by a fixed state score (e.g. a frozen J~ or a
/// hand-coded evaluation function).
template <class State>
Behavior<State> preference_behavior(std::function<double(const State&)> score,
                                    GreedyMode mode = GreedyMode::successor_preference, double alpha = 0.0) {
  return [score = std::move(score), mode, alpha](const State&, const Branch<State>& br, Rng&) {
    return lookahead_action(br, score(br.first), score(br.second), mode, alpha);
  };
}

/// Lookahead behavior on J~(., w) for a weight vector snapshot or a live
/// reference (`weights` must outlive the behavior in the latter case).
template <class State, FeatureMapFor<State> F>
Behavior<State> greedy_behavior(const Eigen::VectorXd* weights, F phi, GreedyMode mode, double alpha) {
  return [weights, phi = std::move(phi), mode, alpha](const State&, const Branch<State>& br, Rng&) {
    return lookahead_action(br, detail::dot(*weights, phi(br.first)), detail::dot(*weights, phi(br.second)), mode,
                            alpha);
  };
}

/// Deterministic greedy policy over a tabular BMDP.
Policy greedy_policy(const TabularBmdp& bmdp, const Eigen::VectorXd& w, const TableFeatures& phi,
                     GreedyMode mode = GreedyMode::successor_preference, double alpha = 0.0);

}  // namespace tdlab
