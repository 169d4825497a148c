#include "tdlab/approx.hpp"

namespace tdlab {

TableFeatures::TableFeatures(const Eigen::MatrixXd& phi) : dim_(static_cast<std::size_t>(phi.cols())), matrix_(phi) {
  if (phi.rows() == 0 || phi.cols() == 0) throw std::invalid_argument("TableFeatures: empty feature matrix");
  if (!phi.allFinite()) throw std::invalid_argument("TableFeatures: non-finite feature entries");
  rows_.reserve(static_cast<std::size_t>(phi.rows()));
  for (Eigen::Index i = 0; i < phi.rows(); ++i) rows_.emplace_back(phi.row(i).transpose());
}

bool full_rank_check(const Eigen::MatrixXd& phi) {
  if (phi.cols() == 0) return false;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(phi);
  lu.setThreshold(1e-10);
  return lu.rank() == phi.cols();
}

std::string to_string(GreedyMode mode) {
  return mode == GreedyMode::successor_preference ? "successor-preference" : "expected-backup";
}

GreedyMode parse_greedy_mode(std::string_view text) {
  if (text == "successor-preference") return GreedyMode::successor_preference;
  if (text == "expected-backup") return GreedyMode::expected_backup;
  throw std::invalid_argument("unknown greedy mode '" + std::string(text) + "'");
}

Policy greedy_policy(const TabularBmdp& bmdp, const Eigen::VectorXd& w, const TableFeatures& phi, GreedyMode mode,
                     double alpha) {
  if (phi.n_states() != bmdp.n_states()) throw std::invalid_argument("greedy_policy: feature table size mismatch");
  if (static_cast<std::size_t>(w.size()) != phi.dim()) throw std::invalid_argument("greedy_policy: weight length mismatch");
  const TabularBranches branches(bmdp);
  std::vector<ActionId> actions(static_cast<std::size_t>(bmdp.n_states()));
  for (StateId i = 0; i < bmdp.n_states(); ++i) {
    const Branch<StateId> br = branches.branch(i);
    actions[i] = lookahead_action(br, detail::dot(w, phi(br.first)), detail::dot(w, phi(br.second)), mode, alpha);
  }
  return Policy::fixed(bmdp, std::move(actions));
}

}  // namespace tdlab
