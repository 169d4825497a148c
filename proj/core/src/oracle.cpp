#include "tdlab/oracle.hpp"

#include <algorithm>
#include <limits>

namespace tdlab {

Eigen::VectorXd weighted_rows_ls(const Eigen::MatrixXd& rows, const Eigen::VectorXd& targets,
                                 const Eigen::VectorXd& weights) {
  if (rows.rows() != targets.size() || rows.rows() != weights.size()) {
    throw std::invalid_argument("weighted_rows_ls: row, target and weight counts differ");
  }
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("weighted_rows_ls: negative weight");
  const Eigen::VectorXd root = weights.cwiseSqrt();
  const Eigen::MatrixXd a = root.asDiagonal() * rows;
  const Eigen::VectorXd b = root.cwiseProduct(targets);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() < rows.cols()) {
    throw RankDeficientError("least-squares system has rank " + std::to_string(lu.rank()) + " < " +
                             std::to_string(rows.cols()));
  }
  Eigen::VectorXd w = a.colPivHouseholderQr().solve(b);
  // One refinement pass on the normal equations, then check the gradient.
  const Eigen::MatrixXd normal = a.transpose() * a;
  const Eigen::VectorXd rhs = a.transpose() * b;
  w += normal.ldlt().solve(rhs - normal * w);
  const double scale = std::max({1.0, rhs.norm(), normal.norm() * w.norm()});
  if ((normal * w - rhs).norm() > 1e-10 * scale) {
    throw std::runtime_error("weighted_rows_ls: normal-equation residual too large");
  }
  return w;
}

Eigen::VectorXd weighted_ls_weight(const Eigen::MatrixXd& phi, const Eigen::VectorXd& target,
                                   const Eigen::VectorXd& state_weights) {
  return weighted_rows_ls(phi, target, state_weights);
}

double eta(const Eigen::MatrixXd& pair_pi, StateId i, StateId j) {
  const double mass = pair_pi(i, j) + pair_pi(j, i);
  if (!(mass > 0.0)) {
    throw std::domain_error("eta: pair (" + std::to_string(i) + ", " + std::to_string(j) + ") never occurs");
  }
  return pair_pi(i, j) / mass;
}

ChainAnalysis analyze(const TabularBmdp& bmdp, const Policy& policy, double alpha) {
  ChainAnalysis a;
  a.chain = induced_chain(bmdp, policy);
  a.dist = stationary_distribution(bmdp, policy);
  a.values = exact_value(a.chain, alpha);
  a.alpha = alpha;
  return a;
}

namespace {

Eigen::VectorXd approx_values(const TableFeatures& phi, const Eigen::VectorXd& w) {
  if (static_cast<std::size_t>(w.size()) != phi.dim()) {
    throw std::invalid_argument("oracle: weight length does not match feature dim");
  }
  return phi.matrix() * w;
}

}  // namespace

double sibling_error(const ChainAnalysis& a, const TableFeatures& phi, const Eigen::VectorXd& w) {
  const Eigen::VectorXd v = approx_values(phi, w);
  const Eigen::MatrixXd& pp = a.dist.pair_pi;
  double e = 0.0;
  for (Eigen::Index i = 0; i < pp.rows(); ++i) {
    for (Eigen::Index j = 0; j < pp.cols(); ++j) {
      if (pp(i, j) == 0.0) continue;
      const double r = v[i] - v[j] - a.values[i];
      e += pp(i, j) * r * r;
    }
  }
  return e;
}

double pair_error(const ChainAnalysis& a, const TableFeatures& phi, const Eigen::VectorXd& w, StateId i, StateId j) {
  const Eigen::VectorXd v = approx_values(phi, w);
  const Eigen::MatrixXd& pp = a.dist.pair_pi;
  const double rij = v[i] - v[j] - a.values[i];
  const double rji = v[j] - v[i] - a.values[j];
  return pp(i, j) * rij * rij + pp(j, i) * rji * rji;
}

ErrorReport error_functionals(const ChainAnalysis& a, const TableFeatures& phi, const Eigen::VectorXd& w) {
  const Eigen::VectorXd v = approx_values(phi, w);
  const Eigen::MatrixXd& pp = a.dist.pair_pi;
  const Eigen::VectorXd& J = a.values;
  const Eigen::VectorXd& pi = a.dist.pi;
  const Eigen::Index n = pp.rows();
  ErrorReport r;
  r.w = w;
  r.E = sibling_error(a, phi, w);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double diff = v[i] - v[j];
      const double mass = pp(i, j) + pp(j, i);
      if (mass > 0.0) {
        const double eij = pp(i, j) / mass;
        const double eji = pp(j, i) / mass;
        const double r1 = diff - (eij * J[i] - eji * J[j]);
        const double r2 = diff - (J[i] - J[j]);
        r.E1 += mass * r1 * r1;
        r.E2 += mass * r2 * r2;
      }
      const double rd = diff - (J[i] - J[j]);
      r.E_DT += pi[i] * pi[j] * rd * rd;
    }
  }
  return r;
}

ErrorReport error_functionals(const TabularBmdp& bmdp, const TableFeatures& phi, const Policy& policy,
                              double alpha, const Eigen::VectorXd& w) {
  ErrorReport r = error_functionals(analyze(bmdp, policy, alpha), phi, w);
  r.environment = bmdp.name();
  r.policy = policy.describe(bmdp);
  return r;
}

Eigen::VectorXd td_limit_ls(const ChainAnalysis& a, const TableFeatures& phi) {
  return weighted_ls_weight(phi.matrix(), a.values, a.dist.pi);
}

Eigen::VectorXd std_limit_ls(const ChainAnalysis& a, const TableFeatures& phi) {
  const Eigen::MatrixXd& pp = a.dist.pair_pi;
  const Eigen::MatrixXd& f = phi.matrix();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < pp.rows(); ++i) {
    for (Eigen::Index j = 0; j < pp.cols(); ++j) {
      if (pp(i, j) > 0.0) pairs.emplace_back(i, j);
    }
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(pairs.size()), f.cols());
  Eigen::VectorXd targets(rows.rows());
  Eigen::VectorXd weights(rows.rows());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto [i, j] = pairs[r];
    const auto k = static_cast<Eigen::Index>(r);
    rows.row(k) = f.row(i) - f.row(j);
    targets[k] = a.values[i];
    weights[k] = pp(i, j);
  }
  try {
    return weighted_rows_ls(rows, targets, weights);
  } catch (const RankDeficientError& e) {
    throw RankDeficientError(std::string("sibling-difference features are rank deficient: ") + e.what());
  }
}

Eigen::VectorXd dt_limit_ls(const ChainAnalysis& a, const TableFeatures& phi) {
  const Eigen::VectorXd& pi = a.dist.pi;
  const Eigen::MatrixXd& f = phi.matrix();
  const Eigen::Index n = f.rows();
  Eigen::MatrixXd rows(n * n, f.cols());
  Eigen::VectorXd targets(n * n);
  Eigen::VectorXd weights(n * n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      const Eigen::Index k = x * n + y;
      rows.row(k) = f.row(x) - f.row(y);
      targets[k] = a.values[x] - a.values[y];
      weights[k] = pi[x] * pi[y];
    }
  }
  try {
    return weighted_rows_ls(rows, targets, weights);
  } catch (const RankDeficientError& e) {
    throw RankDeficientError(std::string("state-pair difference features are rank deficient: ") + e.what());
  }
}

BoundCheck sibling_bound_check(const ChainAnalysis& a, const TableFeatures& phi, double lambda,
                                const Eigen::VectorXd& w_observed, double tolerance) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  BoundCheck c;
  c.observed = sibling_error(a, phi, w_observed);
  c.infimum = sibling_error(a, phi, std_limit_ls(a, phi));
  c.factor = (1.0 - a.alpha * lambda) / (1.0 - a.alpha);
  c.bound = c.factor * c.infimum + tolerance;
  c.pass = c.observed <= c.bound;
  return c;
}

std::vector<SignConditionEntry> sign_condition_check(const ChainAnalysis& a) {
  const Eigen::MatrixXd& pp = a.dist.pair_pi;
  std::vector<SignConditionEntry> out;
  for (StateId i = 0; i < pp.rows(); ++i) {
    for (StateId j = i + 1; j < pp.cols(); ++j) {
      if (!(pp(i, j) + pp(j, i) > 0.0)) continue;
      SignConditionEntry e;
      e.i = i;
      e.j = j;
      e.eta_ij = eta(pp, i, j);
      e.eta_ji = eta(pp, j, i);
      e.value_i = a.values[i];
      e.value_j = a.values[j];
      e.target = e.eta_ij * e.value_i - e.eta_ji * e.value_j;
      e.true_difference = e.value_i - e.value_j;
      if (e.eta_ij > e.eta_ji) {
        e.preferred = i;
        e.condition_holds = e.target > 0.0;
      } else if (e.eta_ji > e.eta_ij) {
        e.preferred = j;
        e.condition_holds = e.target < 0.0;
      }
      auto sgn = [](double x) { return (x > 0.0) - (x < 0.0); };
      e.sign_correct = sgn(e.target) == sgn(e.true_difference);
      out.push_back(e);
    }
  }
  return out;
}

std::int64_t rollout_horizon(double alpha, double reward_bound, double epsilon) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (reward_bound <= 0.0) return 0;
  if (alpha == 0.0) return 1;
  const double tail = reward_bound / (1.0 - alpha);
  if (tail < epsilon) return 0;
  auto t = static_cast<std::int64_t>(std::ceil(std::log(epsilon / tail) / std::log(alpha)));
  while (std::pow(alpha, static_cast<double>(t)) * tail >= epsilon) ++t;
  while (t > 0 && std::pow(alpha, static_cast<double>(t - 1)) * tail < epsilon) --t;
  return t;
}

double rollout_error_metric(const Eigen::VectorXd& approx, const Eigen::VectorXd& estimates) {
  if (approx.size() != estimates.size() || approx.size() == 0) {
    throw std::invalid_argument("rollout_error_metric: need equal, non-empty samples");
  }
  return (approx - estimates).squaredNorm() / static_cast<double>(approx.size());
}

std::pair<double, double> two_state_closed_form(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
  const double jb = (0.8 - 0.16 * alpha) / (1.0 - alpha);
  return {jb - 0.8, jb};
}

}  // namespace tdlab
