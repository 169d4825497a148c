#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "golden.hpp"
#include "random_bmdp.hpp"
#include "reference.hpp"
#include "tdlab/environments.hpp"
#include "tdlab/oracle.hpp"

using namespace tdlab;
using tdlab::testing::golden_section_min;
using tdlab::testing::golden_section_min_refined;
using tdlab::testing::random_case;
using tdlab::testing::uniform_in;

namespace {

Eigen::VectorXd scalar(double x) { return Eigen::VectorXd::Constant(1, x); }

Eigen::VectorXd random_w(Rng& rng, std::size_t d) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = uniform_in(rng, -5, 5);
  return w;
}

// The weighted-target form summed over unordered pairs, omitting the terms
// that do not depend on w.
double weighted_target_form(const ChainAnalysis& a, const TableFeatures& phi, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd& pp = a.dist.pair_pi;
  const Eigen::VectorXd v = phi.matrix() * w;
  double e = 0.0;
  for (Eigen::Index i = 0; i < pp.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pp.cols(); ++j) {
      const double m = pp(i, j) + pp(j, i);
      if (m <= 0.0) continue;
      const double t = (pp(i, j) * a.values[i] - pp(j, i) * a.values[j]) / m;
      const double r = v[i] - v[j] - t;
      e += m * r * r;
    }
  }
  return e;
}

}  // namespace

// ----------------------------------------------------------------------------
// weighted least squares

TEST(WeightedLs, TwoStateTdLimit) {
  const auto two = two_state_system();
  Eigen::VectorXd d(2), j(2);
  d << 0.2, 0.8;
  j << 0.64, 1.44;
  EXPECT_NEAR(weighted_ls_weight(two.features.matrix(), j, d)[0], 0.88, 1e-12);
}

TEST(WeightedLs, RepresentableTargetRecovered) {
  Rng rng(9);
  for (int c = 0; c < 100; ++c) {
    const int n = 6;
    const int dim = 1 + c % 4;
    const Eigen::MatrixXd phi = tdlab::testing::random_features(rng, n, dim);
    const Eigen::VectorXd w0 = random_w(rng, static_cast<std::size_t>(dim));
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = uniform_in(rng, 0.01, 1.0);
    const Eigen::VectorXd w = weighted_ls_weight(phi, phi * w0, d);
    ASSERT_LT((w - w0).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(WeightedLs, ResidualGradientVanishes) {
  Rng rng(10);
  for (int c = 0; c < 100; ++c) {
    const Eigen::MatrixXd phi = tdlab::testing::random_features(rng, 5, 2);
    Eigen::VectorXd d(5), j(5);
    for (int i = 0; i < 5; ++i) {
      d[i] = uniform_in(rng, 0.01, 1.0);
      j[i] = uniform_in(rng, -10, 10);
    }
    const Eigen::VectorXd w = weighted_ls_weight(phi, j, d);
    const Eigen::VectorXd grad = phi.transpose() * d.asDiagonal() * (phi * w - j);
    ASSERT_LT(grad.norm(), 1e-10);
  }
}

TEST(WeightedLs, RankDeficiency) {
  Eigen::MatrixXd dup(3, 2);
  dup << 1, 1, 2, 2, 3, 3;
  EXPECT_THROW(weighted_ls_weight(dup, Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3)), RankDeficientError);
  // Full-rank features can still be rank deficient where the weights vanish.
  Eigen::MatrixXd phi(2, 2);
  phi << 1, 0, 0, 1;
  Eigen::VectorXd d(2);
  d << 1.0, 0.0;
  EXPECT_THROW(weighted_ls_weight(phi, Eigen::VectorXd::Ones(2), d), RankDeficientError);
}

// ----------------------------------------------------------------------------
// eta

TEST(Eta, Examples) {
  const auto two = two_state_system();
  const StationaryDistribution d = stationary_distribution(two.bmdp, two.optimal_policy);
  EXPECT_NEAR(eta(d.pair_pi, 0, 1), 0.2, 1e-12);
  EXPECT_NEAR(eta(d.pair_pi, 1, 0), 0.8, 1e-12);
  Eigen::MatrixXd sym(2, 2);
  sym << 0.0, 0.3, 0.3, 0.0;
  EXPECT_EQ(eta(sym, 0, 1), 0.5);
  EXPECT_THROW(eta(Eigen::MatrixXd::Zero(2, 2), 0, 1), std::domain_error);
}

TEST(EtaProperty, PairsSumToOne) {
  Rng rng(11);
  int checked = 0;
  for (int c = 0; c < 200; ++c) {
    const auto rc = random_case(rng);
    const StationaryDistribution d = stationary_distribution(rc.bmdp, rc.policy);
    for (int i = 0; i < rc.bmdp.n_states(); ++i) {
      for (int j = 0; j < rc.bmdp.n_states(); ++j) {
        if (d.pair_pi(i, j) + d.pair_pi(j, i) <= 0.0) continue;
        const double s = eta(d.pair_pi, i, j) + eta(d.pair_pi, j, i);
        ASSERT_NEAR(s, 1.0, 1e-15);
        ++checked;
      }
    }
  }
  EXPECT_GE(checked, 100);
}

// ----------------------------------------------------------------------------
// Error functionals

TEST(ErrorFunctionals, TwoStateStdLimit) {
  const auto two = two_state_system();
  const ChainAnalysis a = analyze(two.bmdp, two.optimal_policy, 0.5);
  const Eigen::VectorXd w = std_limit_ls(a, two.features);
  EXPECT_NEAR(w[0], -1.024, 1e-12);
  // E(w) = 0.2 (w - 0.64)^2 + 0.8 (-w - 1.44)^2 has zero slope at -1.024.
  const double slope = 0.4 * (w[0] - 0.64) + 1.6 * (w[0] + 1.44);
  EXPECT_NEAR(slope, 0.0, 1e-9);
  const double e = sibling_error(a, two.features, w);
  EXPECT_NEAR(e, 0.2 * std::pow(-1.024 - 0.64, 2) + 0.8 * std::pow(1.024 - 1.44, 2), 1e-12);
}

TEST(ErrorFunctionals, PerfectWeightedFitZeroesE1) {
  // One unordered pair; a feature equal to the weighted target makes E1 = 0.
  const auto two = two_state_system();
  const ChainAnalysis a = analyze(two.bmdp, two.optimal_policy, 0.5);
  const double target = 0.2 * 0.64 - 0.8 * 1.44;
  const Eigen::VectorXd w = scalar(target);  // phi(A) - phi(B) = 1
  EXPECT_NEAR(error_functionals(a, two.features, w).E1, 0.0, 1e-20);
}

TEST(ErrorFunctionalsProperty, DecompositionAndPairSum) {
  Rng rng(12);
  for (int c = 0; c < 200; ++c) {
    const auto rc = random_case(rng);
    const ChainAnalysis a = analyze(rc.bmdp, rc.policy, rc.alpha);
    const Eigen::VectorXd w1 = random_w(rng, rc.features.dim());
    const Eigen::VectorXd w2 = random_w(rng, rc.features.dim());
    const ErrorReport r1 = error_functionals(a, rc.features, w1);
    const ErrorReport r2 = error_functionals(a, rc.features, w2);
    const double dE = r1.E - r2.E;
    const double dF = weighted_target_form(a, rc.features, w1) - weighted_target_form(a, rc.features, w2);
    const double scale = 1.0 + std::abs(r1.E) + std::abs(r2.E);
    ASSERT_NEAR(dE, dF, 1e-9 * scale);
    ASSERT_NEAR(dE, 0.5 * (r1.E1 - r2.E1), 1e-9 * scale);

    // E equals the sum of per-pair contributions, each unordered pair once
    // plus the diagonal pairs.
    double total = 0.0;
    const Eigen::VectorXd v = rc.features.matrix() * w1;
    for (int i = 0; i < rc.bmdp.n_states(); ++i) {
      total += a.dist.pair_pi(i, i) * a.values[i] * a.values[i];
      for (int j = i + 1; j < rc.bmdp.n_states(); ++j) total += pair_error(a, rc.features, w1, i, j);
    }
    ASSERT_NEAR(r1.E, total, 1e-9 * scale);
    double direct = 0.0;
    for (int i = 0; i < rc.bmdp.n_states(); ++i) {
      for (int j = 0; j < rc.bmdp.n_states(); ++j) {
        const double r = v[i] - v[j] - a.values[i];
        direct += a.dist.pair_pi(i, j) * r * r;
      }
    }
    ASSERT_NEAR(r1.E, direct, 1e-9 * scale);
  }
}

TEST(ErrorFunctionalsProperty, StdLimitIsStationary) {
  Rng rng(13);
  int solved = 0;
  for (int c = 0; c < 300 && solved < 100; ++c) {
    const auto rc = random_case(rng);
    const ChainAnalysis a = analyze(rc.bmdp, rc.policy, rc.alpha);
    Eigen::VectorXd w;
    try {
      w = std_limit_ls(a, rc.features);
    } catch (const RankDeficientError&) {
      continue;
    }
    ++solved;
    // Gradient of E at w via exact central differences of a quadratic.
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      Eigen::VectorXd up = w, down = w;
      up[k] += 1.0;
      down[k] -= 1.0;
      const double g = (sibling_error(a, rc.features, up) - sibling_error(a, rc.features, down)) / 2.0;
      ASSERT_NEAR(g, 0.0, 1e-9 * (1.0 + sibling_error(a, rc.features, up)));
    }
    const BoundCheck b = sibling_bound_check(a, rc.features, 1.0, w);
    ASSERT_TRUE(b.pass);
    ASSERT_LT(std::abs(b.observed - b.infimum), 1e-9 * (1.0 + b.infimum));
  }
  EXPECT_GE(solved, 100);
}

TEST(ErrorFunctionals, CoinTossTargetsAreHalfTheTrueDifferences) {
  // Uniform actions give eta = 1/2 on the two-state pair: the weighted
  // targets are half the true differences, so argmin E2 = 2 argmin E1, and
  // the doubled-reward form shares E2's minimiser.
  const auto two = two_state_system();
  const ChainAnalysis a = analyze(two.bmdp, Policy::uniform(two.bmdp), 0.5);
  EXPECT_NEAR(eta(a.dist.pair_pi, 0, 1), 0.5, 1e-12);
  auto e1 = [&](double w) { return error_functionals(a, two.features, scalar(w)).E1; };
  auto e2 = [&](double w) { return error_functionals(a, two.features, scalar(w)).E2; };
  const double m1 = golden_section_min(e1, -10, 10);
  const double m2 = golden_section_min(e2, -10, 10);
  EXPECT_NEAR(m2, 2.0 * m1, 1e-6);
  const auto doubled = two_state_system_scaled(0.5, 2.0);
  const ChainAnalysis a2 = analyze(doubled.bmdp, Policy::uniform(doubled.bmdp), 0.5);
  auto e1_doubled = [&](double w) { return error_functionals(a2, two.features, scalar(w)).E1; };
  EXPECT_NEAR(golden_section_min(e1_doubled, -10, 10), m2, 1e-6);
  EXPECT_NEAR(std_limit_ls(a2, two.features)[0], m2, 1e-6);
}

// ----------------------------------------------------------------------------
// Limits against hand-derived values and brute force

TEST(Limits, TwoStateClosedForms) {
  for (double alpha : {0.0, 0.3, 0.5, 0.9}) {
    const auto two = two_state_system(alpha);
    const tdlab::testing::TwoState ref{alpha};
    const ChainAnalysis a = analyze(two.bmdp, two.optimal_policy, alpha);
    EXPECT_NEAR(td_limit_ls(a, two.features)[0], ref.td_limit(), 1e-10);
    EXPECT_NEAR(std_limit_ls(a, two.features)[0], ref.std_limit(), 1e-10);
  }
}

TEST(Limits, CounterexampleSignsAndBruteForce) {
  for (double alpha : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const auto sys = dt_counterexample_system(alpha);
    const tdlab::testing::Counterexample ref{alpha};
    const ChainAnalysis a = analyze(sys.bmdp, sys.optimal_policy, alpha);
    const double ws = std_limit_ls(a, sys.features)[0];
    const double wd = dt_limit_ls(a, sys.features)[0];
    EXPECT_NEAR(ws, ref.std_limit_formula(), 1e-6 * (1.0 + ref.std_limit_formula()));
    EXPECT_GT(ws, 0.0);
    EXPECT_LT(wd, 0.0);
    EXPECT_NEAR(ws, golden_section_min_refined([&](double w) { return ref.sibling_error(w); }, -100, 100), 1e-8);
    EXPECT_NEAR(wd, golden_section_min_refined([&](double w) { return ref.product_error(w); }, -100, 100), 1e-8);
    EXPECT_NEAR(sibling_error(a, sys.features, scalar(0.7)), ref.sibling_error(0.7), 1e-10);
    EXPECT_NEAR(error_functionals(a, sys.features, scalar(0.7)).E_DT, ref.product_error(0.7), 1e-10);
  }
}

TEST(Limits, DtZeroErrorWhenDifferencesRepresentable) {
  // Features equal to J make every value difference exact.
  const auto three = three_state_system();
  const ChainAnalysis a = analyze(three.bmdp, three.optimal_policy, three.alpha);
  const TableFeatures exact(Eigen::MatrixXd(a.values));
  const Eigen::VectorXd w = dt_limit_ls(a, exact);
  EXPECT_NEAR(w[0], 1.0, 1e-9);
  EXPECT_NEAR(error_functionals(a, exact, w).E_DT, 0.0, 1e-12);
}

TEST(Limits, StdRankDeficientWhenSiblingsCoincide) {
  Eigen::VectorXd to1 = Eigen::VectorXd::Unit(2, 1), to0 = Eigen::VectorXd::Unit(2, 0);
  TabularBmdp ring("ring", {{to1}, {to0}}, Eigen::MatrixXd::Ones(2, 2));
  const ChainAnalysis a = analyze(ring, Policy::uniform(ring), 0.5);
  Eigen::MatrixXd phi(2, 1);
  phi << 1.0, 2.0;
  EXPECT_THROW(std_limit_ls(a, TableFeatures(phi)), RankDeficientError);
  EXPECT_NO_THROW(td_limit_ls(a, TableFeatures(phi)));
}

// ----------------------------------------------------------------------------
// Bound and sign condition

TEST(Bound, FactorAlgebra) {
  const auto two = two_state_system();
  const ChainAnalysis a = analyze(two.bmdp, two.optimal_policy, 0.5);
  const Eigen::VectorXd ws = std_limit_ls(a, two.features);
  const BoundCheck one = sibling_bound_check(a, two.features, 1.0, ws);
  EXPECT_EQ(one.factor, 1.0);
  EXPECT_TRUE(one.pass);
  EXPECT_LT(std::abs(one.observed - one.infimum), 1e-9);
  const BoundCheck half = sibling_bound_check(a, two.features, 0.5, ws);
  EXPECT_DOUBLE_EQ(half.factor, 1.5);
  EXPECT_FALSE(sibling_bound_check(a, two.features, 1.0, scalar(0.88)).pass);
  EXPECT_TRUE(sibling_bound_check(a, two.features, 0.0, scalar(ws[0] + 0.1)).pass);
}

TEST(SignCondition, CorrectPolicyHolds) {
  const auto two = two_state_system();
  const auto entries = sign_condition_check(analyze(two.bmdp, two.optimal_policy, 0.5));
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].preferred, 1);
  EXPECT_TRUE(entries[0].condition_holds);
  EXPECT_FALSE(entries[0].flagged());
}

TEST(SignCondition, CoinTossIsHalfTheDifference) {
  const auto two = two_state_system(0.9);
  const auto entries = sign_condition_check(analyze(two.bmdp, Policy::uniform(two.bmdp), 0.9));
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_FALSE(entries[0].preferred.has_value());
  EXPECT_NEAR(entries[0].target, 0.5 * entries[0].true_difference, 1e-12);
  EXPECT_TRUE(entries[0].sign_correct);
}

TEST(SignCondition, StrongWrongPreferenceFlagged) {
  // Always a1 at alpha = 0.9: A is preferred 4:1 though J(B) - J(A) = 0.2.
  const auto two = two_state_system(0.9);
  const auto entries = sign_condition_check(analyze(two.bmdp, Policy::constant_action(two.bmdp, 0), 0.9));
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].preferred, 0);
  EXPECT_NEAR(entries[0].true_difference, -0.2, 1e-12);
  EXPECT_NEAR(entries[0].target, 0.8 * 0.36 - 0.2 * 0.56, 1e-12);
  EXPECT_TRUE(entries[0].flagged());
}

// ----------------------------------------------------------------------------
// Rollouts

TEST(Rollout, Horizon) {
  EXPECT_EQ(rollout_horizon(0.5, 0.0, 1e-3), 0);
  const std::int64_t t = rollout_horizon(0.95, 4.0, 1e-4);
  EXPECT_LT(std::pow(0.95, static_cast<double>(t)) * 80.0, 1e-4);
  EXPECT_GE(std::pow(0.95, static_cast<double>(t - 1)) * 80.0, 1e-4);
  EXPECT_THROW(rollout_horizon(1.0, 1.0, 1e-3), std::invalid_argument);
}

TEST(Rollout, WithinThreeStandardErrors) {
  for (const char* name : {"two-state", "three-state", "dt-counterexample"}) {
    const auto sys = std::get<TabularSystem>(make_environment(name));
    const Eigen::VectorXd j = exact_value(sys.bmdp, sys.optimal_policy, sys.alpha);
    Rng rng(17);
    for (StateId s = 0; s < sys.bmdp.n_states(); ++s) {
      const RolloutEstimate e = rollout_estimate(sys.branches(), policy_behavior(sys.optimal_policy), s, 1000,
                                                 sys.alpha, 1e-4, rng);
      EXPECT_NEAR(e.mean, j(s), 3.0 * e.standard_error + 1e-4) << name << " state " << s;
    }
  }
}

TEST(Rollout, ZeroRewardIsExactlyZero) {
  const auto zero = two_state_system_scaled(0.5, 0.0);
  Rng rng(1);
  const RolloutEstimate e = rollout_estimate(zero.branches(), policy_behavior(zero.optimal_policy), 0, 50, 0.5,
                                             1e-6, rng);
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.standard_error, 0.0);
}

TEST(Rollout, StandardErrorShrinksWithSqrtN) {
  const auto three = three_state_system();
  const auto behavior = policy_behavior(Policy::uniform(three.bmdp));
  double ratio_sum = 0.0;
  const int reps = 8;
  for (int r = 0; r < reps; ++r) {
    Rng a(100 + r), b(200 + r);
    const RolloutEstimate small = rollout_estimate(three.branches(), behavior, 0, 400, 0.9, 1e-3, a);
    const RolloutEstimate big = rollout_estimate(three.branches(), behavior, 0, 1200, 0.9, 1e-3, b);
    ratio_sum += small.standard_error / big.standard_error;
  }
  EXPECT_NEAR(ratio_sum / reps, std::sqrt(3.0), 0.15);
}

TEST(Rollout, ErrorMetric) {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  b << 1, 0, 6;
  EXPECT_DOUBLE_EQ(rollout_error_metric(a, b), (0.0 + 4.0 + 9.0) / 3.0);
  EXPECT_THROW(rollout_error_metric(a, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST(ClosedForm, TwoState) {
  const auto [a0, b0] = two_state_closed_form(0.0);
  EXPECT_NEAR(a0, 0.0, 1e-15);
  EXPECT_NEAR(b0, 0.8, 1e-15);
  const auto [a5, b5] = two_state_closed_form(0.5);
  EXPECT_NEAR(a5, 0.64, 1e-12);
  EXPECT_NEAR(b5, 1.44, 1e-12);
}
