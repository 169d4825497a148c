#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "random_bmdp.hpp"
#include "tdlab/environments.hpp"
#include "tdlab/learners.hpp"

using namespace tdlab;
using tdlab::testing::random_case;
using tdlab::testing::uniform_in;
using tdlab::testing::uniform_int;

namespace {

constexpr StateId A = 0;
constexpr StateId B = 1;

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

LearnerConfig cfg_const(double alpha, double lambda, double gamma, LearnerVariant v = LearnerVariant::std) {
  LearnerConfig c;
  c.alpha = alpha;
  c.lambda = lambda;
  c.schedule = StepSchedule::constant(gamma);
  c.variant = v;
  return c;
}

// J~(x, w) = (w . phi(x))^2 with its analytic gradient.
struct QuadraticValue {
  const TableFeatures* phi;
  std::size_t dim() const { return phi->dim(); }
  double value(StateId s, const Eigen::VectorXd& w) const {
    const double u = w.dot((*phi)(s));
    return u * u;
  }
  Eigen::VectorXd gradient(StateId s, const Eigen::VectorXd& w) const {
    return 2.0 * w.dot((*phi)(s)) * (*phi)(s);
  }
};

Eigen::VectorXd finite_difference_gradient(const QuadraticValue& f, StateId s, const Eigen::VectorXd& w) {
  Eigen::VectorXd g(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const double h = 1e-6 * (1.0 + std::abs(w[k]));
    Eigen::VectorXd up = w, down = w;
    up[k] += h;
    down[k] -= h;
    g[k] = (f.value(s, up) - f.value(s, down)) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index d, double scale = 2.0) {
  Eigen::VectorXd v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = uniform_in(rng, -scale, scale);
  return v;
}

SiblingStep<StateId> random_sibling_step(Rng& rng, int n) {
  SiblingStep<StateId> s;
  s.state = uniform_int(rng, 0, n - 1);
  s.sibling = uniform_int(rng, 0, n - 1);
  s.next_state = uniform_int(rng, 0, n - 1);
  s.next_sibling = uniform_int(rng, 0, n - 1);
  s.reward = uniform_in(rng, -1.0, 1.0);
  return s;
}

}  // namespace

// ----------------------------------------------------------------------------
// Schedules

TEST(StepSchedule, ValuesAndText) {
  const StepSchedule h = StepSchedule::harmonic(2.0, 10.0);
  EXPECT_DOUBLE_EQ(h(0), 0.2);
  EXPECT_DOUBLE_EQ(h(10), 0.1);
  EXPECT_EQ(h.to_string(), "harmonic:2,10");
  EXPECT_EQ(StepSchedule::parse("harmonic:2,10"), h);
  EXPECT_EQ(StepSchedule::parse("constant:0.003"), StepSchedule::constant(0.003));
  EXPECT_EQ(StepSchedule::constant(0.003)(12345), 0.003);
  EXPECT_THROW(StepSchedule::parse("harmonic:1"), std::invalid_argument);
  EXPECT_THROW(StepSchedule::parse("cosine:1"), std::invalid_argument);
  EXPECT_THROW(StepSchedule::harmonic(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(StepSchedule::constant(-1.0), std::invalid_argument);
}

TEST(StepScheduleProperty, HarmonicRobbinsMonro) {
  // sum over [N, 2N) of a/(b+t) stays near a ln 2 for every N (divergent sum)
  // while the squared tail is bounded by a^2/(b+N-1) (convergent sum).
  Rng rng(8);
  for (int c = 0; c < 100; ++c) {
    const double a = uniform_in(rng, 0.01, 100.0);
    const double b = uniform_in(rng, 0.01, 10000.0);
    const StepSchedule s = StepSchedule::harmonic(a, b);
    for (std::int64_t n : {std::int64_t{1} << 16, std::int64_t{1} << 20}) {
      double block = 0.0, block_sq = 0.0;
      for (std::int64_t t = n; t < 2 * n; ++t) {
        block += s(t);
        block_sq += s(t) * s(t);
      }
      const double lower = a * std::log((b + 2.0 * n) / (b + n));
      ASSERT_GE(block, lower * (1.0 - 1e-9));
      ASSERT_GT(block, 0.25 * a * std::log(2.0) * static_cast<double>(n) / (b + static_cast<double>(n)));
      ASSERT_LE(block_sq, a * a / (b + static_cast<double>(n) - 1.0));
    }
  }
}

TEST(LearnerVariant, RoundTrip) {
  for (auto v : {LearnerVariant::td, LearnerVariant::std, LearnerVariant::std_nonlinear, LearnerVariant::std_scaled,
                 LearnerVariant::dt}) {
    EXPECT_EQ(parse_learner_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_learner_variant("sarsa"), std::invalid_argument);
}

// ----------------------------------------------------------------------------
// Hand-executed single steps on the two-state system

TEST(StdStep, HandExecuted) {
  const auto two = two_state_system();
  for (double lambda : {0.0, 0.5, 1.0}) {
    LearnerState s{vec({0.88}), vec({-1.0}), 0};
    const SiblingStep<StateId> step{0, B, A, 1, 1.0, B, A};
    const double d = std_step(s, step, cfg_const(0.5, lambda, 0.1), two.features);
    EXPECT_NEAR(d, 1.44, 1e-12);
    EXPECT_NEAR(s.w[0], 0.736, 1e-12);
    EXPECT_NEAR(s.z[0], 0.5 * lambda * -1.0 + (1.0 - 2.0), 1e-15);
    EXPECT_EQ(s.t, 1);
  }
}

TEST(StdStep, ScaledHandExecuted) {
  const auto two = two_state_system();
  LearnerState s{vec({0.88}), vec({-1.0}), 0};
  const double d = std_step_scaled(s, SiblingStep<StateId>{0, B, A, 1, 1.0, B, A}, cfg_const(0.5, 1.0, 0.1),
                                   two.features);
  EXPECT_NEAR(d, 2.44, 1e-12);
}

TEST(StdStep, ZeroTraceLeavesWeights) {
  const auto two = two_state_system();
  LearnerState s{vec({0.3}), vec({0.0}), 0};
  std_step(s, SiblingStep<StateId>{0, B, A, 1, 1.0, B, A}, cfg_const(0.5, 1.0, 0.1), two.features);
  EXPECT_EQ(s.w[0], 0.3);
}

TEST(StdStep, SingletonChainNeverMoves) {
  Eigen::VectorXd to1 = Eigen::VectorXd::Unit(2, 1), to0 = Eigen::VectorXd::Unit(2, 0);
  Eigen::MatrixXd g(2, 2);
  g << 0.3, 1.0, 2.0, -1.0;
  TabularBmdp ring("ring", {{to1}, {to0}}, g);
  Eigen::MatrixXd phi(2, 2);
  phi << 1, 2, 3, 4;
  const TableFeatures f(phi);
  const Eigen::VectorXd w0 = vec({0.7, -0.2});
  RunOptions opts;
  opts.steps = 500;
  LearnerConfig cfg = cfg_const(0.9, 1.0, 0.5);
  const RunResult r = run_learner(TabularBranches(ring), Behavior<StateId>(policy_behavior(Policy::uniform(ring))), cfg,
                                  f, w0, 0, opts);
  EXPECT_EQ(r.final_state.w, w0);
}

TEST(StdStep, DimensionMismatchThrows) {
  const auto three = three_state_system();
  LearnerState s = LearnerState::initial(vec({1.0}));
  EXPECT_THROW(std_step(s, SiblingStep<StateId>{}, cfg_const(0.5, 1.0, 0.1), three.features),
               std::invalid_argument);
  EXPECT_THROW(td_step(s, SiblingStep<StateId>{}, cfg_const(0.5, 1.0, 0.1), three.features),
               std::invalid_argument);
}

TEST(TdStep, HandExecuted) {
  const auto two = two_state_system();
  LearnerState s{vec({0.88}), vec({1.0}), 0};
  const double d = td_step(s, SiblingStep<StateId>{0, B, A, 1, 1.0, B, A}, cfg_const(0.5, 1.0, 0.1), two.features);
  EXPECT_NEAR(d, 0.56, 1e-12);
  EXPECT_NEAR(s.w[0], 0.88 + 0.1 * 0.56, 1e-12);
  EXPECT_NEAR(s.z[0], 0.5 + 1.0, 1e-15);
}

TEST(TdStep, ZeroRewardZeroWeights) {
  const auto two = two_state_system();
  LearnerState s = td_initial_state(vec({0.0}), A, two.features);
  EXPECT_EQ(s.z[0], 2.0);
  const double d = td_step(s, SiblingStep<StateId>{0, A, A, 0, 0.0, B, A}, cfg_const(0.5, 1.0, 0.1), two.features);
  EXPECT_EQ(d, 0.0);
  EXPECT_EQ(s.w[0], 0.0);
}

TEST(DtStep, HandExecuted) {
  const auto two = two_state_system();
  LearnerState s{vec({0.88}), vec({-1.0}), 0};
  const PairStep<StateId> p{B, B, 1.0, A, B, 0.0};
  const double d = dt_step(s, p, cfg_const(0.5, 1.0, 0.1), two.features);
  EXPECT_NEAR(d, 1.88, 1e-12);
  EXPECT_NEAR(s.z[0], -0.5, 1e-15);
}

TEST(DtStep, IdenticalCopiesFreeze) {
  const auto two = two_state_system();
  Rng rng(4);
  LearnerState s = LearnerState::initial(vec({0.4}));
  StateId x = A;
  for (int k = 0; k < 1000; ++k) {
    const Outcome<StateId> o = step(two.bmdp, x, 1, rng);
    const double d = dt_step(s, PairStep<StateId>{x, o.next, o.reward, x, o.next, o.reward}, cfg_const(0.5, 1.0, 0.1),
                             two.features);
    ASSERT_EQ(d, 0.0);
    x = o.next;
  }
  EXPECT_EQ(s.w[0], 0.4);
}

// ----------------------------------------------------------------------------
// Invariants on random inputs

TEST(LearnerProperty, TraceRecurrence) {
  Rng rng(31);
  for (int c = 0; c < 300; ++c) {
    const auto rc = random_case(rng);
    const int n = rc.bmdp.n_states();
    const auto d = static_cast<Eigen::Index>(rc.features.dim());
    const double lambda = c % 3 == 0 ? 0.0 : uniform_in(rng, 0.0, 1.0);
    const LearnerConfig cfg = cfg_const(rc.alpha, lambda, uniform_in(rng, 1e-3, 0.5));
    LearnerState s{random_vector(rng, d), random_vector(rng, d), uniform_int(rng, 0, 100)};
    const Eigen::VectorXd z_old = s.z;
    const SiblingStep<StateId> st = random_sibling_step(rng, n);
    std_step(s, st, cfg, rc.features);
    const Eigen::VectorXd& fn = rc.features(st.next_state);
    const Eigen::VectorXd& fs = rc.features(st.next_sibling);
    for (Eigen::Index k = 0; k < d; ++k) {
      ASSERT_EQ(s.z[k], rc.alpha * lambda * z_old[k] + (fn[k] - fs[k]));
      if (lambda == 0.0) ASSERT_EQ(s.z[k], fn[k] - fs[k]);
    }

    LearnerState t{random_vector(rng, d), random_vector(rng, d), 0};
    const Eigen::VectorXd tz_old = t.z;
    td_step(t, st, cfg, rc.features);
    for (Eigen::Index k = 0; k < d; ++k) ASSERT_EQ(t.z[k], rc.alpha * lambda * tz_old[k] + fn[k]);
  }
}

TEST(LearnerProperty, UpdateLinearInTrace) {
  Rng rng(32);
  const double scales[] = {-2.0, 0.25, 0.5, 2.0, 8.0};
  for (int c = 0; c < 200; ++c) {
    const auto rc = random_case(rng);
    const auto d = static_cast<Eigen::Index>(rc.features.dim());
    const LearnerConfig cfg = cfg_const(rc.alpha, uniform_in(rng, 0, 1), uniform_in(rng, 1e-3, 0.5));
    const SiblingStep<StateId> st = random_sibling_step(rng, rc.bmdp.n_states());
    const double cs = scales[c % 5];
    // Starting from w = 0 the new weights are the increments themselves, and
    // power-of-two scales keep the comparison exact.
    const LearnerState base{Eigen::VectorXd::Zero(d), random_vector(rng, d), 0};
    LearnerState a = base, b = base;
    b.z *= cs;
    std_step(a, st, cfg, rc.features);
    std_step(b, st, cfg, rc.features);
    for (Eigen::Index k = 0; k < d; ++k) ASSERT_EQ(b.w[k], cs * a.w[k]);

    // General w: equal up to rounding of the final addition.
    LearnerState p{random_vector(rng, d), random_vector(rng, d), 0};
    LearnerState q = p;
    q.z *= cs;
    const Eigen::VectorXd w0 = p.w;
    std_step(p, st, cfg, rc.features);
    std_step(q, st, cfg, rc.features);
    for (Eigen::Index k = 0; k < d; ++k) {
      ASSERT_NEAR(q.w[k] - w0[k], cs * (p.w[k] - w0[k]), 1e-12 * (1.0 + std::abs(w0[k])));
    }
  }
}

TEST(LearnerProperty, NonlinearHookWithLinearValueIsBitIdentical) {
  Rng rng(33);
  for (int c = 0; c < 200; ++c) {
    const auto rc = random_case(rng);
    const auto d = static_cast<Eigen::Index>(rc.features.dim());
    const LearnerConfig cfg = cfg_const(rc.alpha, uniform_in(rng, 0, 1), uniform_in(rng, 1e-3, 0.5));
    const LinearValue<StateId, TableFeatures> lin(rc.features);
    LearnerState a{random_vector(rng, d), random_vector(rng, d), 0};
    LearnerState b = a;
    for (int k = 0; k < 20; ++k) {
      const SiblingStep<StateId> st = random_sibling_step(rng, rc.bmdp.n_states());
      ASSERT_EQ(std_step(a, st, cfg, rc.features), std_step_nonlinear(b, st, cfg, lin));
      ASSERT_EQ(a.w, b.w);
      ASSERT_EQ(a.z, b.z);
    }
  }
}

TEST(LearnerProperty, ScaledEqualsDoubledRewards) {
  Rng rng(34);
  for (int c = 0; c < 200; ++c) {
    const auto rc = random_case(rng);
    const auto d = static_cast<Eigen::Index>(rc.features.dim());
    const LearnerConfig cfg = cfg_const(rc.alpha, uniform_in(rng, 0, 1), uniform_in(rng, 1e-3, 0.5));
    LearnerState a{random_vector(rng, d), random_vector(rng, d), 0};
    LearnerState b = a;
    LearnerState plain = a;
    SiblingStep<StateId> st = random_sibling_step(rng, rc.bmdp.n_states());
    if (c % 4 == 0) st.reward = 0.0;
    std_step_scaled(a, st, cfg, rc.features);
    SiblingStep<StateId> doubled = st;
    doubled.reward *= 2.0;
    std_step(b, doubled, cfg, rc.features);
    ASSERT_EQ(a.w, b.w);
    ASSERT_EQ(a.z, b.z);
    if (st.reward == 0.0) {
      std_step(plain, st, cfg, rc.features);
      ASSERT_EQ(a.w, plain.w);
    }
  }
}

TEST(LearnerProperty, NonlinearGradientMatchesFiniteDifferences) {
  Rng rng(35);
  for (int c = 0; c < 200; ++c) {
    const auto rc = random_case(rng);
    const auto d = static_cast<Eigen::Index>(rc.features.dim());
    const QuadraticValue q{&rc.features};
    const double lambda = uniform_in(rng, 0, 1);
    const LearnerConfig cfg = cfg_const(rc.alpha, lambda, uniform_in(rng, 1e-3, 0.1));
    LearnerState s{random_vector(rng, d), random_vector(rng, d), 0};
    const Eigen::VectorXd z_old = s.z;
    const SiblingStep<StateId> st = random_sibling_step(rng, rc.bmdp.n_states());
    std_step_nonlinear(s, st, cfg, q);
    // The trace must have absorbed the gradient difference at the updated w.
    const Eigen::VectorXd fd = finite_difference_gradient(q, st.next_state, s.w) -
                               finite_difference_gradient(q, st.next_sibling, s.w);
    const Eigen::VectorXd expected = rc.alpha * lambda * z_old + fd;
    for (Eigen::Index k = 0; k < d; ++k) {
      ASSERT_NEAR(s.z[k], expected[k], 1e-5 * std::max(1.0, std::abs(expected[k])));
    }
    const Eigen::VectorXd g = q.gradient(st.next_state, s.w);
    const Eigen::VectorXd gfd = finite_difference_gradient(q, st.next_state, s.w);
    ASSERT_LE((g - gfd).norm(), 1e-5 * std::max(1.0, g.norm()));
  }
}

TEST(StdNonlinear, EqualGradientsOnlyDecay) {
  const auto three = three_state_system();
  const QuadraticValue q{&three.features};
  LearnerState s{vec({1.0, 2.0}), vec({0.5, -0.25}), 0};
  std_step_nonlinear(s, SiblingStep<StateId>{0, 0, 1, 0, 1.0, 2, 2}, cfg_const(0.8, 0.5, 0.01), q);
  EXPECT_DOUBLE_EQ(s.z[0], 0.4 * 0.5);
  EXPECT_DOUBLE_EQ(s.z[1], 0.4 * -0.25);
}

// ----------------------------------------------------------------------------
// run_learner

TEST(RunLearner, ZeroStepsReturnsInitialState) {
  const auto two = two_state_system();
  RunOptions opts;
  opts.steps = 0;
  LearnerConfig cfg = cfg_const(0.5, 1.0, 0.1);
  const RunResult r = run_learner(two.branches(), Behavior<StateId>(policy_behavior(two.optimal_policy)), cfg,
                                  two.features, vec({-3.0}), A, opts);
  EXPECT_EQ(r.final_state.w[0], -3.0);
  EXPECT_EQ(r.final_state.t, 0);
  ASSERT_EQ(r.log.size(), 1u);
}

TEST(RunLearner, DeterministicAndLogged) {
  const auto three = three_state_system();
  RunOptions opts;
  opts.steps = 5000;
  opts.seed = 12;
  opts.log_every = 1000;
  LearnerConfig cfg = cfg_const(0.95, 0.7, 0.01);
  const BehaviorSpec<StateId> b = Behavior<StateId>(policy_behavior(three.optimal_policy));
  const RunResult r1 = run_learner(three.branches(), b, cfg, three.features, vec({0.0, 0.0}), A, opts);
  const RunResult r2 = run_learner(three.branches(), b, cfg, three.features, vec({0.0, 0.0}), A, opts);
  EXPECT_EQ(r1.final_state.w, r2.final_state.w);
  ASSERT_EQ(r1.log.size(), 6u);
  for (std::size_t k = 0; k < r1.log.size(); ++k) EXPECT_EQ(r1.log[k].t, static_cast<std::int64_t>(1000 * k));
  opts.seed = 13;
  const RunResult r3 = run_learner(three.branches(), b, cfg, three.features, vec({0.0, 0.0}), A, opts);
  EXPECT_NE(r1.final_state.w, r3.final_state.w);
}

TEST(RunLearner, DivergenceGuard) {
  const auto two = two_state_system();
  RunOptions opts;
  opts.steps = 100000;
  opts.divergence_bound = 1e3;
  LearnerConfig cfg = cfg_const(0.5, 1.0, 5.0, LearnerVariant::td);
  const BehaviorSpec<StateId> b = Behavior<StateId>(policy_behavior(two.optimal_policy));
  EXPECT_THROW(run_learner(two.branches(), b, cfg, two.features, vec({1.0}), A, opts), DivergenceError);
  opts.stop_on_divergence = true;
  const RunResult r = run_learner(two.branches(), b, cfg, two.features, vec({1.0}), A, opts);
  EXPECT_TRUE(r.diverged);
  EXPECT_GT(r.final_state.w.norm(), 1e3);
  EXPECT_LT(r.final_state.t, opts.steps);
}

TEST(RunLearner, RejectsBadConfig) {
  const auto two = two_state_system();
  RunOptions opts;
  opts.steps = 10;
  LearnerConfig cfg = cfg_const(0.5, 1.5, 0.1);
  const BehaviorSpec<StateId> b = Behavior<StateId>(policy_behavior(two.optimal_policy));
  EXPECT_THROW(run_learner(two.branches(), b, cfg, two.features, vec({1.0}), A, opts), std::invalid_argument);
  cfg.lambda = 1.0;
  EXPECT_THROW(run_learner(two.branches(), b, cfg, two.features, vec({1.0, 2.0}), A, opts), std::invalid_argument);
}

TEST(RunLearner, StdGreedyOnlineTwoStateImproves) {
  const auto two = two_state_system();
  RunOptions opts;
  opts.steps = 1000000;
  opts.seed = 3;
  LearnerConfig cfg;
  cfg.alpha = 0.5;
  cfg.variant = LearnerVariant::std;
  const RunResult r = run_learner(two.branches(), BehaviorSpec<StateId>(GreedyOnline{}), cfg, two.features,
                                  vec({0.88}), A, opts);
  EXPECT_LT(r.final_state.w[0], 0.0);
  EXPECT_NEAR(r.final_state.w[0], -1.024, 0.02);
}
