#include <benchmark/benchmark.h>

#include "tdlab/acrobot.hpp"
#include "tdlab/environments.hpp"
#include "tdlab/learners.hpp"
#include "tdlab/oracle.hpp"

using namespace tdlab;

namespace {

// A pre-drawn trajectory so only the update is timed.
std::vector<SiblingStep<StateId>> sample_steps(const TabularSystem& sys, std::int64_t n) {
  std::vector<SiblingStep<StateId>> out;
  auto traj = trajectory(sys.bmdp, sys.optimal_policy, sys.start, n, Rng(3));
  while (auto s = traj.next()) out.push_back(*s);
  return out;
}

template <class Step>
void learner_bench(benchmark::State& state, Step step) {
  const TabularSystem sys = three_state_system();
  const auto steps = sample_steps(sys, 4096);
  LearnerConfig cfg;
  cfg.alpha = sys.alpha;
  cfg.schedule = StepSchedule::harmonic(200.0, 5000.0);
  LearnerState s = LearnerState::initial(Eigen::VectorXd::Zero(2));
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(step(s, steps[k], cfg, sys.features));
    k = (k + 1) & 4095;
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_TdStep(benchmark::State& state) {
  learner_bench(state, [](auto& s, const auto& st, const auto& c, const auto& f) { return td_step(s, st, c, f); });
}
BENCHMARK(BM_TdStep);

void BM_StdStep(benchmark::State& state) {
  learner_bench(state, [](auto& s, const auto& st, const auto& c, const auto& f) { return std_step(s, st, c, f); });
}
BENCHMARK(BM_StdStep);

void BM_DtStep(benchmark::State& state) {
  const TabularSystem sys = three_state_system();
  const auto a = sample_steps(sys, 4096);
  LearnerConfig cfg;
  cfg.alpha = sys.alpha;
  LearnerState s = LearnerState::initial(Eigen::VectorXd::Zero(2));
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& x = a[k];
    const auto& y = a[(k + 17) & 4095];
    benchmark::DoNotOptimize(dt_step(
        s, PairStep<StateId>{x.state, x.next_state, x.reward, y.state, y.next_state, y.reward}, cfg, sys.features));
    k = (k + 1) & 4095;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DtStep);

void BM_RunLearnerTwoState(benchmark::State& state) {
  const TabularSystem sys = two_state_system();
  LearnerConfig cfg;
  cfg.alpha = sys.alpha;
  RunOptions opts;
  opts.steps = state.range(0);
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(1);
  for (auto _ : state) {
    const RunResult r = run_learner(TabularBranches(sys.bmdp), policy_behavior(sys.optimal_policy), cfg, sys.features,
                                    w0, sys.start, opts);
    benchmark::DoNotOptimize(r.final_state.w[0]);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RunLearnerTwoState)->Arg(100000);

void BM_AcrobotStep(benchmark::State& state) {
  const AcrobotParams p;
  AcrobotState s{0.3, -0.2, 1.0, -0.5};
  double torque = 1.0;
  for (auto _ : state) {
    s = acrobot_step(s, torque, p);
    torque = -torque;
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AcrobotStep);

void BM_StationaryDistribution(benchmark::State& state) {
  const TabularSystem sys = three_state_system();
  for (auto _ : state) benchmark::DoNotOptimize(stationary_distribution(sys.bmdp, sys.optimal_policy));
}
BENCHMARK(BM_StationaryDistribution);

void BM_Analyze(benchmark::State& state) {
  const TabularSystem sys = dt_counterexample_system();
  for (auto _ : state) {
    const ChainAnalysis a = analyze(sys.bmdp, sys.optimal_policy, sys.alpha);
    benchmark::DoNotOptimize(std_limit_ls(a, sys.features));
  }
}
BENCHMARK(BM_Analyze);

}  // namespace

BENCHMARK_MAIN();
