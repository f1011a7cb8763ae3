#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "precsched/intervals.hpp"
#include "precsched/miqp.hpp"
#include "precsched/precision.hpp"
#include "precsched/scheduler.hpp"
#include "precsched/solver.hpp"

using namespace precsched;

namespace {

// Cruise-control plant: the 800-sample scenario the tools ship with.
SystemSpec cc_system() {
  SystemSpec sys;
  sys.A = Eigen::MatrixXd{{0.0, 0.01, 4.99e-5},
                          {-3.02e-4, 0.99, 0.01},
                          {-0.06, -0.05, 0.99}};
  sys.B = Eigen::MatrixXd{{4.13e-7}, {1.24e-4}, {0.02}};
  sys.C = Eigen::MatrixXd{{1.0, 0.0, 0.0}};
  sys.K = Eigen::MatrixXd{
      {0.25856292500510109, -23.276190528041482, -4.3853034520482712}};
  sys.Q = Eigen::MatrixXd{{100.0, 0.0, 0.0}, {0.0, 1e-6, 0.0}, {0.0, 0.0, 1e-6}};
  sys.R = Eigen::MatrixXd{{1e-5}};
  sys.h = 0.01;
  sys.x0 = Eigen::VectorXd::Zero(3);
  sys.u0 = Eigen::VectorXd::Zero(1);
  return sys;
}

ScenarioSpec cc_scenario() {
  ScenarioSpec scen;
  const double refs[] = {35.0, 25.0, 15.0, 20.0};
  const double times[] = {0.0, 1.8, 3.5, 5.5};
  for (int j = 0; j < 4; ++j) {
    StepRef s;
    s.t = times[j];
    s.gamma = Eigen::VectorXd::Constant(1, refs[j]);
    s.delta = 0.05 * refs[j];
    scen.steps.push_back(s);
  }
  scen.settling_time = 1.2;
  scen.horizon = 8.0;
  scen.t_lo = 0.9e-4;
  scen.t_hi = 2.1e-4;
  scen.e_lo = 1.46e-1;
  scen.e_hi = 1.74e-5;
  return scen;
}

// One-state lag with three four-sample windows: 12 free binaries, the same
// shape the solver unit tests use.
struct SmallProblem {
  SystemSpec sys;
  ScenarioSpec scen;
  SwitchingWindows windows;

  SmallProblem() {
    sys.A = Eigen::MatrixXd{{0.5}};
    sys.B = Eigen::MatrixXd{{0.5}};
    sys.C = Eigen::MatrixXd{{1.0}};
    sys.K = Eigen::MatrixXd{{0.0}};
    sys.Q = Eigen::MatrixXd{{1.0}};
    sys.R = Eigen::MatrixXd{{1.0}};
    sys.h = 0.05;
    sys.x0 = Eigen::VectorXd::Zero(1);
    sys.u0 = Eigen::VectorXd::Constant(1, 1.0);

    StepRef s0, s1;
    s0.t = 0.0;
    s0.gamma = Eigen::VectorXd::Constant(1, 1.0);
    s0.delta = 0.3;
    s1.t = 1.0;
    s1.gamma = Eigen::VectorXd::Constant(1, 2.0);
    s1.delta = 0.3;
    scen.steps = {s0, s1};
    scen.settling_time = 0.4;
    scen.horizon = 2.0;
    scen.t_lo = 1e-4;
    scen.t_hi = 3e-4;
    scen.e_lo = 0.05;
    scen.e_hi = 1e-4;

    windows.windows = {{5, 8}, {15, 18}, {25, 28}};
  }

  ReducedProblem reduce(double w1 = 10.0) const {
    auto p = std::make_shared<MiqpProblem>(
        build_schedule_program(sys, scen, windows, w1, 1.0));
    return presolve(std::move(p));
  }
};

void BM_round_to_format(benchmark::State& state) {
  const RoundingSpec spec = state.range(0) == 16 ? RoundingSpec::binary16()
                                                 : RoundingSpec::binary32();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> inputs(1024);
  for (double& v : inputs) v = std::ldexp(unif(rng), int(rng() % 40) - 20);
  for (auto _ : state) {
    double acc = 0.0;
    for (double v : inputs) acc += round_to_format(v, spec);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * inputs.size());
}
BENCHMARK(BM_round_to_format)->Arg(16)->Arg(32);

void BM_simulate_nominal(benchmark::State& state) {
  const SystemSpec sys = cc_system();
  const ScenarioSpec scen = cc_scenario();
  for (auto _ : state) {
    Trajectory traj = simulate_nominal(sys, scen);
    benchmark::DoNotOptimize(traj.y.back());
  }
}
BENCHMARK(BM_simulate_nominal);

void BM_simulate_rounded(benchmark::State& state) {
  const SystemSpec sys = cc_system();
  const ScenarioSpec scen = cc_scenario();
  const Schedule sched =
      Schedule::uniform(scen.sample_count(sys.h), Precision::hi);
  PrecisionPair prec;
  for (auto _ : state) {
    Trajectory traj = simulate_rounded(sys, scen, sched, prec);
    benchmark::DoNotOptimize(traj.y.back());
  }
}
BENCHMARK(BM_simulate_rounded);

void BM_conservative_bound(benchmark::State& state) {
  const SystemSpec sys = cc_system();
  VariableRanges vr;
  vr.x = {{-2.0, 2.0}, {-10.0, 10.0}, {-10.0, 10.0}};
  vr.u = {{-300.0, 300.0}};
  const RoundingSpec lo = RoundingSpec::binary16();
  for (auto _ : state)
    benchmark::DoNotOptimize(conservative_step_error_bound(sys, vr, lo));
}
BENCHMARK(BM_conservative_bound);

void BM_build_program(benchmark::State& state) {
  const SmallProblem sp;
  for (auto _ : state) {
    MiqpProblem p =
        build_schedule_program(sp.sys, sp.scen, sp.windows, 10.0, 1.0);
    benchmark::DoNotOptimize(p.rows.size());
  }
}
BENCHMARK(BM_build_program);

void BM_compile_relaxation(benchmark::State& state) {
  const SmallProblem sp;
  const ReducedProblem rp = sp.reduce();
  for (auto _ : state) {
    CompiledRelaxation cr = compile_relaxation(rp);
    benchmark::DoNotOptimize(cr.H.norm());
  }
}
BENCHMARK(BM_compile_relaxation);

void BM_qp_root_relaxation(benchmark::State& state) {
  const SmallProblem sp;
  const ReducedProblem rp = sp.reduce();
  const CompiledRelaxation cr = compile_relaxation(rp);
  const std::vector<std::int8_t> free_all(cr.F, -1);
  for (auto _ : state) {
    QpRelaxResult res = solve_qp_relaxation(cr, free_all);
    benchmark::DoNotOptimize(res.bound);
  }
}
BENCHMARK(BM_qp_root_relaxation);

void BM_branch_and_bound(benchmark::State& state) {
  const SmallProblem sp;
  const ReducedProblem rp = sp.reduce(static_cast<double>(state.range(0)));
  for (auto _ : state) {
    MiqpSolution sol = branch_and_bound(rp);
    benchmark::DoNotOptimize(sol.objective);
  }
}
BENCHMARK(BM_branch_and_bound)->Arg(1)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
