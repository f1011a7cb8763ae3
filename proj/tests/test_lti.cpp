#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "precsched/lti.hpp"
#include "support/test_support.hpp"

using namespace precsched;
using testsupport::cc_scenario;
using testsupport::cc_system;

TEST_CASE("sample indices are exact in microseconds") {
  CHECK(ceil_samples(1.8, 0.01) == 180);
  CHECK(ceil_samples(3.5, 0.01) == 350);
  CHECK(ceil_samples(5.5, 0.01) == 550);
  CHECK(ceil_samples(0.64, 0.01) == 64);   // 0.64/0.01 is not exact in binary
  CHECK(ceil_samples(0.641, 0.01) == 65);  // strictly past a boundary rounds up
  CHECK(ceil_samples(0.0, 0.01) == 0);

  ScenarioSpec scen = cc_scenario();
  CHECK(scen.sample_count(0.01) == 800);
  CHECK(scen.sample_count(0.03) == 267);  // ceil(8 / 0.03)
}

TEST_CASE("active step switches exactly at the step sample") {
  ScenarioSpec scen = cc_scenario();
  CHECK(active_step(scen, 0.01, 0) == 0);
  CHECK(active_step(scen, 0.01, 179) == 0);
  CHECK(active_step(scen, 0.01, 180) == 1);
  CHECK(active_step(scen, 0.01, 349) == 1);
  CHECK(active_step(scen, 0.01, 350) == 2);
  CHECK(active_step(scen, 0.01, 800) == 3);
}

TEST_CASE("system validation rejects each malformed field") {
  SystemSpec sys = cc_system();
  CHECK_NOTHROW(sys.validate());

  SystemSpec bad = sys;
  bad.B = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = sys;
  bad.h = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = sys;
  bad.R = Eigen::MatrixXd{{0.0}};  // not PD
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = sys;
  bad.Q = Eigen::MatrixXd{{1.0, 2.0, 0.0}, {2.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // indefinite

  bad = sys;
  bad.x0 = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("scenario validation rejects bad step lists and bounds") {
  ScenarioSpec scen = cc_scenario();
  CHECK_NOTHROW(scen.validate(1));

  ScenarioSpec bad = scen;
  bad.steps[0].t = 0.5;
  CHECK_THROWS_AS(bad.validate(1), std::invalid_argument);

  bad = scen;
  bad.steps[2].t = bad.steps[1].t;
  CHECK_THROWS_AS(bad.validate(1), std::invalid_argument);

  bad = scen;
  bad.e_hi = 1.0;  // e_hi > e_lo
  CHECK_THROWS_AS(bad.validate(1), std::invalid_argument);

  bad = scen;
  bad.t_lo = 0.0;
  CHECK_THROWS_AS(bad.validate(1), std::invalid_argument);

  bad = scen;
  bad.steps.back().t = 9.0;  // past the horizon
  CHECK_THROWS_AS(bad.validate(1), std::invalid_argument);
}

TEST_CASE("steady state solves the stacked linear system") {
  SystemSpec sys = cc_system();
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(1, 35.0);
  SteadyState ss = solve_steady_state(sys, gamma);

  CHECK((sys.C * ss.x_ss - gamma).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((sys.A * ss.x_ss + sys.B * ss.u_ss - ss.x_ss).cwiseAbs().maxCoeff() <
        1e-9);

  // An uncontrollable loop with a decaying state cannot hold a nonzero output.
  SystemSpec dead = sys;
  dead.B = Eigen::MatrixXd::Zero(3, 1);
  CHECK_THROWS_WITH_AS(solve_steady_state(dead, gamma),
                       doctest::Contains("untrackable"), std::runtime_error);
}

TEST_CASE("nominal simulation follows the delayed-input recursion") {
  std::mt19937_64 rng(71);
  SystemSpec sys = testsupport::random_system(rng, 3, 1, 1);
  ScenarioSpec scen = testsupport::small_scenario(rng, 1, 2.0, 2, 0.5);

  Trajectory traj = simulate_nominal(sys, scen);
  const int N = scen.sample_count(sys.h);
  REQUIRE(traj.N == N);
  REQUIRE(static_cast<int>(traj.x.size()) == N + 1);

  // Re-derive the whole trajectory with an independent loop.
  Eigen::VectorXd x = sys.x0, u = sys.u0;
  CHECK((traj.x[0] - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((traj.y[0] - sys.C * x).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 1; i <= N; ++i) {
    const int j = active_step(scen, sys.h, i);
    SteadyState ss = solve_steady_state(sys, scen.steps[j].gamma);
    Eigen::VectorXd unew = ss.u_ss + sys.K * (x - ss.x_ss);
    Eigen::VectorXd xnew = sys.A * x + sys.B * u;  // input delayed one sample
    x = xnew;
    u = unew;
    CHECK((traj.u[i] - u).cwiseAbs().maxCoeff() <= 1e-12 * (1 + u.norm()));
    CHECK((traj.x[i] - x).cwiseAbs().maxCoeff() <= 1e-12 * (1 + x.norm()));
    CHECK((traj.y[i] - sys.C * x).cwiseAbs().maxCoeff() <=
          1e-12 * (1 + x.norm()));
  }
}

TEST_CASE("offset simulation adds e_i to every update of sample i") {
  SystemSpec sys = cc_system();
  ScenarioSpec scen = cc_scenario();
  const int N = scen.sample_count(sys.h);

  std::vector<double> e(N + 1, 0.0);
  e[1] = 0.25;
  e[2] = -0.125;
  Trajectory traj = simulate_with_offsets(sys, scen, e);
  Trajectory nom = simulate_nominal(sys, scen);

  SteadyState ss = solve_steady_state(sys, scen.steps[0].gamma);
  const Eigen::VectorXd ones1 = Eigen::VectorXd::Ones(1);
  const Eigen::VectorXd ones3 = Eigen::VectorXd::Ones(3);

  // Sample 0 is exact.
  CHECK((traj.x[0] - nom.x[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((traj.y[0] - nom.y[0]).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd u1 = ss.u_ss + sys.K * (sys.x0 - ss.x_ss) + e[1] * ones1;
  Eigen::VectorXd x1 = sys.A * sys.x0 + sys.B * sys.u0 + e[1] * ones3;
  Eigen::VectorXd y1 = sys.C * x1 + e[1] * ones1;
  CHECK((traj.u[1] - u1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((traj.x[1] - x1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((traj.y[1] - y1).cwiseAbs().maxCoeff() < 1e-14);

  Eigen::VectorXd u2 = ss.u_ss + sys.K * (x1 - ss.x_ss) + e[2] * ones1;
  Eigen::VectorXd x2 = sys.A * x1 + sys.B * u1 + e[2] * ones3;
  CHECK((traj.u[2] - u2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((traj.x[2] - x2).cwiseAbs().maxCoeff() < 1e-14);

  std::vector<double> zero(N + 1, 0.0);
  Trajectory same = simulate_with_offsets(sys, scen, zero);
  for (int i = 0; i <= N; ++i)
    CHECK((same.x[i] - nom.x[i]).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(simulate_with_offsets(sys, scen, std::vector<double>(3)),
                  std::invalid_argument);
}

TEST_CASE("lqr cost sums x'Qx + u'Ru over all samples") {
  SystemSpec sys = cc_system();
  ScenarioSpec scen = cc_scenario();
  Trajectory traj = simulate_nominal(sys, scen);

  double want = 0.0;
  for (int i = 0; i <= traj.N; ++i)
    want += traj.x[i].dot(sys.Q * traj.x[i]) + traj.u[i].dot(sys.R * traj.u[i]);
  const double got = lqr_cost(traj, sys.Q, sys.R);
  CHECK(got == doctest::Approx(want).epsilon(1e-14));

  Trajectory broken = traj;
  broken.x[5][0] = std::numeric_limits<double>::infinity();
  CHECK(std::isnan(lqr_cost(broken, sys.Q, sys.R)));
}

TEST_CASE("deviation coordinates subtract the active steady state") {
  SystemSpec sys = cc_system();
  ScenarioSpec scen = cc_scenario();
  Trajectory traj = simulate_nominal(sys, scen);
  Trajectory dev = deviation_trajectory(sys, scen, traj);

  SteadyState s0 = solve_steady_state(sys, scen.steps[0].gamma);
  SteadyState s1 = solve_steady_state(sys, scen.steps[1].gamma);
  CHECK((dev.x[100] - (traj.x[100] - s0.x_ss)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((dev.u[100] - (traj.u[100] - s0.u_ss)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((dev.y[200] - (traj.y[200] - scen.steps[1].gamma)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((dev.x[200] - (traj.x[200] - s1.x_ss)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("settling check covers T_s after each step up to the next") {
  SystemSpec sys = cc_system();
  ScenarioSpec scen = cc_scenario();
  Trajectory traj = simulate_nominal(sys, scen);

  SettlingReport rep = check_settling(traj, sys, scen);
  CHECK(rep.pass);

  // Push one in-span sample out of the band: step 0 spans samples 120..180.
  Trajectory bad = traj;
  bad.y[150][0] = scen.steps[0].gamma[0] + scen.steps[0].delta + 1e-6;
  rep = check_settling(bad, sys, scen);
  REQUIRE(!rep.pass);
  REQUIRE(rep.first_violation.has_value());
  CHECK(rep.first_violation->step == 0);
  CHECK(rep.first_violation->sample == 150);

  // The same excursion before the settling deadline is allowed.
  Trajectory early = traj;
  early.y[119][0] = scen.steps[0].gamma[0] + scen.steps[0].delta + 1e-6;
  CHECK(check_settling(early, sys, scen).pass);

  // Span endpoints are inclusive on both sides.
  Trajectory edge = traj;
  edge.y[120][0] = scen.steps[0].gamma[0] - scen.steps[0].delta - 1e-6;
  CHECK(!check_settling(edge, sys, scen).pass);
  edge = traj;
  edge.y[180][0] = scen.steps[0].gamma[0] + scen.steps[0].delta + 1e-6;
  CHECK(!check_settling(edge, sys, scen).pass);

  // Non-finite outputs in a span fail the check (sample 500 is inside the
  // settled span of the step at t = 3.5).
  Trajectory inf = traj;
  inf.y[500][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK(!check_settling(inf, sys, scen).pass);
}

TEST_CASE("step metrics are ordered and the unsettled case throws") {
  SystemSpec sys = cc_system();
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(1, 35.0);
  TimingMetrics m = time_domain_metrics(sys, gamma, 1.75, 8.0);
  CHECK(m.T_r > 0.0);
  CHECK(m.T_p >= m.T_r);   // the peak cannot precede 90% coverage
  CHECK(m.T_s < 8.0);
  CHECK(m.T_s > 0.0);

  CHECK_THROWS_WITH_AS(time_domain_metrics(sys, gamma, 1.75, 0.05),
                       doctest::Contains("unsettled"), std::runtime_error);
}
