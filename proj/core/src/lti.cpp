#include "precsched/lti.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <sstream>

namespace precsched {

namespace {

std::int64_t micros(double seconds) {
  return std::llround(seconds * 1e6);
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  // b > 0; works for negative a as well
  std::int64_t d = a / b;
  return d * b < a ? d + 1 : d;
}

bool symmetric(const MatrixXd& M, double tol) {
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, M.cwiseAbs().maxCoeff());
}

}  // namespace

std::int64_t ceil_samples(double t, double h) {
  return ceil_div(micros(t), micros(h));
}

void SystemSpec::validate() const {
  std::ostringstream err;
  auto fail = [&](const std::string& msg) { err << (err.tellp() > 0 ? "; " : "") << msg; };

  const int nn = n(), mm = m(), qq = q();
  if (nn == 0) fail("A must be non-empty");
  if (qq == 0) fail("C must be non-empty");
  if (A.rows() != A.cols()) fail("A must be square");
  if (B.rows() != nn) fail("B row count must match A");
  if (C.cols() != nn) fail("C column count must match A");
  if (K.rows() != mm || K.cols() != nn) fail("K must be m x n");
  if (Q.rows() != nn || Q.cols() != nn) fail("Q must be n x n");
  if (R.rows() != mm || R.cols() != mm) fail("R must be m x m");
  if (!(h > 0.0)) fail("h must be positive");
  if (x0.size() != nn) fail("x0 must have n entries");
  if (u0.size() != mm) fail("u0 must have m entries");
  if (err.tellp() > 0) throw std::invalid_argument("SystemSpec: " + err.str());

  if (!symmetric(Q, 1e-12)) fail("Q must be symmetric");
  if (!symmetric(R, 1e-12)) fail("R must be symmetric");
  if (err.tellp() == 0) {
    Eigen::LDLT<MatrixXd> ldlt(Q);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      fail("Q must be positive semidefinite");
    Eigen::LLT<MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) fail("R must be positive definite");
  }
  if (err.tellp() > 0) throw std::invalid_argument("SystemSpec: " + err.str());
}

int ScenarioSpec::sample_count(double h) const {
  return static_cast<int>(ceil_div(micros(horizon), micros(h)));
}

void ScenarioSpec::validate(int q) const {
  std::ostringstream err;
  auto fail = [&](const std::string& msg) { err << (err.tellp() > 0 ? "; " : "") << msg; };

  if (steps.empty()) fail("at least one step required");
  if (!steps.empty() && steps.front().t != 0.0) fail("first step must be at t = 0");
  for (std::size_t j = 0; j < steps.size(); ++j) {
    if (steps[j].gamma.size() != q) fail("step " + std::to_string(j) + " reference must have q entries");
    if (!(steps[j].delta > 0.0)) fail("step " + std::to_string(j) + " band half-width must be positive");
    if (j > 0 && !(steps[j].t > steps[j - 1].t)) fail("step instants must be strictly increasing");
  }
  if (!steps.empty() && !(steps.back().t < horizon)) fail("last step must precede the horizon");
  if (!(settling_time > 0.0)) fail("settling time must be positive");
  if (!(horizon > 0.0)) fail("horizon must be positive");
  if (!(t_lo > 0.0) || !(t_lo <= t_hi)) fail("runtimes must satisfy 0 < t_lo <= t_hi");
  if (e_hi < 0.0 || e_lo < e_hi) fail("error bounds must satisfy 0 <= e_hi <= e_lo");
  if (err.tellp() > 0) throw std::invalid_argument("ScenarioSpec: " + err.str());
}

int active_step(const ScenarioSpec& scen, double h, int i) {
  int j = 0;
  for (std::size_t k = 1; k < scen.steps.size(); ++k) {
    if (ceil_samples(scen.steps[k].t, h) <= i) j = static_cast<int>(k);
  }
  return j;
}

SteadyState solve_steady_state(const SystemSpec& sys, const VectorXd& gamma) {
  const int n = sys.n(), m = sys.m(), q = sys.q();
  MatrixXd M(n + q, n + m);
  M.topLeftCorner(n, n) = MatrixXd::Identity(n, n) - sys.A;
  M.topRightCorner(n, m) = -sys.B;
  M.bottomLeftCorner(q, n) = sys.C;
  M.bottomRightCorner(q, m).setZero();
  VectorXd rhs(n + q);
  rhs.head(n).setZero();
  rhs.tail(q) = gamma;

  VectorXd s = M.colPivHouseholderQr().solve(rhs);
  const double scale = std::max({1.0, rhs.cwiseAbs().maxCoeff(),
                                 M.cwiseAbs().maxCoeff() * s.cwiseAbs().maxCoeff()});
  if ((M * s - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::runtime_error("untrackable reference: steady-state system has no solution");
  return SteadyState{s.head(n), s.tail(m)};
}

namespace {

Trajectory simulate_impl(const SystemSpec& sys, const ScenarioSpec& scen,
                         const std::vector<double>* e) {
  const int N = scen.sample_count(sys.h);
  const int n = sys.n(), m = sys.m(), q = sys.q();
  Trajectory traj;
  traj.N = N;
  traj.x.assign(N + 1, VectorXd::Zero(n));
  traj.u.assign(N + 1, VectorXd::Zero(m));
  traj.y.assign(N + 1, VectorXd::Zero(q));

  std::vector<SteadyState> ss;
  ss.reserve(scen.steps.size());
  for (std::size_t j = 0; j < scen.steps.size(); ++j) {
    try {
      ss.push_back(solve_steady_state(sys, scen.steps[j].gamma));
    } catch (const std::runtime_error&) {
      throw std::runtime_error("untrackable reference at step " + std::to_string(j));
    }
  }

  traj.x[0] = sys.x0;
  traj.u[0] = sys.u0;
  traj.y[0] = sys.C * sys.x0;

  for (int i = 1; i <= N; ++i) {
    const int j = active_step(scen, sys.h, i);
    const double ei = e ? (*e)[i] : 0.0;
    traj.u[i] = ss[j].u_ss + sys.K * (traj.x[i - 1] - ss[j].x_ss) + VectorXd::Constant(m, ei);
    traj.x[i] = sys.A * traj.x[i - 1] + sys.B * traj.u[i - 1] + VectorXd::Constant(n, ei);
    traj.y[i] = sys.C * traj.x[i] + VectorXd::Constant(q, ei);
    if (!traj.first_nonfinite &&
        (!traj.x[i].allFinite() || !traj.u[i].allFinite() || !traj.y[i].allFinite()))
      traj.first_nonfinite = i;
  }
  return traj;
}

}  // namespace

Trajectory simulate_nominal(const SystemSpec& sys, const ScenarioSpec& scen) {
  return simulate_impl(sys, scen, nullptr);
}

Trajectory simulate_with_offsets(const SystemSpec& sys, const ScenarioSpec& scen,
                                 const std::vector<double>& e) {
  if (static_cast<int>(e.size()) != scen.sample_count(sys.h) + 1)
    throw std::invalid_argument("offset vector must have N+1 entries");
  return simulate_impl(sys, scen, &e);
}

double lqr_cost(const Trajectory& traj, const MatrixXd& Q, const MatrixXd& R) {
  double total = 0.0;
  for (int i = 0; i <= traj.N; ++i) {
    total += traj.x[i].dot(Q * traj.x[i]) + traj.u[i].dot(R * traj.u[i]);
  }
  return std::isfinite(total) ? total : std::numeric_limits<double>::quiet_NaN();
}

Trajectory deviation_trajectory(const SystemSpec& sys, const ScenarioSpec& scen,
                                const Trajectory& traj) {
  Trajectory dev = traj;
  std::vector<SteadyState> ss;
  for (const auto& step : scen.steps) ss.push_back(solve_steady_state(sys, step.gamma));
  for (int i = 0; i <= traj.N; ++i) {
    const int j = active_step(scen, sys.h, i);
    dev.x[i] = traj.x[i] - ss[j].x_ss;
    dev.u[i] = traj.u[i] - ss[j].u_ss;
    dev.y[i] = traj.y[i] - scen.steps[j].gamma;
  }
  return dev;
}

TimingMetrics time_domain_metrics(const SystemSpec& sys, const VectorXd& gamma,
                                  double delta, double horizon) {
  ScenarioSpec scen;
  scen.steps = {StepRef{0.0, gamma, delta}};
  scen.settling_time = horizon;  // placeholder, unused by the simulation
  scen.horizon = horizon;
  scen.t_lo = scen.t_hi = 1.0;
  Trajectory traj = simulate_nominal(sys, scen);
  const int N = traj.N;
  const int q = sys.q();
  const VectorXd y0 = traj.y[0];

  auto in_band = [&](int i) {
    for (int c = 0; c < q; ++c)
      if (std::abs(traj.y[i][c] - gamma[c]) > delta) return false;
    return true;
  };

  int last_violation = -1;
  for (int i = 0; i <= N; ++i)
    if (!in_band(i)) last_violation = i;
  if (last_violation == N)
    throw std::runtime_error("unsettled: output still outside the band at horizon " +
                             std::to_string(horizon) + " s");
  TimingMetrics out;
  out.T_s = last_violation < 0 ? 0.0 : (last_violation + 1) * sys.h;

  // Rise: first sample covering 90% of every component's reference gap.
  int rise = -1;
  for (int i = 0; i <= N && rise < 0; ++i) {
    bool covered = true;
    for (int c = 0; c < q; ++c)
      if (std::abs(traj.y[i][c] - gamma[c]) > 0.1 * std::abs(gamma[c] - y0[c])) covered = false;
    if (covered) rise = i;
  }
  out.T_r = rise < 0 ? out.T_s : rise * sys.h;

  // Peak: first overshoot maximum of the primary output; band entry when the
  // response never overshoots (or only after settling).
  const double toward = gamma[0] >= y0[0] ? 1.0 : -1.0;
  int peak = -1;
  for (int i = 1; i < N; ++i) {
    const bool beyond = toward * (traj.y[i][0] - gamma[0]) > 0.0;
    const bool crest = toward * traj.y[i][0] >= toward * traj.y[i - 1][0] &&
                       toward * traj.y[i + 1][0] < toward * traj.y[i][0];
    if (beyond && crest) {
      peak = i;
      break;
    }
  }
  if (peak >= 0 && peak * sys.h <= out.T_s) {
    out.T_p = peak * sys.h;
  } else {
    int entry = -1;
    for (int i = 0; i <= N && entry < 0; ++i)
      if (in_band(i)) entry = i;
    out.T_p = entry < 0 ? out.T_s : entry * sys.h;
  }
  return out;
}

SettlingReport check_settling(const Trajectory& traj, const SystemSpec& sys,
                              const ScenarioSpec& scen) {
  SettlingReport report;
  const int N = traj.N;
  const int q = sys.q();
  for (std::size_t j = 0; j < scen.steps.size(); ++j) {
    const double t_next =
        j + 1 < scen.steps.size() ? scen.steps[j + 1].t : scen.horizon;
    const auto lo64 = ceil_samples(scen.steps[j].t + scen.settling_time, sys.h);
    const auto hi64 = std::min<std::int64_t>(ceil_samples(t_next, sys.h), N);
    if (lo64 > hi64) continue;
    const int lo = static_cast<int>(lo64), hi = static_cast<int>(hi64);
    const VectorXd& gamma = scen.steps[j].gamma;
    const double delta = scen.steps[j].delta;
    for (int i = lo; i <= hi; ++i) {
      bool ok = traj.y[i].allFinite();
      for (int c = 0; ok && c < q; ++c)
        if (std::abs(traj.y[i][c] - gamma[c]) > delta) ok = false;
      if (!ok) {
        report.pass = false;
        report.first_violation =
            SettlingViolation{static_cast<int>(j), i, traj.y[i]};
        return report;
      }
    }
  }
  return report;
}

}  // namespace precsched
