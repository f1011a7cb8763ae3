#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace precsched {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Closed-loop plant/controller description. The loop runs under the
// logical-execution-time convention: u[k] is computed from x[k-1] and applied
// for the whole sample k.
struct SystemSpec {
  MatrixXd A;  // n x n state transition
  MatrixXd B;  // n x m input map
  MatrixXd C;  // q x n output map
  MatrixXd K;  // m x n feedback gain
  MatrixXd Q;  // n x n state cost weight, PSD
  MatrixXd R;  // m x m input cost weight, PD
  double h = 0.0;  // sampling period, seconds
  VectorXd x0;     // initial state
  VectorXd u0;     // input applied during sample 0

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int q() const { return static_cast<int>(C.rows()); }

  // Throws std::invalid_argument on dimension mismatch, h <= 0, Q not PSD, or
  // R not PD (both checked by factorization).
  void validate() const;
};

// One reference step: at time t the output reference becomes gamma with band
// half-width delta (absolute, resolved from percent form before this struct
// is built).
struct StepRef {
  double t = 0.0;
  VectorXd gamma;
  double delta = 0.0;
};

struct ScenarioSpec {
  std::vector<StepRef> steps;  // ordered, steps[0].t == 0
  double settling_time = 0.0;  // T_s, seconds
  double horizon = 0.0;        // T, seconds
  double t_lo = 0.0, t_hi = 0.0;  // per-sample runtimes, seconds
  double e_lo = 0.0, e_hi = 0.0;  // per-sample roundoff bounds, absolute
  bool deviation_cost = true;     // LQR cost in deviation coordinates
  // Verification-time option: treat the model offsets as +-e_i by requiring
  // |y_nominal - gamma| + |y_offset - y_nominal| <= delta instead of the
  // one-sided +e_i check the optimizer encodes.
  bool symmetric_errors = false;

  int sample_count(double h) const;  // N = ceil(T/h), exact in microseconds
  void validate(int q) const;        // throws std::invalid_argument
};

struct Trajectory {
  int N = 0;
  std::vector<VectorXd> x, u, y;  // each of length N+1
  // First sample at which any state/input/output component became non-finite;
  // values from there on are kept as computed, never dropped.
  std::optional<int> first_nonfinite;

  bool finite() const { return !first_nonfinite.has_value(); }
};

struct TimingMetrics {
  double T_r = 0.0;  // rise time, seconds
  double T_p = 0.0;  // peak time, seconds
  double T_s = 0.0;  // settling time, seconds
};

struct SteadyState {
  VectorXd x_ss;
  VectorXd u_ss;
};

struct SettlingViolation {
  int step = 0;    // index j into ScenarioSpec::steps
  int sample = 0;  // trajectory index i
  VectorXd y;      // offending output
};

struct SettlingReport {
  bool pass = true;
  std::optional<SettlingViolation> first_violation;
};

// Sample index of the first sample at or after instant t (ceil(t/h) with t
// and h taken as integer microseconds; avoids float-ceiling off-by-ones).
std::int64_t ceil_samples(double t, double h);

// Index of the step active at sample i (largest j with ceil(t_j/h) <= i).
int active_step(const ScenarioSpec& scen, double h, int i);

// Solves x_ss = A x_ss + B u_ss, C x_ss = gamma (least-squares when the
// stacked system is not square). Throws std::runtime_error mentioning
// "untrackable" when no solution attains the reference.
SteadyState solve_steady_state(const SystemSpec& sys, const VectorXd& gamma);

// Exact double-precision closed-loop simulation over N = ceil(T/h) samples.
Trajectory simulate_nominal(const SystemSpec& sys, const ScenarioSpec& scen);

// As simulate_nominal but with a fresh additive offset e[i] applied to every
// component of the u, x, and y updates at sample i (i = 1..N, sample 0 is
// exact). This is the error-inclusive model the optimizer reasons about.
Trajectory simulate_with_offsets(const SystemSpec& sys, const ScenarioSpec& scen,
                                 const std::vector<double>& e);

// Sum over samples 0..N of x'Qx + u'Ru for the trajectory as given. Returns
// NaN if any term is non-finite.
double lqr_cost(const Trajectory& traj, const MatrixXd& Q, const MatrixXd& R);

// Rewrites traj into deviation coordinates (x - x_ss, u - u_ss, y - gamma)
// with the steady state of the step active at each sample.
Trajectory deviation_trajectory(const SystemSpec& sys, const ScenarioSpec& scen,
                                const Trajectory& traj);

// Step-response metrics for a single step from x0 to gamma, simulated at high
// precision over `horizon` seconds. T_r is the first time the output covers
// 90% of the reference, T_p the first local overshoot maximum (first band
// entry when there is no overshoot), T_s the first time after which the
// output stays within [gamma - delta, gamma + delta]. Throws
// std::runtime_error ("unsettled", carrying the horizon) when the output is
// still outside the band at the end.
TimingMetrics time_domain_metrics(const SystemSpec& sys, const VectorXd& gamma,
                                  double delta, double horizon);

// Checks gamma_j - delta_j <= y_i <= gamma_j + delta_j for every step j over
// samples ceil((t_j+T_s)/h) .. ceil(t_{j+1}/h) (t_{r+1} = T), inclusive.
SettlingReport check_settling(const Trajectory& traj, const SystemSpec& sys,
                              const ScenarioSpec& scen);

}  // namespace precsched
