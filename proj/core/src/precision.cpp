#include "precsched/precision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace precsched {

double RoundingSpec::eps() const { return std::ldexp(1.0, -significand_bits); }

double RoundingSpec::delta() const {
  return std::ldexp(1.0, min_exponent - significand_bits + 1);
}

double RoundingSpec::max_finite() const {
  return (2.0 - std::ldexp(1.0, 1 - significand_bits)) * std::ldexp(1.0, max_exponent);
}

RoundingSpec RoundingSpec::binary16() { return RoundingSpec{11, -14, 15}; }
RoundingSpec RoundingSpec::binary32() { return RoundingSpec{24, -126, 127}; }
RoundingSpec RoundingSpec::binary64() { return RoundingSpec{53, -1022, 1023}; }

RoundingSpec RoundingSpec::from_name(const std::string& name) {
  if (name == "binary16") return binary16();
  if (name == "binary32") return binary32();
  if (name == "binary64") return binary64();
  throw std::invalid_argument("unknown precision format: " + name);
}

double round_to_format(double v, const RoundingSpec& spec) {
  if (!std::isfinite(v) || v == 0.0) return v;

  int bexp;  // v = f * 2^bexp with |f| in [0.5, 1)
  std::frexp(v, &bexp);
  const int exponent = bexp - 1;

  // Quantum of the target format around |v|; the subnormal range shares the
  // quantum of the smallest normal binade.
  const int qexp = std::max(exponent, spec.min_exponent) - spec.significand_bits + 1;

  // Exact scaling: v / 2^qexp has magnitude < 2^53, so floor/fraction
  // arithmetic below is exact in doubles.
  const double scaled = std::ldexp(v, -qexp);
  double lower = std::floor(scaled);
  const double frac = scaled - lower;
  double rounded;
  if (frac > 0.5) {
    rounded = lower + 1.0;
  } else if (frac < 0.5) {
    rounded = lower;
  } else {  // tie: round to even
    rounded = std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
  }
  const double result = std::ldexp(rounded, qexp);

  if (std::abs(result) > spec.max_finite())
    return v > 0.0 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
  return result == 0.0 ? std::copysign(0.0, v) : result;
}

namespace {

// Rounded row-major dot product: products and partial sums each rounded.
double dot_rounded(const Eigen::RowVectorXd& coeffs, const VectorXd& vals,
                   const RoundingSpec& spec) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < coeffs.size(); ++c) {
    const double p = round_to_format(coeffs[c] * vals[c], spec);
    acc = c == 0 ? p : round_to_format(acc + p, spec);
  }
  return acc;
}

}  // namespace

Trajectory simulate_rounded(const SystemSpec& sys, const ScenarioSpec& scen,
                            const Schedule& sched, const PrecisionPair& prec) {
  const int N = scen.sample_count(sys.h);
  if (sched.N != N) throw std::invalid_argument("schedule does not cover the horizon");
  const int n = sys.n(), m = sys.m(), q = sys.q();

  std::vector<SteadyState> ss;
  for (std::size_t j = 0; j < scen.steps.size(); ++j) {
    try {
      ss.push_back(solve_steady_state(sys, scen.steps[j].gamma));
    } catch (const std::runtime_error&) {
      throw std::runtime_error("untrackable reference at step " + std::to_string(j));
    }
  }

  const std::vector<Precision> per_sample = sched.expand();
  auto spec_at = [&](int i) -> const RoundingSpec& {
    return per_sample[i] == Precision::lo ? prec.lo : prec.hi;
  };

  Trajectory traj;
  traj.N = N;
  traj.x.assign(N + 1, VectorXd::Zero(n));
  traj.u.assign(N + 1, VectorXd::Zero(m));
  traj.y.assign(N + 1, VectorXd::Zero(q));
  traj.x[0] = sys.x0;
  traj.u[0] = sys.u0;
  for (int c = 0; c < q; ++c)
    traj.y[0][c] = dot_rounded(sys.C.row(c), traj.x[0], spec_at(0));

  for (int i = 1; i <= N; ++i) {
    const RoundingSpec& spec = spec_at(i);
    const int j = active_step(scen, sys.h, i);

    VectorXd dx(n);
    for (int c = 0; c < n; ++c)
      dx[c] = round_to_format(traj.x[i - 1][c] - ss[j].x_ss[c], spec);
    for (int r = 0; r < m; ++r) {
      const double kd = dot_rounded(sys.K.row(r), dx, spec);
      traj.u[i][r] = round_to_format(ss[j].u_ss[r] + kd, spec);
    }
    for (int r = 0; r < n; ++r) {
      const double ax = dot_rounded(sys.A.row(r), traj.x[i - 1], spec);
      const double bu = dot_rounded(sys.B.row(r), traj.u[i - 1], spec);
      traj.x[i][r] = round_to_format(ax + bu, spec);
    }
    for (int c = 0; c < q; ++c)
      traj.y[i][c] = dot_rounded(sys.C.row(c), traj.x[i], spec);

    if (!traj.first_nonfinite &&
        (!traj.x[i].allFinite() || !traj.u[i].allFinite() || !traj.y[i].allFinite()))
      traj.first_nonfinite = i;
  }
  return traj;
}

namespace {

// (magnitude bound, accumulated absolute error) pair for first-order roundoff
// propagation.
struct Interval {
  double mag = 0.0;
  double err = 0.0;
};

struct ErrorModel {
  double eps, delta;
  Interval mul(Interval a, Interval b) const {
    Interval r;
    r.mag = a.mag * b.mag;
    r.err = a.mag * b.err + b.mag * a.err + eps * r.mag + delta;
    return r;
  }
  Interval add(Interval a, Interval b) const {
    Interval r;
    r.mag = a.mag + b.mag;
    r.err = a.err + b.err + eps * r.mag + delta;
    return r;
  }
  Interval dot(const Eigen::RowVectorXd& coeffs, const std::vector<Interval>& vals) const {
    Interval acc{0.0, 0.0};
    for (Eigen::Index c = 0; c < coeffs.size(); ++c) {
      Interval p = mul(Interval{std::abs(coeffs[c]), 0.0}, vals[c]);
      acc = c == 0 ? p : add(acc, p);
    }
    return acc;
  }
};

}  // namespace

double conservative_step_error_bound(const SystemSpec& sys,
                                     const VariableRanges& ranges,
                                     const RoundingSpec& spec) {
  const int n = sys.n(), m = sys.m(), q = sys.q();
  if (static_cast<int>(ranges.x.size()) != n || static_cast<int>(ranges.u.size()) != m)
    throw std::invalid_argument("variable ranges must cover every state and input");
  auto leaf = [](std::pair<double, double> r) {
    if (!(r.first <= r.second) || !std::isfinite(r.first) || !std::isfinite(r.second))
      throw std::invalid_argument("variable range must be a finite interval");
    return Interval{std::max(std::abs(r.first), std::abs(r.second)), 0.0};
  };

  std::vector<Interval> x(n), u(m);
  for (int c = 0; c < n; ++c) x[c] = leaf(ranges.x[c]);
  for (int r = 0; r < m; ++r) u[r] = leaf(ranges.u[r]);

  const ErrorModel fm{spec.eps(), spec.delta()};
  double worst = 0.0;

  // Controller update u' = K x, plant update x' = A x + B u, output y = C x',
  // all in deviation coordinates (the ranges are deviation ranges and the
  // dynamics are unchanged by the steady-state shift).
  std::vector<Interval> unew(m);
  for (int r = 0; r < m; ++r) {
    unew[r] = fm.dot(sys.K.row(r), x);
    worst = std::max(worst, unew[r].err);
  }
  std::vector<Interval> xnew(n);
  for (int r = 0; r < n; ++r) {
    Interval ax = fm.dot(sys.A.row(r), x);
    Interval bu = fm.dot(sys.B.row(r), u);
    xnew[r] = fm.add(ax, bu);
    worst = std::max(worst, xnew[r].err);
  }
  for (int c = 0; c < q; ++c) {
    Interval yc = fm.dot(sys.C.row(c), xnew);
    worst = std::max(worst, yc.err);
  }
  return worst;
}

}  // namespace precsched
