#include "precsched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace precsched {

void Schedule::validate(bool require_first_hi) const {
  if (segments.empty()) throw std::invalid_argument("schedule has no segments");
  if (N < 0) throw std::invalid_argument("schedule horizon is negative");
  if (segments.front().start != 0)
    throw std::invalid_argument("first segment must start at sample 0");
  if (segments.back().end != N)
    throw std::invalid_argument("last segment must end at sample N");
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& s = segments[k];
    if (s.start > s.end) {
      std::ostringstream os;
      os << "segment " << k << " is empty: [" << s.start << ", " << s.end << "]";
      throw std::invalid_argument(os.str());
    }
    if (k > 0) {
      if (s.start != segments[k - 1].end + 1) {
        std::ostringstream os;
        os << "segment " << k << " starts at " << s.start
           << " but the previous segment ends at " << segments[k - 1].end;
        throw std::invalid_argument(os.str());
      }
      if (s.prec == segments[k - 1].prec) {
        std::ostringstream os;
        os << "segments " << k - 1 << " and " << k << " share a precision";
        throw std::invalid_argument(os.str());
      }
    }
  }
  if (require_first_hi && segments.front().prec != Precision::hi)
    throw std::invalid_argument("synthesized schedule must start hi");
}

Precision Schedule::at(int sample) const {
  if (sample < 0 || sample > N)
    throw std::out_of_range("sample " + std::to_string(sample) +
                            " outside schedule horizon");
  auto it = std::upper_bound(
      segments.begin(), segments.end(), sample,
      [](int s, const ScheduleSegment& seg) { return s < seg.start; });
  return std::prev(it)->prec;
}

std::vector<Precision> Schedule::expand() const {
  std::vector<Precision> out(static_cast<std::size_t>(N) + 1, Precision::hi);
  for (const auto& seg : segments)
    for (int i = seg.start; i <= seg.end && i <= N; ++i) out[i] = seg.prec;
  return out;
}

double Schedule::lo_fraction() const {
  if (N < 0) return 0.0;
  double lo = 0.0;
  for (const auto& seg : segments)
    if (seg.prec == Precision::lo) lo += seg.end - seg.start + 1;
  return lo / (N + 1);
}

Schedule Schedule::from_samples(const std::vector<int>& sw) {
  if (sw.empty()) throw std::invalid_argument("empty sample assignment");
  Schedule s;
  s.N = static_cast<int>(sw.size()) - 1;
  auto prec_of = [](int v) {
    if (v != 0 && v != 1)
      throw std::invalid_argument("sample assignment entries must be 0 or 1");
    return v == 1 ? Precision::hi : Precision::lo;
  };
  ScheduleSegment cur{0, 0, prec_of(sw[0])};
  for (int i = 1; i <= s.N; ++i) {
    const Precision p = prec_of(sw[i]);
    if (p == cur.prec) {
      cur.end = i;
    } else {
      s.segments.push_back(cur);
      cur = {i, i, p};
    }
  }
  s.segments.push_back(cur);
  return s;
}

Schedule Schedule::uniform(int N, Precision p) {
  Schedule s;
  s.N = N;
  s.segments = {{0, N, p}};
  return s;
}

Schedule schedule_from_solution(const MiqpSolution& sol) {
  if (!sol.has_incumbent())
    throw std::invalid_argument("solution carries no schedule");
  return Schedule::from_samples(sol.sw);
}

std::vector<double> schedule_error_offsets(const Schedule& sched,
                                           const ScenarioSpec& scen) {
  std::vector<double> e(static_cast<std::size_t>(sched.N) + 1, 0.0);
  const std::vector<Precision> per = sched.expand();
  for (int i = 1; i <= sched.N; ++i)
    e[i] = per[i] == Precision::lo ? scen.e_lo : scen.e_hi;
  return e;
}

double modeled_runtime(const Schedule& sched, const ScenarioSpec& scen) {
  double total = 0.0;
  for (const auto& seg : sched.segments)
    total += (seg.end - seg.start + 1) *
             (seg.prec == Precision::lo ? scen.t_lo : scen.t_hi);
  return total;
}

bool switches_legal(const Schedule& sched, const SwitchingWindows& windows,
                    std::string* why) {
  std::vector<int> used(windows.windows.size(), 0);
  for (std::size_t k = 1; k < sched.segments.size(); ++k) {
    const int s = sched.segments[k].start;
    int host = -1;
    for (std::size_t b = 0; b < windows.windows.size(); ++b)
      if (windows.windows[b].first <= s && s <= windows.windows[b].second)
        host = static_cast<int>(b);
    if (host < 0) {
      if (why) *why = "switch at sample " + std::to_string(s) + " is outside every window";
      return false;
    }
    if (++used[host] > 1) {
      if (why)
        *why = "window " + std::to_string(host) + " hosts more than one switch";
      return false;
    }
  }
  return true;
}

VerificationReport verify_schedule(const Schedule& sched, const SystemSpec& sys,
                                   const ScenarioSpec& scen,
                                   const PrecisionPair& prec) {
  sched.validate();
  const int N = scen.sample_count(sys.h);
  if (sched.N != N)
    throw std::invalid_argument("schedule horizon " + std::to_string(sched.N) +
                                " does not match the scenario (" +
                                std::to_string(N) + ")");
  VerificationReport rep;

  Trajectory model =
      simulate_with_offsets(sys, scen, schedule_error_offsets(sched, scen));
  SettlingReport model_settle;
  if (scen.symmetric_errors) {
    // Fold the offset magnitude into the trajectory: the band check then
    // covers both error signs at once.
    const Trajectory nominal = simulate_nominal(sys, scen);
    Trajectory widened = nominal;
    for (int i = 0; i <= N; ++i) {
      const int j = active_step(scen, sys.h, i);
      const VectorXd& gamma = scen.steps[j].gamma;
      for (int c = 0; c < sys.q(); ++c) {
        const double spread = std::abs(model.y[i][c] - nominal.y[i][c]);
        const double side = nominal.y[i][c] >= gamma[c] ? 1.0 : -1.0;
        widened.y[i][c] = nominal.y[i][c] + side * spread;
      }
    }
    model_settle = check_settling(widened, sys, scen);
  } else {
    model_settle = check_settling(model, sys, scen);
  }
  rep.model_band_ok = model_settle.pass;
  rep.model_violation = model_settle.first_violation;
  rep.model_cost = lqr_cost(
      scen.deviation_cost ? deviation_trajectory(sys, scen, model) : model,
      sys.Q, sys.R);

  Trajectory emu = simulate_rounded(sys, scen, sched, prec);
  rep.emulated_nonfinite = !emu.finite();
  SettlingReport emu_settle = check_settling(emu, sys, scen);
  rep.emulated_band_ok = emu_settle.pass && emu.finite();
  rep.emulated_violation = emu_settle.first_violation;
  rep.emulated_cost = lqr_cost(
      scen.deviation_cost ? deviation_trajectory(sys, scen, emu) : emu, sys.Q,
      sys.R);

  rep.modeled_runtime = modeled_runtime(sched, scen);
  rep.switch_count = sched.switch_count();
  rep.lo_fraction = sched.lo_fraction();
  return rep;
}

ComparisonTable compare_baselines(const SystemSpec& sys, const ScenarioSpec& scen,
                                  const Schedule& sched,
                                  const PrecisionPair& prec) {
  const int N = scen.sample_count(sys.h);
  ComparisonTable table;
  const Schedule all_lo = Schedule::uniform(N, Precision::lo);
  const Schedule all_hi = Schedule::uniform(N, Precision::hi);
  const VerificationReport hi = verify_schedule(all_hi, sys, scen, prec);

  auto row = [&](const std::string& name, const Schedule& s) {
    const VerificationReport r =
        name == "all-hi" ? hi : verify_schedule(s, sys, scen, prec);
    BaselineRow out;
    out.name = name;
    out.model_cost = r.model_cost;
    out.emulated_cost = r.emulated_cost;
    out.modeled_runtime = r.modeled_runtime;
    out.model_band_ok = r.model_band_ok;
    out.emulated_band_ok = r.emulated_band_ok;
    out.runtime_vs_hi_pct =
        (r.modeled_runtime - hi.modeled_runtime) / hi.modeled_runtime * 100.0;
    out.model_cost_vs_hi_pct =
        (r.model_cost - hi.model_cost) / hi.model_cost * 100.0;
    return out;
  };
  table.rows.push_back(row("all-lo", all_lo));
  table.rows.push_back(row("all-hi", all_hi));
  table.rows.push_back(row("switching", sched));
  return table;
}

SynthesisResult synthesize_schedule(const SystemSpec& sys,
                                    const ScenarioSpec& scen,
                                    const SynthesisOptions& opts) {
  sys.validate();
  scen.validate(sys.q());

  TimingMetrics metrics;
  if (opts.metrics) {
    metrics = *opts.metrics;
  } else {
    metrics = time_domain_metrics(sys, scen.steps[0].gamma, scen.steps[0].delta,
                                  scen.horizon);
  }

  const int N = scen.sample_count(sys.h);
  WindowsBuild wb = build_switching_windows(scen, metrics, sys.h, N);

  auto program = std::make_shared<const MiqpProblem>(
      build_schedule_program(sys, scen, wb.windows, opts.w1, opts.w2));
  ReducedProblem rp = presolve(program);
  if (rp.status == PresolveStatus::infeasible)
    throw std::runtime_error("no feasible schedule: " + rp.infeasibility);

  MiqpSolution sol = branch_and_bound(rp, opts.limits);
  if (sol.status == SolveStatus::infeasible || !sol.has_incumbent()) {
    std::string detail =
        sol.infeasibility.empty() ? "search exhausted" : sol.infeasibility;
    throw std::runtime_error("no feasible schedule: " + detail);
  }

  SynthesisResult result;
  result.schedule = schedule_from_solution(sol);
  result.schedule.validate(true);
  result.solution = std::move(sol);
  result.windows = wb.windows;
  result.warnings = std::move(wb.warnings);
  return result;
}

}  // namespace precsched
