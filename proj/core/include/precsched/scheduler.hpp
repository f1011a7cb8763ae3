#pragma once

#include <optional>
#include <string>
#include <vector>

#include "precsched/intervals.hpp"
#include "precsched/lti.hpp"
#include "precsched/precision.hpp"
#include "precsched/scheduler_types.hpp"
#include "precsched/solver.hpp"

namespace precsched {

struct VerificationReport {
  // Error-bounded model check.
  bool model_band_ok = false;
  std::optional<SettlingViolation> model_violation;
  double model_cost = 0.0;  // LQR cost of the error-inclusive trajectory
  // Bit-accurate emulation check.
  bool emulated_band_ok = false;
  bool emulated_nonfinite = false;
  std::optional<SettlingViolation> emulated_violation;
  double emulated_cost = 0.0;  // NaN when non-finite
  // Schedule economics.
  double modeled_runtime = 0.0;  // sum of per-sample t_p
  int switch_count = 0;
  double lo_fraction = 0.0;
};

struct BaselineRow {
  std::string name;  // "all-lo" | "all-hi" | "switching"
  double model_cost = 0.0;
  double emulated_cost = 0.0;
  double modeled_runtime = 0.0;
  bool model_band_ok = false;
  bool emulated_band_ok = false;
  double runtime_vs_hi_pct = 0.0;   // (runtime - hi) / hi * 100
  double model_cost_vs_hi_pct = 0.0;
};

struct ComparisonTable {
  std::vector<BaselineRow> rows;  // all-lo, all-hi, switching
};

struct SynthesisResult {
  Schedule schedule;
  MiqpSolution solution;
  SwitchingWindows windows;
  std::vector<std::string> warnings;
};

struct SynthesisOptions {
  double w1 = 1.0, w2 = 1.0;
  SolveLimits limits;
  std::optional<TimingMetrics> metrics;  // computed from the first step if absent
};

// Full pipeline: windows -> program -> presolve -> branch and bound ->
// run-length extraction. Throws std::runtime_error ("no feasible schedule",
// naming the tightest violated band row) when the MIQP is infeasible.
SynthesisResult synthesize_schedule(const SystemSpec& sys,
                                    const ScenarioSpec& scen,
                                    const SynthesisOptions& opts = {});

// Model + emulation checks, costs, and economics for any schedule.
VerificationReport verify_schedule(const Schedule& sched, const SystemSpec& sys,
                                   const ScenarioSpec& scen,
                                   const PrecisionPair& prec);

// all-lo / all-hi / switching comparison, percentage deltas against all-hi.
ComparisonTable compare_baselines(const SystemSpec& sys, const ScenarioSpec& scen,
                                  const Schedule& sched,
                                  const PrecisionPair& prec);

// Schedule induced by a solved sw assignment.
Schedule schedule_from_solution(const MiqpSolution& sol);

// Per-sample model error offsets for a schedule (e_lo / e_hi by segment).
std::vector<double> schedule_error_offsets(const Schedule& sched,
                                           const ScenarioSpec& scen);

// Modeled runtime sum(t_p) of a schedule.
double modeled_runtime(const Schedule& sched, const ScenarioSpec& scen);

// True when every precision change lands inside a window, at most one per
// window (checkable from segments and windows alone).
bool switches_legal(const Schedule& sched, const SwitchingWindows& windows,
                    std::string* why = nullptr);

}  // namespace precsched
