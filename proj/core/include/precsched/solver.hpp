#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "precsched/miqp.hpp"
#include "precsched/qp.hpp"
#include "precsched/scheduler_types.hpp"

namespace precsched {

enum class SolveStatus { optimal, infeasible, gap_limit, node_limit };

std::string to_string(SolveStatus s);

struct SolveLimits {
  double gap_tol = 1e-6;                 // relative optimality gap to prove
  std::int64_t node_limit = 1000000;
  std::optional<double> stop_gap;        // coarser early-stop gap (status gap_limit)
  bool parallel = false;                 // multi-worker node exploration
  int threads = 0;                       // 0 = hardware_concurrency
};

struct MiqpSolution {
  SolveStatus status = SolveStatus::infeasible;
  std::vector<int> sw;        // per sample 0..N (empty when no incumbent)
  std::vector<double> chi;    // per chi variable, in layout order
  std::vector<double> e;      // per sample, e[0] = 0
  Trajectory traj;            // error-inclusive model trajectory
  double objective = std::numeric_limits<double>::quiet_NaN();
  double lower_bound = -std::numeric_limits<double>::infinity();
  double rel_gap = std::numeric_limits<double>::infinity();
  std::int64_t nodes = 0;
  std::string infeasibility;  // tightest violated band row when infeasible

  bool has_incumbent() const { return !sw.empty(); }
};

// Dense relaxation data shared by all nodes: the trajectory variables are
// eliminated (they are affine in the free binaries z), leaving a QP over
// v = [z, chi] with the band rows dense in z and the XOR/cardinality rows
// sparse.
struct CompiledRelaxation {
  int F = 0;                    // free binaries
  int nchi = 0;                 // one per in-window sample
  Eigen::MatrixXd H;            // F x F, from w2 * z2
  Eigen::VectorXd g;            // F, quadratic cross terms + w1 * z1 slope
  double c0 = 0.0;
  Eigen::MatrixXd band_A;       // band rows x F
  Eigen::VectorXd band_b;
  std::vector<std::string> band_tag;  // step/sample/component per row
  struct ChiLink {
    int sample = 0;
    int window = 0;
    SwExpr prev, cur;           // sw expressions entering the XOR gadget
  };
  std::vector<ChiLink> chi;
};

CompiledRelaxation compile_relaxation(const ReducedProblem& rp);

// Model trajectory induced by (possibly fractional) free-binary values.
Trajectory trajectory_at(const ReducedProblem& rp, const Eigen::VectorXd& z);

// Exact objective w1*z1 + w2*z2 at an integer assignment, via direct
// simulation (independent of the compiled quadratic form).
double objective_at(const ReducedProblem& rp, const std::vector<int>& z);

// Feasibility of the band rows at an integer assignment (1e-8 residual).
bool band_feasible_at(const ReducedProblem& rp, const std::vector<int>& z,
                      std::string* violated = nullptr);

struct QpRelaxResult {
  bool feasible = false;
  Eigen::VectorXd z;            // full-length, fixed entries at their values
  Eigen::VectorXd chi;
  double bound = -std::numeric_limits<double>::infinity();
  double kkt_residual = 0.0;
  std::string violated;         // offending row tag when infeasible
};

// Solves the node QP with the given partial assignment (-1 free, 0, 1).
// Infeasibility is certified by phase-1. Throws std::runtime_error with
// condition diagnostics on numerical failure.
QpRelaxResult solve_qp_relaxation(const CompiledRelaxation& cr,
                                  const std::vector<std::int8_t>& fixings);

// Best-first branch and bound over the compiled relaxation. Branches on the
// most fractional binary (ties to the lowest index), warm-starts from the
// all-hi schedule, prunes against the incumbent, deterministic in
// single-worker mode.
MiqpSolution branch_and_bound(const ReducedProblem& rp,
                              const SolveLimits& limits = {});

struct BruteForceResult {
  bool feasible = false;
  std::vector<int> sw;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t candidates = 0;
};

// Exhaustive oracle: per window, either no switch or a switch at one of its
// samples, chained from the initial hi state; candidates evaluated by direct
// simulation and band check; ties broken toward the lexicographically
// hi-preferring schedule. Throws std::runtime_error carrying the cardinality
// when the space exceeds 10^6.
BruteForceResult brute_force_schedule_search(const SystemSpec& sys,
                                             const ScenarioSpec& scen,
                                             const SwitchingWindows& windows,
                                             double w1 = 1.0, double w2 = 1.0);

}  // namespace precsched
