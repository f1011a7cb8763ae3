#pragma once

#include <memory>
#include <string>
#include <vector>

#include "precsched/intervals.hpp"
#include "precsched/lti.hpp"

namespace precsched {

enum class VarKind { binary, continuous };

struct MiqpVariable {
  std::string name;
  VarKind kind = VarKind::continuous;
};

struct LinTerm {
  int var = 0;
  double coef = 0.0;
};

enum class RowSense { eq, le };

struct LinRow {
  std::vector<LinTerm> terms;
  RowSense sense = RowSense::eq;
  double rhs = 0.0;
  std::string tag;  // diagnostics only; presolve never keys off it
};

// Quadratic objective term coef * v_i * v_j with i <= j.
struct QuadTerm {
  int i = 0, j = 0;
  double coef = 0.0;
};

// Index maps from sample indices into the variable table.
struct MiqpLayout {
  int N = 0, n = 0, m = 0, q = 0;
  std::vector<int> sw;          // size N+1
  std::vector<int> e;           // size N+1; e[0] = -1 (sample 0 is exact)
  std::vector<int> x, u, y;     // size N+1, id of component 0
  std::vector<int> chi;         // one per in-window sample, flattened in order
  std::vector<int> chi_sample;  // sample index of each chi
};

// The full schedule MIQP: binaries sw_i, XOR auxiliaries chi_i,
// continuous trajectory variables, explicit linear rows, and the convex
// quadratic objective w1*z1 + w2*z2 (z2 in deviation coordinates unless the
// scenario says raw).
struct MiqpProblem {
  std::vector<MiqpVariable> vars;
  std::vector<LinRow> rows;
  std::vector<QuadTerm> quad;   // objective, upper triangle
  std::vector<LinTerm> lin;     // objective linear part
  double constant = 0.0;        // objective constant

  MiqpLayout layout;
  SwitchingWindows windows;
  SystemSpec sys;
  ScenarioSpec scen;
  double w1 = 1.0, w2 = 1.0;

  int num_vars() const { return static_cast<int>(vars.size()); }
};

// XOR linearization gadget (Table 2): appends chi >= a-b, chi >= b-a,
// chi <= 2-(a+b), chi <= a+b as <= rows over existing variable ids.
void encode_xor(std::vector<LinRow>& rows, int chi, int a, int b);

// Builds the complete program: error selection e_i = e_lo(1-sw_i)+e_hi*sw_i,
// error-inclusive dynamics, settling band rows, per-window XOR/cardinality
// switching rows, inter-window freezes, sw pinned hi before the first window,
// and the weighted objective. Throws std::invalid_argument when a window
// reaches past sample N.
MiqpProblem build_schedule_program(const SystemSpec& sys,
                                   const ScenarioSpec& scen,
                                   const SwitchingWindows& windows,
                                   double w1 = 1.0, double w2 = 1.0);

// Affine expression of one sw variable after presolve: value = constant when
// free_index < 0, else z[free_index].
struct SwExpr {
  int free_index = -1;
  double constant = 0.0;
};

enum class PresolveStatus { ok, infeasible };

// Fix/alias analysis over the explicit rows: single-variable equality rows
// become fixings, two-variable difference rows become aliases (union-find),
// two-variable rows linking a continuous variable to a binary become
// substitutions. Free binaries are the unfixed representatives, ordered by
// sample.
struct ReducedProblem {
  PresolveStatus status = PresolveStatus::ok;
  std::string infeasibility;            // set when status == infeasible
  std::shared_ptr<const MiqpProblem> full;
  std::vector<int> free_samples;        // sample index per free binary
  std::vector<SwExpr> sw_expr;          // per sample 0..N
  // substitution var -> (constant, coefficient, other var); back-substitution
  // for eliminated continuous variables (the e_i chain).
  struct Substitution {
    int var = -1;
    double constant = 0.0;
    double coef = 0.0;
    int on = -1;
  };
  std::vector<Substitution> subs;

  int free_count() const { return static_cast<int>(free_samples.size()); }
  // sw values per sample 0..N for a free-binary assignment.
  std::vector<double> sw_values(const Eigen::VectorXd& z) const;
};

ReducedProblem presolve(std::shared_ptr<const MiqpProblem> p);

// Error offsets e_1..e_N (index 0 unused) induced by fractional sw values.
std::vector<double> error_offsets(const MiqpProblem& p,
                                  const std::vector<double>& sw);

// Deterministic plain-text export (variable list, rows, quadratic triplets)
// for cross-checking against external solvers.
std::string export_problem_text(const MiqpProblem& p);

}  // namespace precsched
