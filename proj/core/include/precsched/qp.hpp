#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace precsched {

// Convex QP  min 1/2 v'Hv + g'v + c0  s.t.  Ad v[0..nz) <= bd,  sparse rows
// <= rhs. H acts on the leading nz variables (the trailing ones carry no
// curvature); dense rows also touch only the leading block. Box bounds are
// expressed as 1-sparse rows by the caller.
struct QpSparseRow {
  std::vector<std::pair<int, double>> terms;
  double rhs = 0.0;
};

struct QpProblem {
  int nv = 0;  // total variables
  int nz = 0;  // leading dense-block variables, nz <= nv
  Eigen::MatrixXd H;   // nz x nz
  Eigen::VectorXd g;   // nv
  double c0 = 0.0;
  Eigen::MatrixXd Ad;  // dense rows x nz
  Eigen::VectorXd bd;
  std::vector<QpSparseRow> rows;

  int num_rows() const { return static_cast<int>(Ad.rows() + rows.size()); }
};

enum class QpStatus { solved, infeasible, max_iter, numerical };

struct QpResult {
  QpStatus status = QpStatus::numerical;
  Eigen::VectorXd v;
  Eigen::VectorXd lambda;   // one multiplier per row (dense rows first)
  double objective = 0.0;
  double kkt_residual = 0.0;  // scaled max of dual/primal/complementarity residuals
  int iterations = 0;
  std::string diagnostics;
};

struct QpOptions {
  double tol = 1e-9;   // scaled KKT target (contract is <= 1e-8)
  int max_iterations = 120;
};

// Primal-dual Mehrotra predictor-corrector interior point method,
// infeasible-start. Deterministic.
QpResult solve_qp(const QpProblem& p, const QpOptions& opts = {});

// Phase-1 feasibility: minimize t subject to every row relaxed by t. Returns
// the attained t (max violation at the returned point; <= 0 means a strictly
// feasible point was found). worst_row (optional) receives the row index with
// the largest violation at the phase-1 optimum.
double qp_phase1_max_violation(const QpProblem& p,
                               Eigen::VectorXd* v_out = nullptr,
                               int* worst_row = nullptr);

}  // namespace precsched
