#include "precsched/qp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace precsched {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct RowView {
  const QpProblem& p;
  int dense_rows;
  int total_rows;

  explicit RowView(const QpProblem& q)
      : p(q),
        dense_rows(static_cast<int>(q.Ad.rows())),
        total_rows(q.num_rows()) {}

  double rhs(int r) const {
    return r < dense_rows ? p.bd[r] : p.rows[r - dense_rows].rhs;
  }

  // y = G v
  VectorXd apply(const VectorXd& v) const {
    VectorXd y(total_rows);
    if (dense_rows > 0) y.head(dense_rows) = p.Ad * v.head(p.nz);
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
      double acc = 0.0;
      for (const auto& [i, c] : p.rows[r].terms) acc += c * v[i];
      y[dense_rows + r] = acc;
    }
    return y;
  }

  // y = G' w
  VectorXd apply_t(const VectorXd& w) const {
    VectorXd y = VectorXd::Zero(p.nv);
    if (dense_rows > 0) y.head(p.nz) = p.Ad.transpose() * w.head(dense_rows);
    for (std::size_t r = 0; r < p.rows.size(); ++r)
      for (const auto& [i, c] : p.rows[r].terms) y[i] += c * w[dense_rows + r];
    return y;
  }

  // M = H + G' diag(d) G + reg I
  MatrixXd normal_matrix(const VectorXd& d, double reg) const {
    MatrixXd M = MatrixXd::Zero(p.nv, p.nv);
    if (p.nz > 0) M.topLeftCorner(p.nz, p.nz) = p.H;
    if (dense_rows > 0)
      M.topLeftCorner(p.nz, p.nz).noalias() +=
          p.Ad.transpose() * d.head(dense_rows).asDiagonal() * p.Ad;
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
      const double dr = d[dense_rows + r];
      for (const auto& [i, ci] : p.rows[r].terms)
        for (const auto& [j, cj] : p.rows[r].terms) M(i, j) += dr * ci * cj;
    }
    M.diagonal().array() += reg;
    return M;
  }
};

double objective_value(const QpProblem& p, const VectorXd& v) {
  double obj = p.c0 + p.g.dot(v);
  if (p.nz > 0) obj += 0.5 * v.head(p.nz).dot(p.H * v.head(p.nz));
  return obj;
}

VectorXd dual_residual(const QpProblem& p, const RowView& G, const VectorXd& v,
                       const VectorXd& lambda) {
  VectorXd r = p.g;
  if (p.nz > 0) r.head(p.nz) += p.H * v.head(p.nz);
  if (G.total_rows > 0) r += G.apply_t(lambda);
  return r;
}

// Largest alpha in (0, cap] keeping w + alpha*dw >= (1 - cap) * ... standard
// fraction-to-boundary rule.
double step_length(const VectorXd& w, const VectorXd& dw, double cap) {
  double alpha = cap;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (dw[i] < 0.0) alpha = std::min(alpha, -w[i] / dw[i] * cap);
  return alpha;
}

}  // namespace

QpResult solve_qp(const QpProblem& p, const QpOptions& opts) {
  QpResult res;
  const RowView G(p);
  const int nr = G.total_rows;
  const double hmax = p.nz > 0 ? p.H.cwiseAbs().maxCoeff() : 0.0;
  double rhs_max = p.bd.size() > 0 ? p.bd.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& row : p.rows) rhs_max = std::max(rhs_max, std::abs(row.rhs));
  const double scale =
      1.0 + std::max(p.g.size() > 0 ? p.g.cwiseAbs().maxCoeff() : 0.0, rhs_max);
  const double reg = 1e-12 * (1.0 + hmax);

  if (nr == 0) {
    // Unconstrained: one Newton solve.
    MatrixXd M = MatrixXd::Zero(p.nv, p.nv);
    if (p.nz > 0) M.topLeftCorner(p.nz, p.nz) = p.H;
    M.diagonal().array() += reg;
    Eigen::LLT<MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
      res.status = QpStatus::numerical;
      res.diagnostics = "unconstrained Hessian is not positive definite";
      return res;
    }
    res.v = llt.solve(-p.g);
    res.lambda = VectorXd();
    res.objective = objective_value(p, res.v);
    res.kkt_residual =
        dual_residual(p, G, res.v, VectorXd()).cwiseAbs().maxCoeff() / scale;
    res.status = res.kkt_residual <= opts.tol * 10 ? QpStatus::solved : QpStatus::numerical;
    res.iterations = 1;
    return res;
  }

  VectorXd v = VectorXd::Zero(p.nv);
  VectorXd gv = G.apply(v);
  VectorXd s(nr), lambda = VectorXd::Ones(nr);
  for (int r = 0; r < nr; ++r) s[r] = std::max(1.0, gv[r] - G.rhs(r) + 1.0);

  // Near the boundary the scaled normal matrix can lose positive
  // definiteness to roundoff; retry with a stiffer shift before giving up.
  auto factor = [&](const MatrixXd& base) {
    std::optional<Eigen::LLT<MatrixXd>> out;
    double shift = 0.0;
    for (int attempt = 0; attempt < 6; ++attempt) {
      MatrixXd M = base;
      if (shift > 0.0) M.diagonal().array() += shift;
      Eigen::LLT<MatrixXd> llt(M);
      if (llt.info() == Eigen::Success) {
        out = std::move(llt);
        break;
      }
      shift = shift == 0.0 ? 1e6 * reg : shift * 1e4;
    }
    return out;
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    gv = G.apply(v);
    VectorXd r_p = gv + s;
    for (int r = 0; r < nr; ++r) r_p[r] -= G.rhs(r);
    VectorXd r_d = dual_residual(p, G, v, lambda);
    const double mu = s.dot(lambda) / nr;
    const double kkt =
        std::max({r_d.cwiseAbs().maxCoeff(), r_p.cwiseAbs().maxCoeff(), mu}) / scale;
    res.iterations = it;
    if (kkt <= opts.tol) {
      res.status = QpStatus::solved;
      res.v = v;
      res.lambda = lambda;
      res.objective = objective_value(p, v);
      res.kkt_residual = kkt;
      return res;
    }

    VectorXd d = lambda.cwiseQuotient(s);
    auto llt_opt = factor(G.normal_matrix(d, reg));
    if (!llt_opt) {
      // Accept a nearly converged iterate rather than failing the node.
      res.v = v;
      res.lambda = lambda;
      res.kkt_residual = kkt;
      if (kkt <= opts.tol * 1e4) {
        res.status = QpStatus::solved;
        res.objective = objective_value(p, v);
        return res;
      }
      std::ostringstream diag;
      diag << "normal matrix factorization failed at iteration " << it
           << " (mu=" << mu << ")";
      res.status = QpStatus::numerical;
      res.diagnostics = diag.str();
      return res;
    }
    Eigen::LLT<MatrixXd>& llt = *llt_opt;

    auto solve_direction = [&](const VectorXd& rc) {
      // rc is the target for the complementarity equation: lambda*ds + s*dl = -rc
      VectorXd rhs = -r_d;
      VectorXd w(nr);
      for (int r = 0; r < nr; ++r) w[r] = d[r] * r_p[r] - rc[r] / s[r];
      rhs -= G.apply_t(w);
      VectorXd dv = llt.solve(rhs);
      VectorXd gdv = G.apply(dv);
      VectorXd dl(nr), ds(nr);
      for (int r = 0; r < nr; ++r) {
        dl[r] = d[r] * (r_p[r] + gdv[r]) - rc[r] / s[r];
        ds[r] = (-rc[r] - s[r] * dl[r]) / lambda[r];
      }
      return std::make_tuple(dv, dl, ds);
    };

    // Predictor.
    VectorXd rc_aff = s.cwiseProduct(lambda);
    auto [dv_aff, dl_aff, ds_aff] = solve_direction(rc_aff);
    const double ap_aff = step_length(s, ds_aff, 1.0);
    const double ad_aff = step_length(lambda, dl_aff, 1.0);
    const double mu_aff =
        (s + ap_aff * ds_aff).dot(lambda + ad_aff * dl_aff) / nr;
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector.
    VectorXd rc = rc_aff + ds_aff.cwiseProduct(dl_aff) -
                  VectorXd::Constant(nr, sigma * mu);
    auto [dv, dl, ds] = solve_direction(rc);
    const double ap = step_length(s, ds, 0.995);
    const double ad = step_length(lambda, dl, 0.995);
    if (ap < 1e-13 && ad < 1e-13) {
      res.v = v;
      res.lambda = lambda;
      res.kkt_residual = kkt;
      if (kkt <= opts.tol * 1e4) {
        res.status = QpStatus::solved;
        res.objective = objective_value(p, v);
        return res;
      }
      std::ostringstream diag;
      diag << "step collapse at iteration " << it << " (mu=" << mu
           << ", primal residual=" << r_p.cwiseAbs().maxCoeff() << ")";
      res.status = QpStatus::numerical;
      res.diagnostics = diag.str();
      return res;
    }
    v += ap * dv;
    s += ap * ds;
    lambda += ad * dl;
  }

  gv = G.apply(v);
  VectorXd r_p = gv + s;
  for (int r = 0; r < nr; ++r) r_p[r] -= G.rhs(r);
  const VectorXd r_d = dual_residual(p, G, v, lambda);
  res.kkt_residual = std::max({r_d.cwiseAbs().maxCoeff(),
                               r_p.cwiseAbs().maxCoeff(),
                               s.dot(lambda) / nr}) /
                     scale;
  res.status =
      res.kkt_residual <= opts.tol * 1e4 ? QpStatus::solved : QpStatus::max_iter;
  res.diagnostics = "iteration limit reached";
  res.v = v;
  res.lambda = lambda;
  res.objective = objective_value(p, v);
  return res;
}

double qp_phase1_max_violation(const QpProblem& p, VectorXd* v_out, int* worst_row) {
  // minimize t subject to every row relaxed by t, t >= -1.
  QpProblem p1;
  p1.nv = p.nv + 1;
  p1.nz = p.nz;
  p1.H = MatrixXd::Zero(p.nz, p.nz);
  p1.g = VectorXd::Zero(p1.nv);
  p1.g[p.nv] = 1.0;
  const int t = p.nv;
  if (p.Ad.rows() > 0) {
    // dense rows gain the -t term, expressed as sparse rows to keep Ad intact
    for (Eigen::Index r = 0; r < p.Ad.rows(); ++r) {
      QpSparseRow row;
      row.terms.reserve(p.nz + 1);
      for (int c = 0; c < p.nz; ++c)
        if (p.Ad(r, c) != 0.0) row.terms.emplace_back(c, p.Ad(r, c));
      row.terms.emplace_back(t, -1.0);
      row.rhs = p.bd[r];
      p1.rows.push_back(std::move(row));
    }
  }
  for (const auto& row : p.rows) {
    QpSparseRow r1;
    r1.terms = row.terms;
    r1.terms.emplace_back(t, -1.0);
    r1.rhs = row.rhs;
    p1.rows.push_back(std::move(r1));
  }
  p1.rows.push_back({{{t, -1.0}}, 1.0});  // t >= -1

  QpOptions opts;
  opts.tol = 1e-10;
  QpResult r = solve_qp(p1, opts);
  if (r.status != QpStatus::solved && r.status != QpStatus::max_iter)
    throw std::runtime_error("phase-1 feasibility solve failed: " + r.diagnostics);

  const VectorXd v = r.v.head(p.nv);
  if (v_out) *v_out = v;
  const RowView G(p);
  VectorXd gv = G.apply(v);
  double worst = -std::numeric_limits<double>::infinity();
  int arg = -1;
  for (int row = 0; row < G.total_rows; ++row) {
    const double viol = gv[row] - G.rhs(row);
    if (viol > worst) {
      worst = viol;
      arg = row;
    }
  }
  if (worst_row) *worst_row = arg;
  return worst;
}

}  // namespace precsched
