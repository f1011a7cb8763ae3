#include "precsched/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace precsched {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::gap_limit: return "gap_limit";
    case SolveStatus::node_limit: return "node_limit";
  }
  return "unknown";
}

namespace {

// w1*z1 + w2*z2 at an integer per-sample assignment, by direct simulation.
double exact_objective(const SystemSpec& sys, const ScenarioSpec& scen,
                       double w1, double w2, const std::vector<double>& sw) {
  const int N = scen.sample_count(sys.h);
  std::vector<double> e(N + 1, 0.0);
  for (int i = 1; i <= N; ++i)
    e[i] = scen.e_lo * (1.0 - sw[i]) + scen.e_hi * sw[i];
  Trajectory traj = simulate_with_offsets(sys, scen, e);
  Trajectory costed = scen.deviation_cost ? deviation_trajectory(sys, scen, traj)
                                          : traj;
  double z1 = 0.0;
  for (int i = 0; i <= N; ++i)
    z1 += scen.t_lo + (scen.t_hi - scen.t_lo) * sw[i];
  return w1 * z1 + w2 * lqr_cost(costed, sys.Q, sys.R);
}

std::vector<double> sw_from_assignment(const ReducedProblem& rp,
                                       const std::vector<int>& z) {
  const int N = rp.full->layout.N;
  std::vector<double> sw(N + 1);
  for (int i = 0; i <= N; ++i) {
    const SwExpr& ex = rp.sw_expr[i];
    sw[i] = ex.free_index < 0 ? ex.constant
                              : static_cast<double>(z[ex.free_index]);
  }
  return sw;
}

}  // namespace

CompiledRelaxation compile_relaxation(const ReducedProblem& rp) {
  if (rp.status != PresolveStatus::ok)
    throw std::invalid_argument("cannot compile an infeasible reduction");
  const MiqpProblem& p = *rp.full;
  const SystemSpec& sys = p.sys;
  const ScenarioSpec& scen = p.scen;
  const int N = p.layout.N, n = p.layout.n, m = p.layout.m, q = p.layout.q;
  const int F = rp.free_count();
  const double de = scen.e_hi - scen.e_lo;
  const double dt = scen.t_hi - scen.t_lo;

  std::vector<SteadyState> ss(scen.steps.size());
  for (std::size_t j = 0; j < scen.steps.size(); ++j)
    ss[j] = solve_steady_state(sys, scen.steps[j].gamma);

  // Affine trajectory x_i = px[i] + Xz[i] z (same for u, y); the z-dependence
  // enters through e_i = e_lo + (e_hi - e_lo) sw_i and the one-sample input
  // delay of the loop.
  std::vector<VectorXd> px(N + 1), pu(N + 1), py(N + 1);
  std::vector<MatrixXd> Xz(N + 1), Uz(N + 1), Yz(N + 1);
  px[0] = sys.x0;
  pu[0] = sys.u0;
  py[0] = sys.C * sys.x0;
  Xz[0] = MatrixXd::Zero(n, F);
  Uz[0] = MatrixXd::Zero(m, F);
  Yz[0] = MatrixXd::Zero(q, F);
  for (int i = 1; i <= N; ++i) {
    const int j = active_step(scen, sys.h, i);
    const SwExpr& ex = rp.sw_expr[i];
    const double ce = scen.e_lo + de * (ex.free_index < 0 ? ex.constant : 0.0);
    pu[i] = ss[j].u_ss + sys.K * (px[i - 1] - ss[j].x_ss) + VectorXd::Constant(m, ce);
    px[i] = sys.A * px[i - 1] + sys.B * pu[i - 1] + VectorXd::Constant(n, ce);
    py[i] = sys.C * px[i] + VectorXd::Constant(q, ce);
    Uz[i].noalias() = sys.K * Xz[i - 1];
    Xz[i].noalias() = sys.A * Xz[i - 1] + sys.B * Uz[i - 1];
    Yz[i].noalias() = sys.C * Xz[i];
    if (ex.free_index >= 0) {
      Uz[i].col(ex.free_index).array() += de;
      Xz[i].col(ex.free_index).array() += de;
      Yz[i].col(ex.free_index).array() += de;
    }
  }

  CompiledRelaxation cr;
  cr.F = F;
  cr.H = MatrixXd::Zero(F, F);
  cr.g = VectorXd::Zero(F);
  cr.c0 = 0.0;

  for (int i = 0; i <= N; ++i) {
    const SwExpr& ex = rp.sw_expr[i];
    if (ex.free_index >= 0) {
      cr.g[ex.free_index] += p.w1 * dt;
      cr.c0 += p.w1 * scen.t_lo;
    } else {
      cr.c0 += p.w1 * (scen.t_lo + dt * ex.constant);
    }
    const int j = active_step(scen, sys.h, i);
    const VectorXd ax = scen.deviation_cost ? VectorXd(px[i] - ss[j].x_ss) : px[i];
    const VectorXd au = scen.deviation_cost ? VectorXd(pu[i] - ss[j].u_ss) : pu[i];
    const VectorXd Qax = sys.Q * ax;
    const VectorXd Rau = sys.R * au;
    cr.c0 += p.w2 * (ax.dot(Qax) + au.dot(Rau));
    cr.g.noalias() += 2.0 * p.w2 * (Xz[i].transpose() * Qax);
    cr.g.noalias() += 2.0 * p.w2 * (Uz[i].transpose() * Rau);
    cr.H.noalias() += 2.0 * p.w2 * (Xz[i].transpose() * (sys.Q * Xz[i]));
    cr.H.noalias() += 2.0 * p.w2 * (Uz[i].transpose() * (sys.R * Uz[i]));
  }

  // Band rows become dense rows over z; rows that cannot bind anywhere in the
  // unit box are dropped once here.
  std::vector<std::pair<int, int>> ydecode(p.num_vars(), {-1, -1});
  for (int i = 0; i <= N; ++i)
    for (int c = 0; c < q; ++c) ydecode[p.layout.y[i] + c] = {i, c};
  std::vector<Eigen::RowVectorXd> rows_kept;
  std::vector<double> rhs_kept;
  for (const auto& row : p.rows) {
    if (row.sense != RowSense::le || row.tag.rfind("band", 0) != 0) continue;
    Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(F);
    double rhs = row.rhs;
    for (const auto& t : row.terms) {
      const auto [yi, yc] = ydecode[t.var];
      if (yi < 0) throw std::logic_error("band row touches a non-output variable");
      a += t.coef * Yz[yi].row(yc);
      rhs -= t.coef * py[yi][yc];
    }
    const double worst = a.cwiseMax(0.0).sum();
    if (worst <= rhs - 1e-9 * (1.0 + std::abs(rhs))) continue;
    rows_kept.push_back(std::move(a));
    rhs_kept.push_back(rhs);
    cr.band_tag.push_back(row.tag);
  }
  cr.band_A.resize(static_cast<int>(rows_kept.size()), F);
  cr.band_b.resize(static_cast<int>(rows_kept.size()));
  for (std::size_t r = 0; r < rows_kept.size(); ++r) {
    cr.band_A.row(static_cast<int>(r)) = rows_kept[r];
    cr.band_b[static_cast<int>(r)] = rhs_kept[r];
  }

  cr.nchi = static_cast<int>(p.layout.chi.size());
  const auto& windows = p.windows.windows;
  for (int k = 0; k < cr.nchi; ++k) {
    CompiledRelaxation::ChiLink link;
    link.sample = p.layout.chi_sample[k];
    link.window = -1;
    for (std::size_t b = 0; b < windows.size(); ++b)
      if (windows[b].first <= link.sample && link.sample <= windows[b].second)
        link.window = static_cast<int>(b);
    if (link.window < 0) throw std::logic_error("chi sample outside every window");
    link.prev = rp.sw_expr[link.sample - 1];
    link.cur = rp.sw_expr[link.sample];
    cr.chi.push_back(link);
  }
  return cr;
}

Trajectory trajectory_at(const ReducedProblem& rp, const Eigen::VectorXd& z) {
  const MiqpProblem& p = *rp.full;
  std::vector<double> sw = rp.sw_values(z);
  return simulate_with_offsets(p.sys, p.scen, error_offsets(p, sw));
}

double objective_at(const ReducedProblem& rp, const std::vector<int>& z) {
  const MiqpProblem& p = *rp.full;
  return exact_objective(p.sys, p.scen, p.w1, p.w2, sw_from_assignment(rp, z));
}

bool band_feasible_at(const ReducedProblem& rp, const std::vector<int>& z,
                      std::string* violated) {
  const MiqpProblem& p = *rp.full;
  std::vector<double> sw = sw_from_assignment(rp, z);
  Trajectory traj = simulate_with_offsets(p.sys, p.scen, error_offsets(p, sw));
  if (!traj.finite()) {
    if (violated) *violated = "trajectory diverged";
    return false;
  }
  // Evaluate the explicit band rows against the simulated outputs; worst
  // violation wins the diagnostic.
  std::vector<std::pair<int, int>> ydecode(p.num_vars(), {-1, -1});
  for (int i = 0; i <= p.layout.N; ++i)
    for (int c = 0; c < p.layout.q; ++c) ydecode[p.layout.y[i] + c] = {i, c};
  double worst = 1e-8;
  const std::string* worst_tag = nullptr;
  for (const auto& row : p.rows) {
    if (row.sense != RowSense::le || row.tag.rfind("band", 0) != 0) continue;
    double lhs = 0.0;
    for (const auto& t : row.terms) {
      const auto [yi, yc] = ydecode[t.var];
      lhs += t.coef * traj.y[yi][yc];
    }
    if (lhs - row.rhs > worst) {
      worst = lhs - row.rhs;
      worst_tag = &row.tag;
    }
  }
  if (worst_tag) {
    if (violated) *violated = *worst_tag;
    return false;
  }
  return true;
}

namespace {

struct Resolved {
  bool is_const = true;
  double value = 0.0;  // when is_const
  int var = -1;        // node variable index otherwise
};

Resolved resolve_sw(const SwExpr& ex, const std::vector<std::int8_t>& fix,
                    const std::vector<int>& node_index) {
  Resolved r;
  if (ex.free_index < 0) {
    r.value = ex.constant;
    return r;
  }
  if (fix[ex.free_index] >= 0) {
    r.value = fix[ex.free_index];
    return r;
  }
  r.is_const = false;
  r.var = node_index[ex.free_index];
  return r;
}

}  // namespace

QpRelaxResult solve_qp_relaxation(const CompiledRelaxation& cr,
                                  const std::vector<std::int8_t>& fixings) {
  const int F = cr.F;
  if (static_cast<int>(fixings.size()) != F)
    throw std::invalid_argument("fixings size does not match free binaries");

  QpRelaxResult out;
  std::vector<int> node_index(F, -1);
  std::vector<int> free_list;
  for (int f = 0; f < F; ++f)
    if (fixings[f] < 0) {
      node_index[f] = static_cast<int>(free_list.size());
      free_list.push_back(f);
    }
  const int nf = static_cast<int>(free_list.size());

  // Fold fixed binaries into the objective.
  VectorXd zconst = VectorXd::Zero(F);
  for (int f = 0; f < F; ++f)
    if (fixings[f] >= 0) zconst[f] = fixings[f];
  double c0 = cr.c0 + cr.g.dot(zconst) + 0.5 * zconst.dot(cr.H * zconst);
  VectorXd g(nf);
  MatrixXd H(nf, nf);
  const VectorXd Hz = cr.H * zconst;
  for (int a = 0; a < nf; ++a) {
    g[a] = cr.g[free_list[a]] + Hz[free_list[a]];
    for (int b = 0; b < nf; ++b) H(a, b) = cr.H(free_list[a], free_list[b]);
  }

  // Chi bookkeeping: a link whose both endpoints are decided pins its chi.
  std::vector<Resolved> ra(cr.chi.size()), rb(cr.chi.size());
  std::vector<double> chi_const(cr.chi.size(), 0.0);
  std::vector<int> chi_var(cr.chi.size(), -1);
  int nchi_node = 0;
  int nwin = 0;
  for (std::size_t k = 0; k < cr.chi.size(); ++k) {
    nwin = std::max(nwin, cr.chi[k].window + 1);
    ra[k] = resolve_sw(cr.chi[k].prev, fixings, node_index);
    rb[k] = resolve_sw(cr.chi[k].cur, fixings, node_index);
    if (ra[k].is_const && rb[k].is_const)
      chi_const[k] = std::abs(ra[k].value - rb[k].value);
    else
      chi_var[k] = nf + nchi_node++;
  }

  QpProblem qp;
  qp.nv = nf + nchi_node;
  qp.nz = nf;
  qp.H = H;
  qp.g = VectorXd::Zero(qp.nv);
  qp.g.head(nf) = g;
  qp.c0 = c0;

  // Band rows with fixed binaries folded into the rhs; constant rows are
  // checked immediately.
  std::vector<int> band_row_of;  // dense row -> compiled band row
  {
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    for (int r = 0; r < cr.band_A.rows(); ++r) {
      double b = cr.band_b[r] - cr.band_A.row(r).dot(zconst);
      Eigen::RowVectorXd a(nf);
      for (int c = 0; c < nf; ++c) a[c] = cr.band_A(r, free_list[c]);
      if (nf == 0 || a.cwiseAbs().maxCoeff() == 0.0) {
        if (b < -1e-7) {
          out.feasible = false;
          out.violated = cr.band_tag[r];
          return out;
        }
        continue;
      }
      rows.push_back(std::move(a));
      rhs.push_back(b);
      band_row_of.push_back(r);
    }
    qp.Ad.resize(static_cast<int>(rows.size()), nf);
    qp.bd.resize(static_cast<int>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      qp.Ad.row(static_cast<int>(r)) = rows[r];
      qp.bd[static_cast<int>(r)] = rhs[r];
    }
  }

  // XOR gadgets for the undecided links, cardinality per window, unit boxes.
  std::vector<double> card_const(nwin, 0.0);
  std::vector<std::vector<int>> card_vars(nwin);
  for (std::size_t k = 0; k < cr.chi.size(); ++k) {
    const int w = cr.chi[k].window;
    if (chi_var[k] < 0) {
      card_const[w] += chi_const[k];
      continue;
    }
    card_vars[w].push_back(chi_var[k]);
    const Resolved& a = ra[k];
    const Resolved& b = rb[k];
    auto add_row = [&](double ca, double cb, double cchi, double rhs) {
      QpSparseRow row;
      if (!a.is_const && ca != 0.0) row.terms.emplace_back(a.var, ca);
      if (a.is_const) rhs -= ca * a.value;
      if (!b.is_const && cb != 0.0) row.terms.emplace_back(b.var, cb);
      if (b.is_const) rhs -= cb * b.value;
      row.terms.emplace_back(chi_var[k], cchi);
      row.rhs = rhs;
      qp.rows.push_back(std::move(row));
    };
    add_row(1.0, -1.0, -1.0, 0.0);   // chi >= a - b
    add_row(-1.0, 1.0, -1.0, 0.0);   // chi >= b - a
    add_row(1.0, 1.0, 1.0, 2.0);     // chi <= 2 - (a + b)
    add_row(-1.0, -1.0, 1.0, 0.0);   // chi <= a + b
  }
  for (int w = 0; w < nwin; ++w) {
    const double rhs = 1.0 - card_const[w];
    if (card_vars[w].empty()) {
      if (rhs < -1e-9) {
        out.feasible = false;
        char buf[64];
        std::snprintf(buf, sizeof buf, "window %d fixed to %d switches", w,
                      static_cast<int>(std::lround(card_const[w])));
        out.violated = buf;
        return out;
      }
      continue;
    }
    QpSparseRow row;
    for (int v : card_vars[w]) row.terms.emplace_back(v, 1.0);
    row.rhs = rhs;
    qp.rows.push_back(std::move(row));
  }
  for (int c = 0; c < nf; ++c) {
    qp.rows.push_back({{{c, -1.0}}, 0.0});  // z >= 0
    qp.rows.push_back({{{c, 1.0}}, 1.0});   // z <= 1
  }

  auto assemble = [&](const VectorXd& v) {
    out.z = zconst;
    for (int c = 0; c < nf; ++c)
      out.z[free_list[c]] = std::clamp(v[c], 0.0, 1.0);
    out.chi.resize(static_cast<int>(cr.chi.size()));
    for (std::size_t k = 0; k < cr.chi.size(); ++k)
      out.chi[static_cast<int>(k)] =
          chi_var[k] < 0 ? chi_const[k] : std::clamp(v[chi_var[k]], 0.0, 1.0);
  };

  if (qp.nv == 0) {
    out.feasible = true;
    out.bound = c0;
    out.z = zconst;
    out.chi.resize(static_cast<int>(cr.chi.size()));
    for (std::size_t k = 0; k < cr.chi.size(); ++k)
      out.chi[static_cast<int>(k)] = chi_const[k];
    return out;
  }

  QpResult res = solve_qp(qp);
  if (res.status == QpStatus::solved) {
    out.feasible = true;
    assemble(res.v);
    out.kkt_residual = res.kkt_residual;
    // Safety margin so the bound stays a true lower bound under inexact
    // convergence; looser finishes get a proportionally wider margin.
    const double margin = 1e-9 + 10.0 * res.kkt_residual;
    out.bound = res.objective - margin * (1.0 + std::abs(res.objective));
    return out;
  }

  // The interior-point loop stalled: certify via phase-1.
  VectorXd v1;
  int worst_row = -1;
  double viol = 0.0;
  try {
    viol = qp_phase1_max_violation(qp, &v1, &worst_row);
  } catch (const std::runtime_error&) {
    // Certification failed too; the node survives with a trivial bound and
    // its children settle the question (fully fixed nodes are exact).
    out.feasible = true;
    assemble(VectorXd::Constant(qp.nv, 0.5));
    out.bound = -std::numeric_limits<double>::infinity();
    return out;
  }
  if (viol > 1e-7) {
    out.feasible = false;
    if (worst_row >= 0 && worst_row < static_cast<int>(band_row_of.size()))
      out.violated = cr.band_tag[band_row_of[worst_row]];
    else
      out.violated = "switching constraints";
    return out;
  }
  // Feasible but numerically hard: keep the node alive with a trivial bound.
  out.feasible = true;
  assemble(v1);
  out.bound = -std::numeric_limits<double>::infinity();
  return out;
}

namespace {

struct Node {
  double bound = -std::numeric_limits<double>::infinity();
  std::int64_t id = 0;
  std::vector<std::int8_t> fix;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    return a.id > b.id;
  }
};

// Turns a fractional relaxation point into a legal schedule: per window, keep
// or flip the incoming precision based on the plateau the relaxation settles
// on at the window end; the flip lands on the largest adjacent change.
std::vector<int> legalize(const ReducedProblem& rp, const CompiledRelaxation& cr,
                          const Eigen::VectorXd& z) {
  const auto& windows = rp.full->windows.windows;
  std::vector<double> sw = rp.sw_values(z);
  std::vector<int> switch_at;
  int parity = 1;
  for (const auto& [L, U] : windows) {
    const int target = sw[U] >= 0.5 ? 1 : 0;
    if (target != parity) {
      int best = L;
      double best_jump = -1.0;
      for (int i = L; i <= U; ++i) {
        const double jump = std::abs(sw[i] - sw[i - 1]);
        if (jump > best_jump + 1e-12) {
          best_jump = jump;
          best = i;
        }
      }
      switch_at.push_back(best);
      parity = target;
    }
  }
  const int N = rp.full->layout.N;
  std::vector<int> full(N + 1, 1);
  std::size_t used = 0;
  int cur = 1;
  for (int i = 0; i <= N; ++i) {
    if (used < switch_at.size() && i == switch_at[used]) {
      cur = 1 - cur;
      ++used;
    }
    full[i] = cur;
  }
  // Map back to free-binary space.
  std::vector<int> zint(rp.free_count(), 1);
  for (int f = 0; f < rp.free_count(); ++f) zint[f] = full[rp.free_samples[f]];
  (void)cr;
  return zint;
}

}  // namespace

MiqpSolution branch_and_bound(const ReducedProblem& rp, const SolveLimits& limits) {
  MiqpSolution sol;
  if (rp.status == PresolveStatus::infeasible) {
    sol.status = SolveStatus::infeasible;
    sol.infeasibility = rp.infeasibility;
    return sol;
  }
  const MiqpProblem& p = *rp.full;
  const CompiledRelaxation cr = compile_relaxation(rp);
  const int F = cr.F;

  std::mutex mtx;
  std::condition_variable cv;
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  double inc_obj = std::numeric_limits<double>::infinity();
  std::vector<int> inc_z;
  double final_lb = -std::numeric_limits<double>::infinity();
  std::int64_t nodes = 0, next_id = 0;
  std::string root_infeasibility;
  bool root_processed = false;
  std::optional<SolveStatus> stop;

  auto try_incumbent = [&](const std::vector<int>& z) {
    std::string viol;
    if (!band_feasible_at(rp, z, &viol)) return;
    const double obj = objective_at(rp, z);
    if (!(obj < inc_obj)) return;
    inc_obj = obj;
    inc_z = z;
  };

  {
    std::vector<int> allhi(F, 1);
    try_incumbent(allhi);
  }

  open.push({-std::numeric_limits<double>::infinity(), next_id++,
             std::vector<std::int8_t>(static_cast<std::size_t>(F), -1)});

  auto rel_gap_now = [&](double lb) {
    if (!std::isfinite(inc_obj)) return std::numeric_limits<double>::infinity();
    return (inc_obj - lb) / std::max(1.0, std::abs(inc_obj));
  };

  // One worker's processing of a popped node; returns children to push.
  auto process = [&](const Node& nd, double current_inc,
                     std::vector<int>* heur_out, std::vector<int>* exact_out,
                     std::string* infeas_out) -> std::vector<Node> {
    QpRelaxResult res = solve_qp_relaxation(cr, nd.fix);
    if (!res.feasible) {
      if (infeas_out) *infeas_out = res.violated;
      return {};
    }
    if (res.bound >= current_inc - limits.gap_tol * std::max(1.0, std::abs(current_inc)))
      return {};
    int branch_f = -1;
    double max_frac = 0.0;
    for (int f = 0; f < F; ++f) {
      if (nd.fix[f] >= 0) continue;
      const double frac = std::abs(res.z[f] - std::round(res.z[f]));
      if (frac > max_frac + 1e-12) {
        max_frac = frac;
        branch_f = f;
      } else if (branch_f < 0) {
        branch_f = f;
      }
    }
    if (branch_f < 0 || max_frac <= 1e-7) {
      std::vector<int> zint(F);
      for (int f = 0; f < F; ++f)
        zint[f] = nd.fix[f] >= 0 ? nd.fix[f] : static_cast<int>(std::lround(res.z[f]));
      if (exact_out) *exact_out = std::move(zint);
      return {};
    }
    if (heur_out) *heur_out = legalize(rp, cr, res.z);
    std::vector<Node> children;
    for (int val = 0; val <= 1; ++val) {
      Node child;
      child.bound = res.bound;
      child.fix = nd.fix;
      child.fix[branch_f] = static_cast<std::int8_t>(val);
      children.push_back(std::move(child));
    }
    return children;
  };

  const int workers =
      limits.parallel
          ? std::max(1, limits.threads > 0
                            ? limits.threads
                            : static_cast<int>(std::thread::hardware_concurrency()))
          : 1;

  if (workers == 1) {
    while (!open.empty()) {
      const double lb = open.top().bound;
      if (std::isfinite(inc_obj)) {
        const double gap = rel_gap_now(lb);
        if (gap <= limits.gap_tol) {
          stop = SolveStatus::optimal;
          final_lb = lb;
          break;
        }
        if (limits.stop_gap && gap <= *limits.stop_gap) {
          stop = SolveStatus::gap_limit;
          final_lb = lb;
          break;
        }
      }
      if (nodes >= limits.node_limit) {
        stop = SolveStatus::node_limit;
        final_lb = lb;
        break;
      }
      Node nd = open.top();
      open.pop();
      ++nodes;
      std::vector<int> heur, exact_z;
      std::string infeas;
      auto children = process(nd, inc_obj, &heur, &exact_z, &infeas);
      if (!root_processed) {
        root_processed = true;
        if (!infeas.empty()) root_infeasibility = infeas;
      }
      if (!exact_z.empty()) try_incumbent(exact_z);
      if (!heur.empty()) try_incumbent(heur);
      for (auto& c : children) {
        c.id = next_id++;
        open.push(std::move(c));
      }
    }
  } else {
    // Parallel exploration: shared queue and incumbent; the proven gap uses
    // the minimum over queued and in-flight bounds. Objective is within the
    // gap of optimal; tie-breaking may differ run to run.
    std::vector<double> inflight(static_cast<std::size_t>(workers),
                                 std::numeric_limits<double>::infinity());
    int idle = 0;
    bool done = false;
    auto global_lb = [&]() {
      double lb = open.empty() ? std::numeric_limits<double>::infinity()
                               : open.top().bound;
      for (double b : inflight) lb = std::min(lb, b);
      return lb;
    };
    auto worker = [&](int wid) {
      std::unique_lock lock(mtx);
      for (;;) {
        while (!done && open.empty() && idle + 1 < workers) {
          ++idle;
          cv.wait(lock);
          --idle;
        }
        if (done) return;
        if (open.empty()) {
          // Everyone idle and nothing queued: search exhausted.
          done = true;
          cv.notify_all();
          return;
        }
        const double lb = global_lb();
        if (std::isfinite(inc_obj)) {
          const double gap = rel_gap_now(lb);
          if (gap <= limits.gap_tol) {
            stop = SolveStatus::optimal;
            final_lb = lb;
            done = true;
            cv.notify_all();
            return;
          }
          if (limits.stop_gap && gap <= *limits.stop_gap) {
            stop = SolveStatus::gap_limit;
            final_lb = lb;
            done = true;
            cv.notify_all();
            return;
          }
        }
        if (nodes >= limits.node_limit) {
          stop = SolveStatus::node_limit;
          final_lb = lb;
          done = true;
          cv.notify_all();
          return;
        }
        Node nd = open.top();
        open.pop();
        ++nodes;
        inflight[wid] = nd.bound;
        const double inc_snapshot = inc_obj;
        lock.unlock();
        std::vector<int> heur, exact_z;
        std::string infeas;
        auto children = process(nd, inc_snapshot, &heur, &exact_z, &infeas);
        lock.lock();
        if (!root_processed) {
          root_processed = true;
          if (!infeas.empty()) root_infeasibility = infeas;
        }
        if (!exact_z.empty()) try_incumbent(exact_z);
        if (!heur.empty()) try_incumbent(heur);
        for (auto& c : children) {
          c.id = next_id++;
          open.push(std::move(c));
        }
        inflight[wid] = std::numeric_limits<double>::infinity();
        cv.notify_all();
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }

  sol.nodes = nodes;
  if (!std::isfinite(inc_obj)) {
    sol.status = SolveStatus::infeasible;
    sol.infeasibility = root_infeasibility.empty()
                            ? "no feasible assignment found"
                            : root_infeasibility;
    return sol;
  }
  if (stop) {
    sol.status = *stop;
  } else {
    sol.status = SolveStatus::optimal;
    final_lb = inc_obj;  // search exhausted
  }
  sol.lower_bound = final_lb;
  sol.rel_gap = std::max(0.0, rel_gap_now(final_lb));

  std::vector<double> sw = sw_from_assignment(rp, inc_z);
  sol.sw.resize(p.layout.N + 1);
  for (int i = 0; i <= p.layout.N; ++i)
    sol.sw[i] = static_cast<int>(std::lround(sw[i]));
  sol.chi.resize(p.layout.chi.size());
  for (std::size_t k = 0; k < p.layout.chi.size(); ++k) {
    const int s = p.layout.chi_sample[k];
    sol.chi[k] = std::abs(sw[s] - sw[s - 1]);
  }
  sol.e = error_offsets(p, sw);
  sol.traj = simulate_with_offsets(p.sys, p.scen, sol.e);
  sol.objective = inc_obj;
  return sol;
}

BruteForceResult brute_force_schedule_search(const SystemSpec& sys,
                                             const ScenarioSpec& scen,
                                             const SwitchingWindows& windows,
                                             double w1, double w2) {
  const int N = scen.sample_count(sys.h);
  std::uint64_t cardinality = 1;
  for (const auto& [L, U] : windows.windows) {
    cardinality *= static_cast<std::uint64_t>(U - L + 1) + 1;
    if (cardinality > 1000000ull) {
      char buf[96];
      std::snprintf(buf, sizeof buf,
                    "brute force refused: at least %llu candidate schedules exceed 1000000",
                    static_cast<unsigned long long>(cardinality));
      throw std::runtime_error(buf);
    }
  }

  BruteForceResult best;
  best.candidates = cardinality;
  std::vector<double> best_sw;

  const int mu = windows.mu();
  std::vector<int> choice(mu, -1);  // -1: no switch, else the switch sample
  std::vector<double> sw(N + 1, 1.0);

  auto settle_ok = [&](const Trajectory& traj) {
    if (!traj.finite()) return false;
    for (std::size_t j = 0; j < scen.steps.size(); ++j) {
      const double t_next =
          j + 1 < scen.steps.size() ? scen.steps[j + 1].t : scen.horizon;
      const auto lo = ceil_samples(scen.steps[j].t + scen.settling_time, sys.h);
      const auto hi = std::min<std::int64_t>(ceil_samples(t_next, sys.h), N);
      for (std::int64_t i = lo; i <= hi; ++i)
        for (int c = 0; c < sys.q(); ++c) {
          const double dev = std::abs(traj.y[i][c] - scen.steps[j].gamma[c]);
          if (dev > scen.steps[j].delta + 1e-8) return false;
        }
    }
    return true;
  };

  auto evaluate = [&]() {
    std::fill(sw.begin(), sw.end(), 1.0);
    int parity = 1;
    std::size_t next = 0;
    std::vector<int> switches;
    for (int b = 0; b < mu; ++b)
      if (choice[b] >= 0) switches.push_back(choice[b]);
    for (int i = 0; i <= N; ++i) {
      if (next < switches.size() && i == switches[next]) {
        parity = 1 - parity;
        ++next;
      }
      sw[i] = parity;
    }
    std::vector<double> e(N + 1, 0.0);
    for (int i = 1; i <= N; ++i)
      e[i] = scen.e_lo * (1.0 - sw[i]) + scen.e_hi * sw[i];
    Trajectory traj = simulate_with_offsets(sys, scen, e);
    if (!settle_ok(traj)) return;
    Trajectory costed =
        scen.deviation_cost ? deviation_trajectory(sys, scen, traj) : traj;
    double z1 = 0.0;
    for (int i = 0; i <= N; ++i) z1 += scen.t_lo + (scen.t_hi - scen.t_lo) * sw[i];
    const double obj = w1 * z1 + w2 * lqr_cost(costed, sys.Q, sys.R);

    const double tol =
        best.feasible ? 1e-12 * std::max(1.0, std::abs(best.objective)) : 0.0;
    if (!best.feasible || obj < best.objective - tol) {
      best.feasible = true;
      best.objective = obj;
      best_sw = sw;
    } else if (obj <= best.objective + tol) {
      // Tie: prefer the schedule that stays hi longer (lexicographically).
      if (std::lexicographical_compare(best_sw.begin(), best_sw.end(), sw.begin(),
                                       sw.end())) {
        best.objective = obj;
        best_sw = sw;
      }
    }
  };

  // Odometer over the per-window choices: each digit cycles through
  // {none, L..U}, rightmost fastest.
  std::vector<int> pos(mu, -1);
  bool more = true;
  while (more) {
    for (int b = 0; b < mu; ++b) choice[b] = pos[b];
    evaluate();
    int b = mu - 1;
    for (;;) {
      if (b < 0) {
        more = false;
        break;
      }
      if (pos[b] < 0) {
        pos[b] = windows.windows[b].first;
        break;
      }
      if (pos[b] < windows.windows[b].second) {
        ++pos[b];
        break;
      }
      pos[b] = -1;
      --b;
    }
  }

  if (best.feasible) {
    best.sw.resize(N + 1);
    for (int i = 0; i <= N; ++i) best.sw[i] = static_cast<int>(best_sw[i]);
  }
  return best;
}

}  // namespace precsched
