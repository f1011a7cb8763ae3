#include "precsched/miqp.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace precsched {

void encode_xor(std::vector<LinRow>& rows, int chi, int a, int b) {
  // chi >= a - b   ->   a - b - chi <= 0
  rows.push_back({{{a, 1.0}, {b, -1.0}, {chi, -1.0}}, RowSense::le, 0.0, "xor"});
  // chi >= b - a
  rows.push_back({{{b, 1.0}, {a, -1.0}, {chi, -1.0}}, RowSense::le, 0.0, "xor"});
  // chi <= 2 - (a + b)
  rows.push_back({{{chi, 1.0}, {a, 1.0}, {b, 1.0}}, RowSense::le, 2.0, "xor"});
  // chi <= a + b
  rows.push_back({{{chi, 1.0}, {a, -1.0}, {b, -1.0}}, RowSense::le, 0.0, "xor"});
}

namespace {

std::string sample_name(const char* base, int i, int comp, int width) {
  char buf[64];
  if (width > 1)
    std::snprintf(buf, sizeof buf, "%s_%d_%d", base, i, comp);
  else
    std::snprintf(buf, sizeof buf, "%s_%d", base, i);
  return buf;
}

}  // namespace

MiqpProblem build_schedule_program(const SystemSpec& sys, const ScenarioSpec& scen,
                                   const SwitchingWindows& windows, double w1,
                                   double w2) {
  sys.validate();
  scen.validate(sys.q());
  const int N = scen.sample_count(sys.h);
  for (std::size_t b = 0; b < windows.windows.size(); ++b)
    if (windows.windows[b].second > N || windows.windows[b].first < 1)
      throw std::invalid_argument("switching window " + std::to_string(b + 1) +
                                  " [" + std::to_string(windows.windows[b].first) +
                                  ", " + std::to_string(windows.windows[b].second) +
                                  "] references samples outside [1, " +
                                  std::to_string(N) + "]");

  const int n = sys.n(), m = sys.m(), q = sys.q();
  MiqpProblem p;
  p.sys = sys;
  p.scen = scen;
  p.windows = windows;
  p.w1 = w1;
  p.w2 = w2;
  auto& L = p.layout;
  L.N = N;
  L.n = n;
  L.m = m;
  L.q = q;

  auto add_var = [&](std::string name, VarKind kind) {
    p.vars.push_back({std::move(name), kind});
    return static_cast<int>(p.vars.size()) - 1;
  };

  L.sw.resize(N + 1);
  for (int i = 0; i <= N; ++i) L.sw[i] = add_var(sample_name("sw", i, 0, 1), VarKind::binary);
  L.e.assign(N + 1, -1);
  for (int i = 1; i <= N; ++i) L.e[i] = add_var(sample_name("e", i, 0, 1), VarKind::continuous);
  L.x.resize(N + 1);
  L.u.resize(N + 1);
  L.y.resize(N + 1);
  for (int i = 0; i <= N; ++i) {
    L.x[i] = add_var(sample_name("x", i, 0, n), VarKind::continuous);
    for (int c = 1; c < n; ++c) add_var(sample_name("x", i, c, n), VarKind::continuous);
    L.u[i] = add_var(sample_name("u", i, 0, m), VarKind::continuous);
    for (int c = 1; c < m; ++c) add_var(sample_name("u", i, c, m), VarKind::continuous);
    L.y[i] = add_var(sample_name("y", i, 0, q), VarKind::continuous);
    for (int c = 1; c < q; ++c) add_var(sample_name("y", i, c, q), VarKind::continuous);
  }
  for (const auto& [lo, hi] : windows.windows) {
    for (int i = lo; i <= hi; ++i) {
      L.chi.push_back(add_var(sample_name("chi", i, 0, 1), VarKind::binary));
      L.chi_sample.push_back(i);
    }
  }

  std::vector<SteadyState> ss;
  for (std::size_t j = 0; j < scen.steps.size(); ++j) {
    try {
      ss.push_back(solve_steady_state(sys, scen.steps[j].gamma));
    } catch (const std::runtime_error&) {
      throw std::runtime_error("untrackable reference at step " + std::to_string(j));
    }
  }

  const double e_span = scen.e_hi - scen.e_lo;

  // Initial conditions as fixed continuous variables.
  for (int c = 0; c < n; ++c)
    p.rows.push_back({{{L.x[0] + c, 1.0}}, RowSense::eq, sys.x0[c], "init"});
  for (int c = 0; c < m; ++c)
    p.rows.push_back({{{L.u[0] + c, 1.0}}, RowSense::eq, sys.u0[c], "init"});
  {
    const VectorXd y0 = sys.C * sys.x0;
    for (int c = 0; c < q; ++c) {
      LinRow row{{{L.y[0] + c, 1.0}}, RowSense::eq, 0.0, "init"};
      for (int k = 0; k < n; ++k)
        if (sys.C(c, k) != 0.0) row.terms.push_back({L.x[0] + k, -sys.C(c, k)});
      p.rows.push_back(std::move(row));
    }
  }

  for (int i = 1; i <= N; ++i) {
    const int j = active_step(scen, sys.h, i);

    // e_i = e_lo (1 - sw_i) + e_hi sw_i  <=>  e_i - (e_hi - e_lo) sw_i = e_lo
    p.rows.push_back({{{L.e[i], 1.0}, {L.sw[i], -e_span}}, RowSense::eq, scen.e_lo, "errsel"});

    // u_i = u_ss + K (x_{i-1} - x_ss) + e_i
    for (int r = 0; r < m; ++r) {
      LinRow row{{{L.u[i] + r, 1.0}, {L.e[i], -1.0}},
                 RowSense::eq,
                 ss[j].u_ss[r] - sys.K.row(r).dot(ss[j].x_ss),
                 "ctrl"};
      for (int c = 0; c < n; ++c)
        if (sys.K(r, c) != 0.0) row.terms.push_back({L.x[i - 1] + c, -sys.K(r, c)});
      p.rows.push_back(std::move(row));
    }
    // x_i = A x_{i-1} + B u_{i-1} + e_i
    for (int r = 0; r < n; ++r) {
      LinRow row{{{L.x[i] + r, 1.0}, {L.e[i], -1.0}}, RowSense::eq, 0.0, "plant"};
      for (int c = 0; c < n; ++c)
        if (sys.A(r, c) != 0.0) row.terms.push_back({L.x[i - 1] + c, -sys.A(r, c)});
      for (int c = 0; c < m; ++c)
        if (sys.B(r, c) != 0.0) row.terms.push_back({L.u[i - 1] + c, -sys.B(r, c)});
      p.rows.push_back(std::move(row));
    }
    // y_i = C x_i + e_i
    for (int r = 0; r < q; ++r) {
      LinRow row{{{L.y[i] + r, 1.0}, {L.e[i], -1.0}}, RowSense::eq, 0.0, "out"};
      for (int c = 0; c < n; ++c)
        if (sys.C(r, c) != 0.0) row.terms.push_back({L.x[i] + c, -sys.C(r, c)});
      p.rows.push_back(std::move(row));
    }
  }

  // Settling band: gamma_j - delta_j <= y_i <= gamma_j + delta_j.
  for (std::size_t j = 0; j < scen.steps.size(); ++j) {
    const double t_next = j + 1 < scen.steps.size() ? scen.steps[j + 1].t : scen.horizon;
    const auto lo64 = ceil_samples(scen.steps[j].t + scen.settling_time, sys.h);
    const auto hi64 = std::min<std::int64_t>(ceil_samples(t_next, sys.h), N);
    for (std::int64_t i = lo64; i <= hi64; ++i) {
      for (int c = 0; c < q; ++c) {
        char tag[64];
        std::snprintf(tag, sizeof tag, "band step=%zu i=%" PRId64 " comp=%d", j, i, c);
        const double g = scen.steps[j].gamma[c];
        const double d = scen.steps[j].delta;
        p.rows.push_back({{{L.y[i] + c, 1.0}}, RowSense::le, g + d, std::string(tag) + " upper"});
        p.rows.push_back({{{L.y[i] + c, -1.0}}, RowSense::le, d - g, std::string(tag) + " lower"});
      }
    }
  }

  // Per-window switching: chi_i = sw_{i-1} xor sw_i, at most one switch.
  int chi_cursor = 0;
  for (std::size_t b = 0; b < windows.windows.size(); ++b) {
    const auto [lo, hi] = windows.windows[b];
    LinRow card{{}, RowSense::le, 1.0, "card window=" + std::to_string(b + 1)};
    for (int i = lo; i <= hi; ++i, ++chi_cursor) {
      const int chi = L.chi[chi_cursor];
      encode_xor(p.rows, chi, L.sw[i - 1], L.sw[i]);
      card.terms.push_back({chi, 1.0});
    }
    p.rows.push_back(std::move(card));
  }

  // Pin hi before the first window.
  const int first_L = windows.windows.empty() ? N + 1 : windows.windows.front().first;
  for (int i = 0; i <= N && i < first_L; ++i)
    p.rows.push_back({{{L.sw[i], 1.0}}, RowSense::eq, 1.0, "pin"});

  // Freeze between windows and through the horizon end.
  for (std::size_t b = 0; b < windows.windows.size(); ++b) {
    const int U = windows.windows[b].second;
    const int next_L =
        b + 1 < windows.windows.size() ? windows.windows[b + 1].first : N + 1;
    for (int i = U + 1; i < next_L && i <= N; ++i)
      p.rows.push_back({{{L.sw[i], 1.0}, {L.sw[U], -1.0}}, RowSense::eq, 0.0, "freeze"});
  }

  // Objective: w1 * z1 + w2 * z2, z2 in deviation coordinates by default.
  p.constant = 0.0;
  for (int i = 0; i <= N; ++i) {
    p.lin.push_back({L.sw[i], w1 * (scen.t_hi - scen.t_lo)});
    p.constant += w1 * scen.t_lo;
  }
  for (int i = 0; i <= N; ++i) {
    const int j = active_step(scen, sys.h, i);
    const VectorXd xs = scen.deviation_cost ? ss[j].x_ss : VectorXd::Zero(n);
    const VectorXd us = scen.deviation_cost ? ss[j].u_ss : VectorXd::Zero(m);
    // (x - xs)' Q (x - xs) = x'Qx - 2 xs'Q x + xs'Q xs
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) {
        const double coef = (r == c ? 1.0 : 2.0) * sys.Q(r, c);
        if (coef != 0.0) p.quad.push_back({L.x[i] + r, L.x[i] + c, w2 * coef});
      }
    const VectorXd qx = sys.Q * xs;
    for (int c = 0; c < n; ++c)
      if (qx[c] != 0.0) p.lin.push_back({L.x[i] + c, -2.0 * w2 * qx[c]});
    p.constant += w2 * xs.dot(qx);
    for (int r = 0; r < m; ++r)
      for (int c = r; c < m; ++c) {
        const double coef = (r == c ? 1.0 : 2.0) * sys.R(r, c);
        if (coef != 0.0) p.quad.push_back({L.u[i] + r, L.u[i] + c, w2 * coef});
      }
    const VectorXd ru = sys.R * us;
    for (int c = 0; c < m; ++c)
      if (ru[c] != 0.0) p.lin.push_back({L.u[i] + c, -2.0 * w2 * ru[c]});
    p.constant += w2 * us.dot(ru);
  }

  return p;
}

std::vector<double> error_offsets(const MiqpProblem& p, const std::vector<double>& sw) {
  std::vector<double> e(p.layout.N + 1, 0.0);
  for (int i = 1; i <= p.layout.N; ++i)
    e[i] = p.scen.e_lo * (1.0 - sw[i]) + p.scen.e_hi * sw[i];
  return e;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ReducedProblem presolve(std::shared_ptr<const MiqpProblem> p) {
  ReducedProblem rp;
  rp.full = p;
  const int nv = p->num_vars();
  UnionFind uf(nv);
  std::vector<double> fixed(nv, std::numeric_limits<double>::quiet_NaN());
  auto is_fixed = [&](int v) { return !std::isnan(fixed[v]); };

  auto fix = [&](int v, double value) {
    v = uf.find(v);
    if (is_fixed(v) && fixed[v] != value) {
      rp.status = PresolveStatus::infeasible;
      std::ostringstream msg;
      msg << "contradictory fixings for " << p->vars[v].name << ": " << fixed[v]
          << " vs " << value;
      rp.infeasibility = msg.str();
      return false;
    }
    fixed[v] = value;
    return true;
  };

  // Alias/fix sweep over equality rows: single-variable rows fix, sw - sw
  // difference rows alias, continuous-on-binary two-term rows substitute.
  // Iterate until stable so chained aliases resolve regardless of row order.
  bool changed = true;
  while (changed && rp.status == PresolveStatus::ok) {
    changed = false;
    for (const auto& row : p->rows) {
      if (row.sense != RowSense::eq) continue;
      if (row.terms.size() == 1) {
        const int v = uf.find(row.terms[0].var);
        const double val = row.rhs / row.terms[0].coef;
        if (!is_fixed(v) || fixed[v] != val) {
          if (!fix(v, val)) break;
          changed = true;
        }
      } else if (row.terms.size() == 2) {
        const int v0 = row.terms[0].var, v1 = row.terms[1].var;
        const double c0 = row.terms[0].coef, c1 = row.terms[1].coef;
        const bool bin0 = p->vars[v0].kind == VarKind::binary;
        const bool bin1 = p->vars[v1].kind == VarKind::binary;
        if (bin0 && bin1 && row.rhs == 0.0 && c0 == -c1) {
          const int r0 = uf.find(v0), r1 = uf.find(v1);
          if (r0 != r1) {
            const bool f0 = is_fixed(r0), f1 = is_fixed(r1);
            uf.unite(r0, r1);
            const int r = uf.find(r0);
            if (f0 && !fix(r, fixed[r0])) break;
            if (f1 && !fix(r, fixed[r1])) break;
            changed = true;
          }
        } else if (bin0 != bin1) {
          // c_cont * cont + c_bin * bin = rhs  ->  cont = (rhs - c_bin*bin)/c_cont
          const int cont = bin0 ? v1 : v0;
          const int bin = bin0 ? v0 : v1;
          const double cc = bin0 ? c1 : c0;
          const double cb = bin0 ? c0 : c1;
          bool known = false;
          for (const auto& s : rp.subs) known |= s.var == cont;
          if (!known) {
            rp.subs.push_back({cont, row.rhs / cc, -cb / cc, bin});
            changed = true;
          }
        }
      }
    }
  }
  if (rp.status == PresolveStatus::infeasible) return rp;

  // Propagate class fixings and collect the free binary representatives among
  // the sw variables, ordered by sample.
  const auto& L = p->layout;
  const int N = L.N;
  rp.sw_expr.assign(N + 1, SwExpr{});
  std::vector<int> rep_to_free(nv, -1);
  for (int i = 0; i <= N; ++i) {
    const int r = uf.find(L.sw[i]);
    if (is_fixed(r)) {
      if (fixed[r] != 0.0 && fixed[r] != 1.0) {
        rp.status = PresolveStatus::infeasible;
        rp.infeasibility = "binary " + p->vars[L.sw[i]].name + " fixed to " +
                           std::to_string(fixed[r]);
        return rp;
      }
      rp.sw_expr[i] = SwExpr{-1, fixed[r]};
    } else {
      if (rep_to_free[r] < 0) {
        rep_to_free[r] = static_cast<int>(rp.free_samples.size());
        rp.free_samples.push_back(i);
      }
      rp.sw_expr[i] = SwExpr{rep_to_free[r], 0.0};
    }
  }
  return rp;
}

std::vector<double> ReducedProblem::sw_values(const Eigen::VectorXd& z) const {
  std::vector<double> sw(sw_expr.size());
  for (std::size_t i = 0; i < sw_expr.size(); ++i)
    sw[i] = sw_expr[i].free_index < 0 ? sw_expr[i].constant : z[sw_expr[i].free_index];
  return sw;
}

std::string export_problem_text(const MiqpProblem& p) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };

  os << "# precsched miqp v1\n";
  os << "vars " << p.num_vars() << "\n";
  for (int v = 0; v < p.num_vars(); ++v)
    os << "var " << v << " " << p.vars[v].name << " "
       << (p.vars[v].kind == VarKind::binary ? "binary" : "continuous") << "\n";
  os << "minimize\n";
  for (const auto& t : p.quad)
    os << "quad " << t.i << " " << t.j << " " << num(t.coef) << "\n";
  for (const auto& t : p.lin) os << "lin " << t.var << " " << num(t.coef) << "\n";
  os << "const " << num(p.constant) << "\n";
  os << "subject_to " << p.rows.size() << "\n";
  for (const auto& row : p.rows) {
    os << "row " << (row.sense == RowSense::eq ? "eq" : "le");
    for (const auto& t : row.terms) os << " " << t.var << " " << num(t.coef);
    os << " rhs " << num(row.rhs);
    if (!row.tag.empty()) os << " # " << row.tag;
    os << "\n";
  }
  return os.str();
}

}  // namespace precsched
