#include "precsched_io/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace precsched_io {

using nlohmann::json;
using precsched::MatrixXd;
using precsched::VectorXd;

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::ostringstream os;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i) os << '\n';
    os << errors[i];
  }
  return os.str();
}

struct Ctx {
  std::vector<std::string> errors;

  void error(const std::string& path, const std::string& msg) {
    errors.push_back("config error at " + path + ": " + msg);
  }

  void reject_unknown(const json& obj, const std::string& path,
                      std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
      (void)value;
      if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
            return key == a;
          }) == allowed.end())
        error(path + "." + key, "unknown key");
    }
  }

  const json* object(const json& parent, const std::string& path,
                     const char* key, bool required) {
    if (!parent.contains(key)) {
      if (required) error(path + "." + key, "missing required object");
      return nullptr;
    }
    const json& j = parent.at(key);
    if (!j.is_object()) {
      error(path + "." + key, "expected an object");
      return nullptr;
    }
    return &j;
  }

  std::optional<double> number(const json& obj, const std::string& path,
                               const char* key, bool required) {
    if (!obj.contains(key)) {
      if (required) error(path + "." + key, "missing required number");
      return std::nullopt;
    }
    const json& j = obj.at(key);
    if (!j.is_number()) {
      error(path + "." + key, "expected a number");
      return std::nullopt;
    }
    return j.get<double>();
  }

  std::optional<bool> boolean(const json& obj, const std::string& path,
                              const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& j = obj.at(key);
    if (!j.is_boolean()) {
      error(path + "." + key, "expected a boolean");
      return std::nullopt;
    }
    return j.get<bool>();
  }

  std::optional<std::string> text(const json& obj, const std::string& path,
                                  const char* key, bool required) {
    if (!obj.contains(key)) {
      if (required) error(path + "." + key, "missing required string");
      return std::nullopt;
    }
    const json& j = obj.at(key);
    if (!j.is_string()) {
      error(path + "." + key, "expected a string");
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& path,
                                      const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& j = obj.at(key);
    if (!j.is_number_integer()) {
      error(path + "." + key, "expected an integer");
      return std::nullopt;
    }
    return j.get<std::int64_t>();
  }

  // Row-major nested arrays; all rows must agree in width.
  std::optional<MatrixXd> matrix(const json& obj, const std::string& path,
                                 const char* key, bool required) {
    const std::string where = path + "." + key;
    if (!obj.contains(key)) {
      if (required) error(where, "missing required matrix");
      return std::nullopt;
    }
    const json& j = obj.at(key);
    if (!j.is_array() || j.empty() || !j.front().is_array()) {
      error(where, "expected a non-empty array of rows");
      return std::nullopt;
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    MatrixXd m(static_cast<int>(rows), static_cast<int>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const json& row = j.at(r);
      if (!row.is_array() || row.size() != cols) {
        error(where, "row " + std::to_string(r) + " does not have " +
                         std::to_string(cols) + " entries");
        return std::nullopt;
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (!row.at(c).is_number()) {
          error(where, "entry (" + std::to_string(r) + ", " + std::to_string(c) +
                           ") is not a number");
          return std::nullopt;
        }
        m(static_cast<int>(r), static_cast<int>(c)) = row.at(c).get<double>();
      }
    }
    return m;
  }

  std::optional<VectorXd> vector(const json& obj, const std::string& path,
                                 const char* key, bool required) {
    const std::string where = path + "." + key;
    if (!obj.contains(key)) {
      if (required) error(where, "missing required vector");
      return std::nullopt;
    }
    const json& j = obj.at(key);
    if (!j.is_array() || j.empty()) {
      error(where, "expected a non-empty array");
      return std::nullopt;
    }
    VectorXd v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j.at(i).is_number()) {
        error(where, "entry " + std::to_string(i) + " is not a number");
        return std::nullopt;
      }
      v[static_cast<int>(i)] = j.at(i).get<double>();
    }
    return v;
  }
};

void check_shape(Ctx& ctx, const std::optional<MatrixXd>& m, const char* key,
                 int rows, int cols) {
  if (!m) return;
  if (m->rows() != rows || m->cols() != cols) {
    std::ostringstream os;
    os << "expected " << rows << "x" << cols << ", got " << m->rows() << "x"
       << m->cols();
    ctx.error(std::string("system.") + key, os.str());
  }
}

std::optional<std::vector<std::pair<double, double>>> parse_ranges(
    Ctx& ctx, const json& obj, const std::string& path, const char* key,
    int expected) {
  const std::string where = path + "." + key;
  if (!obj.contains(key)) {
    ctx.error(where, "missing required array of [lo, hi] pairs");
    return std::nullopt;
  }
  const json& j = obj.at(key);
  if (!j.is_array() || static_cast<int>(j.size()) != expected) {
    ctx.error(where, "expected " + std::to_string(expected) + " [lo, hi] pairs");
    return std::nullopt;
  }
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& pair = j.at(i);
    if (!pair.is_array() || pair.size() != 2 || !pair.at(0).is_number() ||
        !pair.at(1).is_number()) {
      ctx.error(where + "[" + std::to_string(i) + "]", "expected [lo, hi]");
      return std::nullopt;
    }
    out.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

Eigen::MatrixXd discrete_lqr_gain(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& R) {
  MatrixXd P = Q;
  for (int it = 0; it < 100000; ++it) {
    const MatrixXd BtP = B.transpose() * P;
    const MatrixXd G = (R + BtP * B).llt().solve(BtP * A);
    const MatrixXd next =
        Q + A.transpose() * P * A - A.transpose() * P * B * G;
    const double diff = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (diff <= 1e-13 * (1.0 + P.cwiseAbs().maxCoeff())) break;
  }
  const MatrixXd BtP = B.transpose() * P;
  // Regulator convention u = -G x; the loop applies u = u_ss + K (x - x_ss).
  return -(R + BtP * B).llt().solve(BtP * A);
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({"config error at " + origin + ": malformed JSON: " + e.what()});
  }

  Ctx ctx;
  RunConfig cfg;
  if (!root.is_object()) {
    throw ConfigError({"config error at " + origin + ": top level must be an object"});
  }
  ctx.reject_unknown(root, origin, {"system", "scenario", "precision", "solver"});

  int n = 0, m = 0, q = 0;

  // system
  if (const json* sys = ctx.object(root, origin, "system", true)) {
    ctx.reject_unknown(*sys, "system",
                       {"A", "B", "C", "K", "Q", "R", "h", "x0", "u0"});
    auto A = ctx.matrix(*sys, "system", "A", true);
    if (A && A->rows() != A->cols())
      ctx.error("system.A", "state matrix must be square");
    n = A ? static_cast<int>(A->rows()) : 0;
    auto B = ctx.matrix(*sys, "system", "B", true);
    if (B && n > 0 && B->rows() != n)
      ctx.error("system.B", "expected " + std::to_string(n) + " rows");
    m = B ? static_cast<int>(B->cols()) : 0;
    auto C = ctx.matrix(*sys, "system", "C", true);
    if (C && n > 0 && C->cols() != n)
      ctx.error("system.C", "expected " + std::to_string(n) + " columns");
    q = C ? static_cast<int>(C->rows()) : 0;
    auto K = ctx.matrix(*sys, "system", "K", false);
    if (K) check_shape(ctx, K, "K", m, n);
    auto Q = ctx.matrix(*sys, "system", "Q", false);
    if (Q) check_shape(ctx, Q, "Q", n, n);
    auto R = ctx.matrix(*sys, "system", "R", false);
    if (R) check_shape(ctx, R, "R", m, m);
    auto h = ctx.number(*sys, "system", "h", true);
    if (h && *h <= 0.0) ctx.error("system.h", "sampling period must be positive");
    auto x0 = ctx.vector(*sys, "system", "x0", false);
    if (x0 && n > 0 && x0->size() != n)
      ctx.error("system.x0", "expected " + std::to_string(n) + " entries");
    auto u0 = ctx.vector(*sys, "system", "u0", false);
    if (u0 && m > 0 && u0->size() != m)
      ctx.error("system.u0", "expected " + std::to_string(m) + " entries");

    if (ctx.errors.empty()) {
      cfg.sys.A = *A;
      cfg.sys.B = *B;
      cfg.sys.C = *C;
      cfg.sys.Q = Q ? *Q : MatrixXd::Identity(n, n);
      cfg.sys.R = R ? *R : MatrixXd::Identity(m, m);
      cfg.sys.K = K ? *K : discrete_lqr_gain(*A, *B, cfg.sys.Q, cfg.sys.R);
      cfg.sys.h = *h;
      cfg.sys.x0 = x0 ? *x0 : VectorXd::Zero(n);
      cfg.sys.u0 = u0 ? *u0 : VectorXd::Zero(m);
    }
  }

  // scenario
  std::optional<double> band_percent, band_absolute;
  if (const json* scen = ctx.object(root, origin, "scenario", true)) {
    ctx.reject_unknown(*scen, "scenario",
                       {"steps", "settling_time", "horizon", "t_lo", "t_hi",
                        "band", "metrics", "cost_coordinates"});
    if (const json* band = ctx.object(*scen, "scenario", "band", true)) {
      ctx.reject_unknown(*band, "scenario.band", {"percent", "absolute"});
      band_percent = ctx.number(*band, "scenario.band", "percent", false);
      band_absolute = ctx.number(*band, "scenario.band", "absolute", false);
      if (band_percent.has_value() == band_absolute.has_value())
        ctx.error("scenario.band", "exactly one of percent or absolute is required");
      if (band_percent && *band_percent <= 0.0)
        ctx.error("scenario.band.percent", "must be positive");
      if (band_absolute && *band_absolute <= 0.0)
        ctx.error("scenario.band.absolute", "must be positive");
    }

    if (!scen->contains("steps") || !scen->at("steps").is_array() ||
        scen->at("steps").empty()) {
      ctx.error("scenario.steps", "expected a non-empty array of steps");
    } else {
      const json& steps = scen->at("steps");
      for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::string where = "scenario.steps[" + std::to_string(i) + "]";
        const json& step = steps.at(i);
        if (!step.is_object()) {
          ctx.error(where, "expected an object");
          continue;
        }
        ctx.reject_unknown(step, where, {"t", "reference"});
        auto t = ctx.number(step, where, "t", true);
        auto ref = ctx.vector(step, where, "reference", true);
        if (!t || !ref) continue;
        if (q > 0 && ref->size() != q)
          ctx.error(where + ".reference",
                    "expected " + std::to_string(q) + " entries");
        precsched::StepRef sr;
        sr.t = *t;
        sr.gamma = *ref;
        if (band_absolute) {
          sr.delta = *band_absolute;
        } else if (band_percent) {
          sr.delta = *band_percent / 100.0 * ref->cwiseAbs().maxCoeff();
          if (sr.delta <= 0.0)
            ctx.error(where + ".reference",
                      "percent band needs a nonzero reference");
        }
        cfg.scen.steps.push_back(std::move(sr));
      }
      if (!cfg.scen.steps.empty() && cfg.scen.steps.front().t != 0.0)
        ctx.error("scenario.steps[0].t", "first step must be at t = 0");
      for (std::size_t i = 1; i < cfg.scen.steps.size(); ++i)
        if (cfg.scen.steps[i].t <= cfg.scen.steps[i - 1].t)
          ctx.error("scenario.steps[" + std::to_string(i) + "].t",
                    "step instants must be strictly increasing");
    }

    if (auto v = ctx.number(*scen, "scenario", "settling_time", true)) {
      cfg.scen.settling_time = *v;
      if (*v <= 0.0) ctx.error("scenario.settling_time", "must be positive");
    }
    if (auto v = ctx.number(*scen, "scenario", "horizon", true)) {
      cfg.scen.horizon = *v;
      if (*v <= 0.0) ctx.error("scenario.horizon", "must be positive");
    }
    if (auto v = ctx.number(*scen, "scenario", "t_lo", true)) {
      cfg.scen.t_lo = *v;
      if (*v <= 0.0) ctx.error("scenario.t_lo", "must be positive");
    }
    if (auto v = ctx.number(*scen, "scenario", "t_hi", true)) {
      cfg.scen.t_hi = *v;
      if (*v <= 0.0) ctx.error("scenario.t_hi", "must be positive");
    }
    if (cfg.scen.t_lo > 0.0 && cfg.scen.t_hi > 0.0 && cfg.scen.t_lo > cfg.scen.t_hi)
      ctx.error("scenario.t_lo", "low-precision runtime exceeds t_hi");

    if (const json* metrics = ctx.object(*scen, "scenario", "metrics", false)) {
      ctx.reject_unknown(*metrics, "scenario.metrics", {"T_p", "T_r"});
      auto tp = ctx.number(*metrics, "scenario.metrics", "T_p", true);
      auto tr = ctx.number(*metrics, "scenario.metrics", "T_r", true);
      if (tp && tr) {
        precsched::TimingMetrics tm;
        tm.T_p = *tp;
        tm.T_r = *tr;
        tm.T_s = cfg.scen.settling_time;
        if (*tp < 0.0) ctx.error("scenario.metrics.T_p", "must be nonnegative");
        if (*tr < 0.0) ctx.error("scenario.metrics.T_r", "must be nonnegative");
        cfg.metrics = tm;
      }
    }
    if (auto coords = ctx.text(*scen, "scenario", "cost_coordinates", false)) {
      if (*coords == "deviation")
        cfg.scen.deviation_cost = true;
      else if (*coords == "raw")
        cfg.scen.deviation_cost = false;
      else
        ctx.error("scenario.cost_coordinates", "expected \"deviation\" or \"raw\"");
    }
  }

  // precision
  if (const json* prec = ctx.object(root, origin, "precision", true)) {
    ctx.reject_unknown(*prec, "precision",
                       {"lo", "hi", "e_lo", "e_hi", "ranges", "symmetric_errors"});
    if (auto name = ctx.text(*prec, "precision", "lo", false)) {
      try {
        cfg.prec.lo = precsched::RoundingSpec::from_name(*name);
      } catch (const std::invalid_argument& e) {
        ctx.error("precision.lo", e.what());
      }
    }
    if (auto name = ctx.text(*prec, "precision", "hi", false)) {
      try {
        cfg.prec.hi = precsched::RoundingSpec::from_name(*name);
      } catch (const std::invalid_argument& e) {
        ctx.error("precision.hi", e.what());
      }
    }
    auto e_lo = ctx.number(*prec, "precision", "e_lo", false);
    auto e_hi = ctx.number(*prec, "precision", "e_hi", false);
    if (e_lo.has_value() != e_hi.has_value())
      ctx.error("precision", "e_lo and e_hi must be given together");
    if (const json* ranges = ctx.object(*prec, "precision", "ranges", false)) {
      ctx.reject_unknown(*ranges, "precision.ranges", {"x", "u"});
      precsched::VariableRanges vr;
      auto xr = parse_ranges(ctx, *ranges, "precision.ranges", "x", n);
      auto ur = parse_ranges(ctx, *ranges, "precision.ranges", "u", m);
      if (xr && ur) {
        vr.x = std::move(*xr);
        vr.u = std::move(*ur);
        cfg.ranges = std::move(vr);
      }
    }
    if (auto sym = ctx.boolean(*prec, "precision", "symmetric_errors"))
      cfg.scen.symmetric_errors = *sym;

    if (e_lo && e_hi) {
      cfg.scen.e_lo = *e_lo;
      cfg.scen.e_hi = *e_hi;
      if (*e_lo < *e_hi)
        ctx.error("precision.e_lo", "low-precision bound is below e_hi");
    } else if (ctx.errors.empty()) {
      if (!cfg.ranges) {
        ctx.error("precision",
                  "either e_lo/e_hi or ranges must be provided to bound the roundoff");
      } else {
        try {
          cfg.scen.e_lo =
              conservative_step_error_bound(cfg.sys, *cfg.ranges, cfg.prec.lo);
          cfg.scen.e_hi =
              conservative_step_error_bound(cfg.sys, *cfg.ranges, cfg.prec.hi);
        } catch (const std::exception& e) {
          ctx.error("precision.ranges", e.what());
        }
      }
    }
  }

  // solver
  if (root.contains("solver")) {
    if (const json* solver = ctx.object(root, origin, "solver", false)) {
      ctx.reject_unknown(*solver, "solver",
                         {"gap", "node_limit", "stop_gap", "w1", "w2",
                          "parallel", "threads"});
      if (auto v = ctx.number(*solver, "solver", "gap", false)) {
        cfg.limits.gap_tol = *v;
        if (*v <= 0.0) ctx.error("solver.gap", "must be positive");
      }
      if (auto v = ctx.integer(*solver, "solver", "node_limit")) {
        cfg.limits.node_limit = *v;
        if (*v <= 0) ctx.error("solver.node_limit", "must be positive");
      }
      if (auto v = ctx.number(*solver, "solver", "stop_gap", false)) {
        cfg.limits.stop_gap = *v;
        if (*v <= 0.0) ctx.error("solver.stop_gap", "must be positive");
      }
      if (auto v = ctx.number(*solver, "solver", "w1", false)) {
        cfg.w1 = *v;
        if (*v < 0.0) ctx.error("solver.w1", "must be nonnegative");
      }
      if (auto v = ctx.number(*solver, "solver", "w2", false)) {
        cfg.w2 = *v;
        if (*v < 0.0) ctx.error("solver.w2", "must be nonnegative");
      }
      if (auto v = ctx.boolean(*solver, "solver", "parallel"))
        cfg.limits.parallel = *v;
      if (auto v = ctx.integer(*solver, "solver", "threads")) {
        cfg.limits.threads = static_cast<int>(*v);
        if (*v < 0) ctx.error("solver.threads", "must be nonnegative");
      }
    }
  }

  // Final semantic validation through the library's own checks.
  if (ctx.errors.empty()) {
    try {
      cfg.sys.validate();
    } catch (const std::invalid_argument& e) {
      ctx.error("system", e.what());
    }
    try {
      cfg.scen.validate(cfg.sys.q());
    } catch (const std::invalid_argument& e) {
      ctx.error("scenario", e.what());
    }
  }

  if (!ctx.errors.empty()) throw ConfigError(std::move(ctx.errors));
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"config error at " + path + ": cannot open file"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace precsched_io
