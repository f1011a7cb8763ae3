#include "precsched_io/io.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace precsched_io {

using nlohmann::json;
using namespace precsched;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trajectory_csv(const Trajectory& traj, const SystemSpec& sys,
                           const ScenarioSpec& scen, const std::vector<int>& sw) {
  if (static_cast<int>(sw.size()) != traj.N + 1)
    throw std::invalid_argument("per-sample precision column must have N+1 entries");
  const int q = sys.q();
  std::ostringstream os;
  os << "sample,t_seconds,sw";
  for (int c = 1; c <= q; ++c) os << ",y_" << c;
  os << ",band_lo,band_hi,cum_cost\n";

  const Trajectory costed =
      scen.deviation_cost ? deviation_trajectory(sys, scen, traj) : traj;
  double cum = 0.0;
  for (int i = 0; i <= traj.N; ++i) {
    const int j = active_step(scen, sys.h, i);
    cum += costed.x[i].dot(sys.Q * costed.x[i]) +
           costed.u[i].dot(sys.R * costed.u[i]);
    os << i << ',' << g17(i * sys.h) << ',' << sw[i];
    for (int c = 0; c < q; ++c) os << ',' << g17(traj.y[i][c]);
    os << ',' << g17(scen.steps[j].gamma[0] - scen.steps[j].delta) << ','
       << g17(scen.steps[j].gamma[0] + scen.steps[j].delta) << ',' << g17(cum)
       << '\n';
  }
  return os.str();
}

std::string schedule_file_text(const ScheduleFile& f) {
  std::ostringstream os;
  os << "# precsched schedule v1\n";
  os << "N " << f.schedule.N << '\n';
  os << "mu " << f.mu << '\n';
  os << "gap " << g17(f.gap) << '\n';
  os << "objective " << g17(f.objective) << '\n';
  os << "segments " << f.schedule.segments.size() << '\n';
  for (const auto& seg : f.schedule.segments)
    os << seg.start << ' ' << seg.end << ' '
       << (seg.prec == Precision::hi ? "hi" : "lo") << '\n';
  return os.str();
}

ScheduleFile parse_schedule_file(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "# precsched schedule v1")
    throw std::runtime_error("schedule file: missing version header");
  ScheduleFile f;
  std::size_t segment_count = 0;
  auto field = [&](const char* name) {
    if (!std::getline(in, line))
      throw std::runtime_error(std::string("schedule file: missing field ") + name);
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key != name)
      throw std::runtime_error("schedule file: expected field " + std::string(name) +
                               ", got " + key);
    return ls;
  };
  { auto ls = field("N"); ls >> f.schedule.N; if (!ls) throw std::runtime_error("schedule file: bad N"); }
  { auto ls = field("mu"); ls >> f.mu; if (!ls) throw std::runtime_error("schedule file: bad mu"); }
  { auto ls = field("gap"); ls >> f.gap; if (!ls) throw std::runtime_error("schedule file: bad gap"); }
  { auto ls = field("objective"); ls >> f.objective; if (!ls) throw std::runtime_error("schedule file: bad objective"); }
  { auto ls = field("segments"); ls >> segment_count; if (!ls) throw std::runtime_error("schedule file: bad segment count"); }
  for (std::size_t k = 0; k < segment_count; ++k) {
    if (!std::getline(in, line))
      throw std::runtime_error("schedule file: truncated segment list");
    std::istringstream ls(line);
    ScheduleSegment seg;
    std::string prec;
    ls >> seg.start >> seg.end >> prec;
    if (!ls || (prec != "hi" && prec != "lo"))
      throw std::runtime_error("schedule file: malformed segment line: " + line);
    seg.prec = prec == "hi" ? Precision::hi : Precision::lo;
    f.schedule.segments.push_back(seg);
  }
  f.schedule.validate();
  return f;
}

std::string render_windows(const SwitchingWindows& w,
                           const std::vector<std::string>& warnings) {
  std::ostringstream os;
  os << "mu " << w.mu() << '\n';
  for (std::size_t b = 0; b < w.windows.size(); ++b)
    os << "window " << b + 1 << " [" << w.windows[b].first << ", "
       << w.windows[b].second << "]\n";
  for (const auto& warn : warnings) os << "warning: " << warn << '\n';
  return os.str();
}

std::string render_report(const VerificationReport& r) {
  std::ostringstream os;
  auto yesno = [](bool b) { return b ? "pass" : "FAIL"; };
  os << "model band check      " << yesno(r.model_band_ok) << '\n';
  if (r.model_violation)
    os << "  first violation     step " << r.model_violation->step << " sample "
       << r.model_violation->sample << " y " << g17(r.model_violation->y[0])
       << '\n';
  os << "model LQR cost        " << g17(r.model_cost) << '\n';
  os << "emulated band check   " << yesno(r.emulated_band_ok) << '\n';
  if (r.emulated_nonfinite) os << "  emulation diverged (non-finite values)\n";
  if (r.emulated_violation)
    os << "  first violation     step " << r.emulated_violation->step
       << " sample " << r.emulated_violation->sample << " y "
       << g17(r.emulated_violation->y[0]) << '\n';
  os << "emulated LQR cost     " << g17(r.emulated_cost) << '\n';
  os << "modeled runtime       " << g17(r.modeled_runtime) << '\n';
  os << "switch count          " << r.switch_count << '\n';
  os << "lo fraction           " << g17(r.lo_fraction) << '\n';
  return os.str();
}

std::string render_comparison(const ComparisonTable& t) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %22s %22s %16s %8s %8s %12s %12s\n",
                "schedule", "model_cost", "emulated_cost", "runtime", "model",
                "emulated", "runtime_vs_hi", "cost_vs_hi");
  os << line;
  for (const auto& r : t.rows) {
    std::snprintf(line, sizeof line,
                  "%-10s %22.10g %22.10g %16.10g %8s %8s %11.4f%% %11.4f%%\n",
                  r.name.c_str(), r.model_cost, r.emulated_cost,
                  r.modeled_runtime, r.model_band_ok ? "ok" : "violated",
                  r.emulated_band_ok ? "ok" : "violated", r.runtime_vs_hi_pct,
                  r.model_cost_vs_hi_pct);
    os << line;
  }
  return os.str();
}

std::string windows_json(const SwitchingWindows& w) {
  json j;
  j["mu"] = w.mu();
  j["windows"] = json::array();
  for (const auto& [lo, hi] : w.windows) j["windows"].push_back({lo, hi});
  return j.dump(2) + "\n";
}

std::string report_json(const VerificationReport& r) {
  json j;
  j["model_band_ok"] = r.model_band_ok;
  j["model_cost"] = r.model_cost;
  j["emulated_band_ok"] = r.emulated_band_ok;
  j["emulated_nonfinite"] = r.emulated_nonfinite;
  j["emulated_cost"] = r.emulated_cost;
  j["modeled_runtime"] = r.modeled_runtime;
  j["switch_count"] = r.switch_count;
  j["lo_fraction"] = r.lo_fraction;
  if (r.model_violation) {
    j["model_violation"] = {{"step", r.model_violation->step},
                            {"sample", r.model_violation->sample}};
  }
  if (r.emulated_violation) {
    j["emulated_violation"] = {{"step", r.emulated_violation->step},
                               {"sample", r.emulated_violation->sample}};
  }
  return j.dump(2) + "\n";
}

std::string comparison_json(const ComparisonTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"name", r.name},
                    {"model_cost", r.model_cost},
                    {"emulated_cost", r.emulated_cost},
                    {"modeled_runtime", r.modeled_runtime},
                    {"model_band_ok", r.model_band_ok},
                    {"emulated_band_ok", r.emulated_band_ok},
                    {"runtime_vs_hi_pct", r.runtime_vs_hi_pct},
                    {"model_cost_vs_hi_pct", r.model_cost_vs_hi_pct}});
  }
  return json{{"rows", rows}}.dump(2) + "\n";
}

}  // namespace precsched_io
