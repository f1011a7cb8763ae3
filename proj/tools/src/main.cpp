#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "precsched_io/config.hpp"
#include "precsched_io/io.hpp"

using namespace precsched;
using precsched_io::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitLimit = 3;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + out_path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

WindowsBuild windows_for(const RunConfig& cfg) {
  TimingMetrics metrics =
      cfg.metrics ? *cfg.metrics
                  : time_domain_metrics(cfg.sys, cfg.scen.steps[0].gamma,
                                        cfg.scen.steps[0].delta, cfg.scen.horizon);
  return build_switching_windows(cfg.scen, metrics, cfg.sys.h,
                                 cfg.scen.sample_count(cfg.sys.h));
}

int cmd_intervals(const RunConfig& cfg, bool as_json, const std::string& out) {
  WindowsBuild wb = windows_for(cfg);
  emit(as_json ? precsched_io::windows_json(wb.windows)
               : precsched_io::render_windows(wb.windows, wb.warnings),
       out);
  return kExitOk;
}

int cmd_schedule(const RunConfig& cfg, const std::string& out,
                 const std::string& export_problem) {
  SynthesisOptions opts;
  opts.w1 = cfg.w1;
  opts.w2 = cfg.w2;
  opts.limits = cfg.limits;
  opts.metrics = cfg.metrics;

  if (!export_problem.empty()) {
    WindowsBuild wb = windows_for(cfg);
    const MiqpProblem problem =
        build_schedule_program(cfg.sys, cfg.scen, wb.windows, cfg.w1, cfg.w2);
    emit(export_problem_text(problem), export_problem);
  }

  SynthesisResult result = synthesize_schedule(cfg.sys, cfg.scen, opts);

  precsched_io::ScheduleFile file;
  file.schedule = result.schedule;
  file.mu = result.windows.mu();
  file.gap = result.solution.rel_gap;
  file.objective = result.solution.objective;
  emit(precsched_io::schedule_file_text(file), out);

  std::cerr << "status " << to_string(result.solution.status) << ", objective "
            << precsched_io::g17(result.solution.objective) << ", bound "
            << precsched_io::g17(result.solution.lower_bound) << ", nodes "
            << result.solution.nodes << ", switches "
            << result.schedule.switch_count() << "\n";
  for (const auto& warn : result.warnings) std::cerr << "warning: " << warn << "\n";

  return result.solution.status == SolveStatus::node_limit ? kExitLimit : kExitOk;
}

int cmd_simulate(const RunConfig& cfg, const std::string& mode,
                 const std::string& out) {
  const int N = cfg.scen.sample_count(cfg.sys.h);
  Trajectory traj;
  std::vector<int> sw(N + 1, 1);
  if (mode == "nominal") {
    traj = simulate_nominal(cfg.sys, cfg.scen);
  } else {
    const Precision p = mode == "lo" ? Precision::lo : Precision::hi;
    traj = simulate_rounded(cfg.sys, cfg.scen, Schedule::uniform(N, p), cfg.prec);
    if (p == Precision::lo) sw.assign(N + 1, 0);
  }
  emit(precsched_io::trajectory_csv(traj, cfg.sys, cfg.scen, sw), out);
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg, const std::string& schedule_path,
               bool as_json, const std::string& out) {
  precsched_io::ScheduleFile file =
      precsched_io::parse_schedule_file(read_file(schedule_path));
  VerificationReport rep =
      verify_schedule(file.schedule, cfg.sys, cfg.scen, cfg.prec);
  emit(as_json ? precsched_io::report_json(rep) : precsched_io::render_report(rep),
       out);
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, const std::string& schedule_path,
               bool as_json, const std::string& out) {
  Schedule sched;
  if (!schedule_path.empty()) {
    sched = precsched_io::parse_schedule_file(read_file(schedule_path)).schedule;
  } else {
    SynthesisOptions opts;
    opts.w1 = cfg.w1;
    opts.w2 = cfg.w2;
    opts.limits = cfg.limits;
    opts.metrics = cfg.metrics;
    sched = synthesize_schedule(cfg.sys, cfg.scen, opts).schedule;
  }
  ComparisonTable table = compare_baselines(cfg.sys, cfg.scen, sched, cfg.prec);
  emit(as_json ? precsched_io::comparison_json(table)
               : precsched_io::render_comparison(table),
       out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"precision-switching schedule synthesis for LTI feedback loops"};
  app.require_subcommand(1);

  std::string config_path, out_path, schedule_path, export_path;
  std::string mode = "nominal";
  bool as_json = false;

  auto configure = [&](CLI::App* sub, bool json_flag) {
    sub->add_option("config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_path, "write output to this file instead of stdout");
    if (json_flag) sub->add_flag("--json", as_json, "emit JSON instead of text");
    return sub;
  };

  CLI::App* intervals = configure(app.add_subcommand(
      "intervals", "print the switching windows and their count"), true);
  CLI::App* schedule = configure(app.add_subcommand(
      "schedule", "synthesize the optimal precision-switching schedule"), false);
  schedule->add_option("--export-problem", export_path,
                       "also write the full program in text form");
  CLI::App* simulate = configure(app.add_subcommand(
      "simulate", "emit a trajectory CSV"), false);
  simulate->add_option("--precision", mode, "nominal, lo, or hi")
      ->check(CLI::IsMember({"nominal", "lo", "hi"}));
  CLI::App* verify = configure(app.add_subcommand(
      "verify", "check a schedule against the model and the emulation"), true);
  verify->add_option("--schedule", schedule_path, "schedule file to verify")
      ->required();
  CLI::App* report = configure(app.add_subcommand(
      "report", "all-lo / all-hi / switching comparison table"), true);
  report->add_option("--schedule", schedule_path,
                     "schedule file (synthesized when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig cfg = precsched_io::parse_config(config_path);
    if (intervals->parsed()) return cmd_intervals(cfg, as_json, out_path);
    if (schedule->parsed()) return cmd_schedule(cfg, out_path, export_path);
    if (simulate->parsed()) return cmd_simulate(cfg, mode, out_path);
    if (verify->parsed()) return cmd_verify(cfg, schedule_path, as_json, out_path);
    if (report->parsed()) return cmd_report(cfg, schedule_path, as_json, out_path);
    return kExitUsage;
  } catch (const precsched_io::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    if (what.rfind("no feasible schedule", 0) == 0) return kExitInfeasible;
    if (what.rfind("brute force refused", 0) == 0) return kExitLimit;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
