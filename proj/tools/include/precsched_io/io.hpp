#pragma once

#include <string>
#include <vector>

#include "precsched/scheduler.hpp"

namespace precsched_io {

// Shortest text that still round-trips a double exactly (%.17g).
std::string g17(double v);

// Columns: sample,t_seconds,sw,y_1..y_q,band_lo,band_hi,cum_cost. The band
// columns carry the active step's corridor for the primary output; cum_cost
// accumulates the LQR cost in the scenario's cost coordinates.
std::string trajectory_csv(const precsched::Trajectory& traj,
                           const precsched::SystemSpec& sys,
                           const precsched::ScenarioSpec& scen,
                           const std::vector<int>& sw);

struct ScheduleFile {
  precsched::Schedule schedule;
  int mu = 0;
  double gap = 0.0;
  double objective = 0.0;
};

std::string schedule_file_text(const ScheduleFile& f);
// Throws std::runtime_error on malformed input.
ScheduleFile parse_schedule_file(const std::string& text);

std::string render_windows(const precsched::SwitchingWindows& w,
                           const std::vector<std::string>& warnings);
std::string render_report(const precsched::VerificationReport& r);
std::string render_comparison(const precsched::ComparisonTable& t);

std::string windows_json(const precsched::SwitchingWindows& w);
std::string report_json(const precsched::VerificationReport& r);
std::string comparison_json(const precsched::ComparisonTable& t);

}  // namespace precsched_io
