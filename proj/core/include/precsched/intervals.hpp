#pragma once

#include <string>
#include <utility>
#include <vector>

#include "precsched/lti.hpp"

namespace precsched {

// Ordered, disjoint switching windows [L_beta, U_beta] in sample indices.
struct SwitchingWindows {
  std::vector<std::pair<int, int>> windows;
  int mu() const { return static_cast<int>(windows.size()); }
};

struct WindowsBuild {
  SwitchingWindows windows;
  std::vector<std::string> warnings;  // e.g. post-settle windows dropped at N
};

struct WindowDiagnostics {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

// Builds the window set from the step instants and metrics:
//   - first window [ceil(T_p/h), ceil(T_s/h)];
//   - per step j >= 2, [ceil(t_j/h), ceil((t_j+T_r/2)/h)] and
//     [ceil((t_j+T_p)/h), ceil((t_j+T_s)/h)];
//   - post-settle windows [tau + k*s, tau + k*s + 1] of width 2 with
//     tau = ceil((t_r+2T_s)/h), s = ceil(T_s/h), one per started T_s stride
//     left in the horizon; windows ending past N are dropped with a warning.
// T_s comes from the scenario; T_p and T_r from the metrics. All ceilings are
// evaluated in integer microseconds. Throws std::runtime_error naming the
// colliding pair when consecutive windows overlap.
WindowsBuild build_switching_windows(const ScenarioSpec& scen,
                                     const TimingMetrics& metrics, double h,
                                     int N);

// Ordering, disjointness and range diagnostics; returns all violations.
WindowDiagnostics validate_windows(const SwitchingWindows& w, int N);

}  // namespace precsched
