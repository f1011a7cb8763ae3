#include "precsched/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace precsched {

namespace {

std::int64_t micros(double seconds) { return std::llround(seconds * 1e6); }

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  std::int64_t d = a / b;
  return d * b < a ? d + 1 : d;
}

}  // namespace

WindowsBuild build_switching_windows(const ScenarioSpec& scen,
                                     const TimingMetrics& metrics, double h,
                                     int N) {
  WindowsBuild out;
  const std::int64_t hu = micros(h);
  const std::int64_t Tu = micros(scen.horizon);
  const std::int64_t Tsu = micros(scen.settling_time);
  const std::int64_t Tpu = micros(metrics.T_p);
  const std::int64_t Tru = micros(metrics.T_r);
  auto idx = [&](std::int64_t t_us) { return static_cast<int>(ceil_div(t_us, hu)); };

  auto& windows = out.windows.windows;
  // Any window reaching past the horizon is dropped (with a warning); a
  // scenario that never settles inside the horizon simply has no windows.
  auto add = [&](int lo, int hi, const char* what) {
    if (hi > N) {
      std::ostringstream warn;
      warn << "dropped " << what << " window [" << lo << ", " << hi
           << "]: ends past the horizon sample " << N;
      out.warnings.push_back(warn.str());
      return;
    }
    windows.emplace_back(lo, hi);
  };
  // Sample 0 is pinned hi, so the first window cannot open before sample 1.
  add(std::max(1, idx(Tpu)), idx(Tsu), "settling");
  for (std::size_t j = 1; j < scen.steps.size(); ++j) {
    const std::int64_t tj = micros(scen.steps[j].t);
    add(idx(tj), idx(tj + Tru / 2), "rise");
    add(idx(tj + Tpu), idx(tj + Tsu), "settling");
  }

  const std::int64_t tr = micros(scen.steps.back().t);
  const std::int64_t tail = Tu - tr - 2 * Tsu;
  const std::int64_t post = tail > 0 ? ceil_div(tail, Tsu) : 0;
  const int tau = idx(tr + 2 * Tsu);
  const int stride = idx(Tsu);
  for (std::int64_t k = 0; k < post; ++k) {
    const int lo = static_cast<int>(tau + k * stride);
    add(lo, lo + 1, "post-settle");
  }

  for (std::size_t b = 1; b < windows.size(); ++b) {
    if (windows[b].first <= windows[b - 1].second) {
      std::ostringstream err;
      err << "switching windows " << b << " and " << b + 1 << " overlap: ["
          << windows[b - 1].first << ", " << windows[b - 1].second << "] vs ["
          << windows[b].first << ", " << windows[b].second << "]";
      throw std::runtime_error(err.str());
    }
  }
  return out;
}

WindowDiagnostics validate_windows(const SwitchingWindows& w, int N) {
  WindowDiagnostics diag;
  const auto& ws = w.windows;
  for (std::size_t b = 0; b < ws.size(); ++b) {
    std::ostringstream msg;
    if (ws[b].first < 1 || ws[b].second > N) {
      msg << "window " << b + 1 << " [" << ws[b].first << ", " << ws[b].second
          << "] out of range [1, " << N << "]";
      diag.problems.push_back(msg.str());
    } else if (ws[b].first > ws[b].second) {
      msg << "window " << b + 1 << " is empty";
      diag.problems.push_back(msg.str());
    }
    if (b > 0 && ws[b].first <= ws[b - 1].second) {
      std::ostringstream omsg;
      omsg << "windows " << b << " and " << b + 1 << " overlap or are out of order";
      diag.problems.push_back(omsg.str());
    }
  }
  return diag;
}

}  // namespace precsched
